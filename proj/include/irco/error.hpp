#pragma once

#include <stdexcept>
#include <string>

namespace irco {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A batch lacks the population a rate needs (no positives, empty group, ...).
/// Trainers skip such minibatches instead of aborting.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// |dg/dlambda| fell below the implicit-gradient guard.
class DegenerateSlopeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace irco
