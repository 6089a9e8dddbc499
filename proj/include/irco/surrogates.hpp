#pragma once

#include <span>
#include <vector>

#include "irco/metrics.hpp"

namespace irco {

struct SurrogateConfig {
  enum class Kind { Sigmoid, Softplus };
  Kind kind = Kind::Sigmoid;
  double temperature = 1.0;
};

/// Value and first two derivatives of x -> base(temperature * x).
struct SigmaValue {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

SigmaValue sigma(const SurrogateConfig& cfg, double x);

/// A smoothed quantity as a function of one threshold and the per-example
/// scores, with the partials needed by the implicit gradient and the slope
/// regularizer.
struct SmoothEval {
  double value = 0.0;
  double d_lambda = 0.0;
  double d2_lambda = 0.0;
  std::vector<double> d_score;         // d value / d p_j
  std::vector<double> d_lambda_score;  // d^2 value / d lambda d p_j

  void resize(std::size_t n);
  SmoothEval& operator+=(const SmoothEval& other);
  SmoothEval& operator*=(double c);
};

/// Smoothed confusion counts at one threshold. "Above" counts (tp, fp, pp) use
/// sigma(p - lambda); their complements (fn_, tn) use sigma(-(p - lambda)).
struct SmoothCounts {
  SmoothEval tp, fp, fn_, tn, pp;
  double n_pos = 0.0;
  double n_neg = 0.0;
  double n() const { return n_pos + n_neg; }
};

/// `include`, when given, masks examples out of every count (their score
/// derivatives are zero). Used for group-restricted rates.
SmoothCounts smooth_counts(std::span<const double> scores, std::span<const int> labels,
                           double lambda, const SurrogateConfig& cfg,
                           std::span<const unsigned char> include = {});

/// Smoothed rate from smoothed counts, by the same formulas as `rate`, with
/// derivatives by the quotient rule. Precision needs a predicted-positive mass
/// above 1e-12.
SmoothEval smooth_rate(RateKind kind, const SmoothCounts& counts);

/// Convenience: smooth_counts (restricted to kind.group when set) followed by
/// smooth_rate.
SmoothEval smooth_rate(RateKind kind, std::span<const double> scores, std::span<const int> labels,
                       double lambda, const SurrogateConfig& cfg,
                       std::span<const int> groups = {});

}  // namespace irco
