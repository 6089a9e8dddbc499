#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace irco {

/// Scalar scoring model: linear when `hidden` is empty, otherwise a ReLU MLP
/// with a linear head.
struct ArchSpec {
  enum class Activation { ReLU };

  int input_dim = 1;
  std::vector<int> hidden;
  Activation activation = Activation::ReLU;
  bool bias = true;

  bool operator==(const ArchSpec&) const = default;
};

/// Flat parameter vector. Layer l stores its weight matrix row-major
/// (out x in) followed by its bias (when enabled); layers are in input order.
struct ModelParams {
  ArchSpec arch;
  Eigen::VectorXd theta;
};

std::size_t param_count(const ArchSpec& arch);
void validate(const ArchSpec& arch);

/// Glorot-uniform weights, zero biases; deterministic per seed.
ModelParams init(const ArchSpec& arch, std::uint64_t seed);

/// Scores for every row of `features` (n x input_dim).
Eigen::VectorXd forward(const ModelParams& params, const Eigen::MatrixXd& features);

/// Gradient over theta of sum_i weights_i * score_i, by reverse accumulation.
/// ReLU has subgradient 0 at exactly-zero pre-activations.
Eigen::VectorXd vjp(const ModelParams& params, const Eigen::MatrixXd& features,
                    const Eigen::VectorXd& weights);

/// Max coordinate error between vjp and central differences of
/// sum_i weights_i * score_i, relative to the larger of the two gradients'
/// infinity norms (0 when both vanish).
double grad_check(const ModelParams& params, const Eigen::MatrixXd& features,
                  const Eigen::VectorXd& weights);

/// On-disk model: {"arch": {...}, "theta": [...], "thresholds": [...]}.
struct Checkpoint {
  ModelParams params;
  std::vector<double> thresholds;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace irco
