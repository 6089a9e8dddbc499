#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "irco/data.hpp"
#include "irco/ico.hpp"
#include "irco/model.hpp"
#include "irco/problems.hpp"
#include "irco/surrogates.hpp"

namespace irco {

/// Mean log-loss of the logits and its theta-gradient.
std::pair<double, Eigen::VectorXd> cross_entropy(const ModelParams& params, const Batch& batch);

/// `cfg.warm_start_epochs` epochs of cross-entropy descent on `params`, with a
/// fresh optimizer state.
void cross_entropy_warm_start(ModelParams& params, const Dataset& dataset,
                              const std::vector<std::size_t>& train_idx, const TrainerConfig& cfg);

/// Plain cross-entropy training; returns the last iterate.
ModelParams train_cross_entropy(const Dataset& dataset, const ArchSpec& arch,
                                const TrainerConfig& cfg);

/// Cross-entropy training with per-epoch selection by `problem`'s validation
/// metric. Thresholds are fit after the fact on the validation split.
TrainResult train_cross_entropy(const ProblemSpec& problem, const Dataset& dataset,
                                const ArchSpec& arch, const TrainerConfig& cfg);

struct LagrangianState {
  std::vector<double> multipliers;
  double dual_step = 0.01;
};

/// mu_i += dual_step * g_i on normalized unrelaxed constraint values;
/// inequality multipliers are clamped at zero, equality ones are not.
void dual_update(const ProblemSpec& problem, LagrangianState& state,
                 const std::vector<double>& unrelaxed_g);

struct LagrangianResult {
  TrainResult train;
  LagrangianState dual;
};

/// Simultaneous descent on f~ + sum_i mu_i g~_i over (theta, lambda) and
/// projected ascent on the unrelaxed constraints. Count-form constraints are
/// divided by the batch size so all constraints live on the rate scale. The
/// best validation iterate is returned; its thresholds are not re-solved.
LagrangianResult train_lagrangian(const ProblemSpec& problem, const Dataset& dataset,
                                  const ArchSpec& arch, const TrainerConfig& cfg,
                                  double dual_step);

/// Negatives among the top ceil(beta * n_neg) scores of the batch.
std::vector<std::size_t> top_negatives(const Eigen::VectorXd& scores, std::span<const int> labels,
                                       double beta);

/// Mean of sigma(s_j - s_i) over positives i and top-beta negatives j, with
/// its theta-gradient (the negative subset is held fixed).
std::pair<double, Eigen::VectorXd> pairwise_pauc_loss(const ModelParams& params,
                                                      const Batch& batch, double beta,
                                                      const SurrogateConfig& surrogate);

/// Same loss on fixed scores, returning per-example score weights.
std::pair<double, Eigen::VectorXd> pairwise_pauc_score_loss(const Eigen::VectorXd& scores,
                                                            std::span<const int> labels,
                                                            const std::vector<std::size_t>& negatives,
                                                            const SurrogateConfig& surrogate);

/// Minibatch training on the pairwise loss with selection by `problem`.
TrainResult train_pairwise(const ProblemSpec& problem, const Dataset& dataset,
                           const ArchSpec& arch, const TrainerConfig& cfg, double beta);

}  // namespace irco
