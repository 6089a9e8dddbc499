#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "irco/data.hpp"
#include "irco/model.hpp"
#include "irco/problems.hpp"
#include "irco/surrogates.hpp"

namespace irco {

/// Thresholds, plus one non-negative slack per constraint in slack mode.
struct ThresholdState {
  std::vector<double> lambdas;
  std::vector<double> slacks;  // empty unless slack mode

  bool has_slacks() const { return !slacks.empty(); }
};

enum class OptimizerKind { SGD, Adam, Adagrad };
enum class InequalityMode { Search, Slack };

struct TrainerConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 0.01;
  int correction_period = 10;  // N
  int accumulation_k = 1;      // k
  SurrogateConfig surrogate;
  double reg_strength = 0.0;
  int batch_size = 0;  // 0 = full batch
  int epochs = 10;
  std::uint64_t seed = 0;
  InequalityMode inequality_mode = InequalityMode::Search;
  /// Cross-entropy epochs run on the model before constrained training.
  int warm_start_epochs = 0;
};

void validate(const TrainerConfig& cfg);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  Eigen::VectorXd first;   // Adam first moment
  Eigen::VectorXd second;  // Adam second moment / Adagrad accumulator
  std::int64_t step = 0;
};

OptimizerState make_optimizer_state(OptimizerKind kind, Eigen::Index size);

/// One step of SGD, Adam (0.9, 0.999, 1e-8, bias-corrected) or Adagrad
/// (accumulator starts at 0.1). Throws DivergenceError on non-finite input.
void optimizer_step(OptimizerState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& gradient,
                    double learning_rate);

inline constexpr double kSlopeGuard = 1e-10;

struct ImplicitGradient {
  Eigen::VectorXd g_theta;               // gradient of f~(theta, h~(theta))
  std::vector<Eigen::VectorXd> h_grads;  // grad h~_i; only for single-constraint problems
  std::vector<double> ratios;            // r_i = (df~/dlambda_i) / (dg~_i/dlambda_i)
  std::vector<double> f_dlambda;
  std::vector<double> slopes;            // dg~_i/dlambda_i
  std::vector<double> xi_grad;           // d f~ / d xi_i (slack mode)
  double objective = 0.0;
  std::vector<double> constraint_values;  // g~_i

  bool ratio_mode() const { return h_grads.empty(); }
};

/// Implicit gradient at (theta, lambda). With one constraint it forms
/// H = -grad g~ / g~_lambda explicitly; with several it folds every constraint
/// into one per-example weight vector and runs a single VJP. Throws
/// DegenerateSlopeError when some |g~_lambda| <= kSlopeGuard.
ImplicitGradient implicit_gradient(const ProblemSpec& problem, const ModelParams& params,
                                   const Batch& batch, const ThresholdState& thresholds,
                                   const SurrogateConfig& cfg);

/// The same gradient assembled from m + 1 separate VJPs.
Eigen::VectorXd implicit_gradient_naive(const ProblemSpec& problem, const ModelParams& params,
                                        const Batch& batch, const ThresholdState& thresholds,
                                        const SurrogateConfig& cfg);

/// grad_theta f~ at fixed thresholds (the fallback when the slope guard trips).
Eigen::VectorXd objective_gradient(const ProblemSpec& problem, const ModelParams& params,
                                   const Batch& batch, const ThresholdState& thresholds,
                                   const SurrogateConfig& cfg);

/// First-order threshold tracking: lambda_i += <grad h~_i, delta_theta>, and
/// in slack mode lambda_i += -delta_xi_i / g~_lambda,i. The theta part is
/// skipped in ratio mode.
ThresholdState threshold_gradient_update(const ProblemSpec& problem, const ThresholdState& state,
                                         const ImplicitGradient& grad,
                                         const Eigen::VectorXd& delta_theta,
                                         const std::vector<double>& delta_xi = {});

/// Exact correction on unrelaxed rates of `batch` (the concatenated last k
/// minibatches). In slack mode slacks are reset to max(0, -g_i).
ThresholdState correction_step(const ProblemSpec& problem, const ModelParams& params,
                               const Batch& batch, const ThresholdState& previous,
                               bool only_if_violated);

/// h~(theta) on fixed scores: each lambda_i solving g~_i(lambda_i) = 0, found
/// by bracketing and bisection (every constraint rate is monotone in lambda).
std::vector<double> solve_smooth_thresholds(const ProblemSpec& problem,
                                            std::span<const double> scores,
                                            std::span<const int> labels,
                                            std::span<const int> groups,
                                            const SurrogateConfig& cfg);

/// Relative error ||G - FD|| / ||G|| between implicit_gradient and central
/// differences of f~(theta, h~(theta)).
double implicit_gradient_check(const ProblemSpec& problem, const ModelParams& params,
                               const Batch& batch, const SurrogateConfig& cfg);

/// strength * sum_i (dg~_i/dlambda_i)^2 at fixed thresholds.
double regularizer_penalty(const ProblemSpec& problem, const ModelParams& params,
                           const Batch& batch, const ThresholdState& thresholds, double strength,
                           const SurrogateConfig& cfg);
/// Its theta-gradient through one VJP.
Eigen::VectorXd regularizer_gradient(const ProblemSpec& problem, const ModelParams& params,
                                     const Batch& batch, const ThresholdState& thresholds,
                                     double strength, const SurrogateConfig& cfg);

struct HistoryRow {
  int epoch = 0;
  std::int64_t step = 0;
  double train_objective = 0.0;
  double train_constraint_residual = 0.0;
  double val_metric = 0.0;
  std::vector<double> lambdas;
  bool operator==(const HistoryRow&) const = default;
};

/// "epoch,step,train_objective,train_constraint_residual,val_metric,lambda_0..".
void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history);

struct TrainResult {
  ModelParams params;
  ThresholdState thresholds;
  std::vector<HistoryRow> history;
  int best_epoch = -1;
  MetricValue best_val;
  std::int64_t skipped_batches = 0;
  std::int64_t fallback_steps = 0;
};

/// The full training loop: thresholds start from a correction on the first k
/// minibatches, every step applies the implicit gradient (plus regularizer),
/// and every N-th step corrects thresholds exactly; other steps track them to
/// first order. The best epoch by validation metric is kept and its
/// thresholds are re-solved on the whole training split.
TrainResult train(const ProblemSpec& problem, const Dataset& dataset, const ArchSpec& arch,
                  const TrainerConfig& cfg);

}  // namespace irco
