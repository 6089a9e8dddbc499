#include "irco/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "irco/error.hpp"
#include "train_loop.hpp"

namespace irco {

using detail::as_span;

std::pair<double, Eigen::VectorXd> cross_entropy(const ModelParams& params, const Batch& batch) {
  if (batch.size() == 0) throw DegenerateError("empty batch");
  const Eigen::VectorXd s = forward(params, batch.features);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  Eigen::VectorXd w(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double x = s[i];
    const double y = batch.labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;
    loss += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))) - y * x;
    const double p = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    w[i] = (p - y) * inv_n;
  }
  loss *= inv_n;
  if (!std::isfinite(loss)) throw DivergenceError("divergence: non-finite loss");
  return {loss, vjp(params, batch.features, w)};
}

void cross_entropy_warm_start(ModelParams& params, const Dataset& dataset,
                              const std::vector<std::size_t>& train_idx, const TrainerConfig& cfg) {
  if (cfg.warm_start_epochs <= 0) return;
  OptimizerState opt = make_optimizer_state(cfg.optimizer, params.theta.size());
  for (int e = 0; e < cfg.warm_start_epochs; ++e)
    for (const auto& idx : detail::epoch_batches(train_idx, cfg.batch_size, ~cfg.seed, e))
      optimizer_step(opt, params.theta, cross_entropy(params, dataset.rows(idx)).second,
                     cfg.learning_rate);
}

namespace {

// Unconstrained minibatch training with per-epoch selection; thresholds are
// fit on the validation split after each epoch and once more at the end.
template <class LossGrad>
TrainResult train_unconstrained(const ProblemSpec& problem, const Dataset& dataset,
                                const ArchSpec& arch, const TrainerConfig& cfg,
                                LossGrad&& loss_grad) {
  validate(cfg);
  if (arch.input_dim != dataset.dim()) throw std::invalid_argument("arch input_dim != data dim");
  detail::EpochMonitor monitor(problem, dataset);
  const std::size_t m = problem.num_thresholds();

  TrainResult result;
  ModelParams params = init(arch, cfg.seed);
  OptimizerState opt = make_optimizer_state(cfg.optimizer, params.theta.size());
  ThresholdState state;
  state.lambdas.assign(m, 0.0);
  ModelParams best_params = params;
  std::int64_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : detail::epoch_batches(monitor.train_indices(), cfg.batch_size, cfg.seed,
                                                 epoch)) {
      const Batch batch = dataset.rows(idx);
      Eigen::VectorXd g;
      try {
        g = loss_grad(params, batch).second;
      } catch (const DegenerateError&) {
        ++result.skipped_batches;
        continue;
      }
      optimizer_step(opt, params.theta, g, cfg.learning_rate);
      ++step;
    }
    state = correction_step(problem, params, monitor.val(), state, false);
    if (monitor.record(epoch, step, params, state.lambdas, result.history)) best_params = params;
  }
  if (!monitor.has_best()) best_params = params;
  result.best_epoch = monitor.best_epoch();
  result.best_val = monitor.best();
  result.thresholds = correction_step(problem, best_params, monitor.val(), state, false);
  result.params = std::move(best_params);
  return result;
}

double count_scale(const ConstraintSpec& c, std::size_t n) {
  return c.count_form ? 1.0 / static_cast<double>(n) : 1.0;
}

double sign_of(const ConstraintSpec& c) { return c.relation == Relation::AtLeast ? -1.0 : 1.0; }

}  // namespace

ModelParams train_cross_entropy(const Dataset& dataset, const ArchSpec& arch,
                                const TrainerConfig& cfg) {
  validate(cfg);
  if (arch.input_dim != dataset.dim()) throw std::invalid_argument("arch input_dim != data dim");
  const auto train_idx = dataset.indices(Split::Train);
  if (train_idx.empty()) throw std::invalid_argument("dataset has no train split");
  ModelParams params = init(arch, cfg.seed);
  OptimizerState opt = make_optimizer_state(cfg.optimizer, params.theta.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch)
    for (const auto& idx : detail::epoch_batches(train_idx, cfg.batch_size, cfg.seed, epoch))
      optimizer_step(opt, params.theta, cross_entropy(params, dataset.rows(idx)).second,
                     cfg.learning_rate);
  return params;
}

TrainResult train_cross_entropy(const ProblemSpec& problem, const Dataset& dataset,
                                const ArchSpec& arch, const TrainerConfig& cfg) {
  return train_unconstrained(problem, dataset, arch, cfg, [](const ModelParams& p, const Batch& b) {
    return cross_entropy(p, b);
  });
}

void dual_update(const ProblemSpec& problem, LagrangianState& state,
                 const std::vector<double>& g) {
  if (!(state.dual_step > 0.0)) throw std::invalid_argument("dual_step must be positive");
  if (g.size() != problem.num_thresholds() || state.multipliers.size() != g.size())
    throw std::invalid_argument("multiplier count mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    const ConstraintSpec& c = problem.constraints[i];
    double mu = state.multipliers[i] + state.dual_step * normalized(c, g[i]);
    if (c.inequality()) mu = std::max(0.0, mu);
    state.multipliers[i] = mu;
  }
}

LagrangianResult train_lagrangian(const ProblemSpec& problem, const Dataset& dataset,
                                  const ArchSpec& arch, const TrainerConfig& cfg,
                                  double dual_step) {
  validate(cfg);
  if (!(dual_step > 0.0)) throw std::invalid_argument("dual_step must be positive");
  if (arch.input_dim != dataset.dim()) throw std::invalid_argument("arch input_dim != data dim");
  detail::EpochMonitor monitor(problem, dataset);
  const std::size_t m = problem.num_thresholds();
  const auto P = static_cast<Eigen::Index>(param_count(arch));

  LagrangianResult out;
  TrainResult& result = out.train;
  ModelParams params = init(arch, cfg.seed);
  cross_entropy_warm_start(params, dataset, monitor.train_indices(), cfg);
  LagrangianState dual{std::vector<double>(m, 0.0), dual_step};
  ThresholdState state;
  state.lambdas.assign(m, 0.0);
  {
    const auto first = detail::epoch_batches(monitor.train_indices(), cfg.batch_size, cfg.seed, 0);
    detail::RecentBatches seed_batches(static_cast<std::size_t>(cfg.accumulation_k));
    for (std::size_t b = 0; b < first.size() && b < static_cast<std::size_t>(cfg.accumulation_k); ++b)
      seed_batches.push(first[b]);
    state = correction_step(problem, params, dataset.rows(seed_batches.concatenated()), state, false);
  }

  Eigen::VectorXd joint(P + static_cast<Eigen::Index>(m));
  OptimizerState opt = make_optimizer_state(cfg.optimizer, joint.size());
  ModelParams best_params = params;
  ThresholdState best_state = state;
  LagrangianState best_dual = dual;
  std::int64_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : detail::epoch_batches(monitor.train_indices(), cfg.batch_size, cfg.seed,
                                                 epoch)) {
      const Batch batch = dataset.rows(idx);
      const Eigen::VectorXd scores = forward(params, batch.features);
      SmoothProblem sp;
      std::vector<double> g;
      try {
        sp = evaluate_smooth(problem, as_span(scores), batch.labels, batch.groups, state.lambdas,
                             cfg.surrogate);
        g = unrelaxed_constraints(problem, as_span(scores), batch.labels, batch.groups,
                                  state.lambdas);
      } catch (const DegenerateError&) {
        ++result.skipped_batches;
        continue;
      }
      Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(sp.objective_d_score.data(),
                                                            scores.size());
      Eigen::VectorXd grad(joint.size());
      for (std::size_t i = 0; i < m; ++i) {
        const ConstraintSpec& c = problem.constraints[i];
        const double coef = dual.multipliers[i] * sign_of(c) * count_scale(c, batch.size());
        w += coef * Eigen::Map<const Eigen::VectorXd>(sp.constraints[i].d_score.data(), w.size());
        grad[P + static_cast<Eigen::Index>(i)] =
            sp.objective_d_lambda[i] + coef * sp.constraints[i].d_lambda;
        g[i] *= count_scale(c, batch.size());
      }
      grad.head(P) = vjp(params, batch.features, w);

      joint.head(P) = params.theta;
      for (std::size_t i = 0; i < m; ++i) joint[P + static_cast<Eigen::Index>(i)] = state.lambdas[i];
      optimizer_step(opt, joint, grad, cfg.learning_rate);
      params.theta = joint.head(P);
      for (std::size_t i = 0; i < m; ++i) state.lambdas[i] = joint[P + static_cast<Eigen::Index>(i)];
      dual_update(problem, dual, g);
      ++step;
    }
    if (monitor.record(epoch, step, params, state.lambdas, result.history)) {
      best_params = params;
      best_state = state;
      best_dual = dual;
    }
  }
  if (!monitor.has_best()) {
    best_params = params;
    best_state = state;
    best_dual = dual;
  }
  result.best_epoch = monitor.best_epoch();
  result.best_val = monitor.best();
  result.params = std::move(best_params);
  result.thresholds = std::move(best_state);
  out.dual = std::move(best_dual);
  return out;
}

std::vector<std::size_t> top_negatives(const Eigen::VectorXd& scores, std::span<const int> labels,
                                       double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must be in (0, 1]");
  if (static_cast<std::size_t>(scores.size()) != labels.size())
    throw std::invalid_argument("scores/labels length mismatch");
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != 1) neg.push_back(i);
  const auto q = static_cast<std::size_t>(
      std::ceil(beta * static_cast<double>(neg.size()) - 1e-9));
  if (q == 0) throw DegenerateError("empty S-");
  std::partial_sort(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(q), neg.end(),
                    [&](std::size_t a, std::size_t b) {
                      const auto ia = static_cast<Eigen::Index>(a);
                      const auto ib = static_cast<Eigen::Index>(b);
                      return scores[ia] != scores[ib] ? scores[ia] > scores[ib] : a < b;
                    });
  neg.resize(q);
  return neg;
}

std::pair<double, Eigen::VectorXd> pairwise_pauc_score_loss(const Eigen::VectorXd& scores,
                                                            std::span<const int> labels,
                                                            const std::vector<std::size_t>& negatives,
                                                            const SurrogateConfig& surrogate) {
  if (negatives.empty()) throw DegenerateError("empty S-");
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) pos.push_back(i);
  if (pos.empty()) throw DegenerateError("no positives in batch");
  const double inv = 1.0 / (static_cast<double>(pos.size()) * static_cast<double>(negatives.size()));
  double loss = 0.0;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(scores.size());
  for (std::size_t i : pos) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j : negatives) {
      const auto jj = static_cast<Eigen::Index>(j);
      const SigmaValue v = sigma(surrogate, scores[jj] - scores[ii]);
      loss += v.value;
      w[jj] += v.d1;
      w[ii] -= v.d1;
    }
  }
  return {loss * inv, w * inv};
}

std::pair<double, Eigen::VectorXd> pairwise_pauc_loss(const ModelParams& params,
                                                      const Batch& batch, double beta,
                                                      const SurrogateConfig& surrogate) {
  const Eigen::VectorXd s = forward(params, batch.features);
  const auto neg = top_negatives(s, batch.labels, beta);
  auto [loss, w] = pairwise_pauc_score_loss(s, batch.labels, neg, surrogate);
  if (!std::isfinite(loss)) throw DivergenceError("divergence: non-finite loss");
  return {loss, vjp(params, batch.features, w)};
}

TrainResult train_pairwise(const ProblemSpec& problem, const Dataset& dataset,
                           const ArchSpec& arch, const TrainerConfig& cfg, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must be in (0, 1]");
  return train_unconstrained(problem, dataset, arch, cfg,
                             [&](const ModelParams& p, const Batch& b) {
                               return pairwise_pauc_loss(p, b, beta, cfg.surrogate);
                             });
}

}  // namespace irco
