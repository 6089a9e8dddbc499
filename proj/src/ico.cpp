#include "irco/ico.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "irco/baselines.hpp"
#include "irco/error.hpp"
#include "train_loop.hpp"

namespace irco {

using detail::as_span;

void validate(const TrainerConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (cfg.correction_period < 1) throw std::invalid_argument("correction_period must be >= 1");
  if (cfg.accumulation_k < 1) throw std::invalid_argument("accumulation_k must be >= 1");
  if (!(cfg.surrogate.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (cfg.reg_strength < 0.0) throw std::invalid_argument("reg_strength must be non-negative");
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.batch_size < 0) throw std::invalid_argument("batch_size must be >= 0");
  if (cfg.warm_start_epochs < 0) throw std::invalid_argument("warm_start_epochs must be >= 0");
}

OptimizerState make_optimizer_state(OptimizerKind kind, Eigen::Index size) {
  OptimizerState s;
  s.kind = kind;
  s.first = Eigen::VectorXd::Zero(size);
  s.second = kind == OptimizerKind::Adagrad ? Eigen::VectorXd::Constant(size, 0.1)
                                            : Eigen::VectorXd::Zero(size);
  return s;
}

void optimizer_step(OptimizerState& s, Eigen::VectorXd& theta, const Eigen::VectorXd& g,
                    double lr) {
  if (g.size() != theta.size() || s.first.size() != theta.size())
    throw std::invalid_argument("optimizer shape mismatch");
  if (!g.allFinite()) throw DivergenceError("divergence");
  ++s.step;
  switch (s.kind) {
    case OptimizerKind::SGD:
      theta -= lr * g;
      break;
    case OptimizerKind::Adam: {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      s.first = b1 * s.first + (1.0 - b1) * g;
      s.second = b2 * s.second + (1.0 - b2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.step));
      theta.array() -= lr * (s.first.array() / c1) / ((s.second.array() / c2).sqrt() + eps);
      break;
    }
    case OptimizerKind::Adagrad:
      s.second += g.cwiseProduct(g);
      theta.array() -= lr * g.array() / s.second.array().sqrt();
      break;
  }
  if (!theta.allFinite()) throw DivergenceError("divergence");
}

namespace {

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

SmoothProblem smooth_at(const ProblemSpec& problem, const ModelParams& params, const Batch& batch,
                        const ThresholdState& thresholds, const SurrogateConfig& cfg) {
  const Eigen::VectorXd scores = forward(params, batch.features);
  return evaluate_smooth(problem, as_span(scores), batch.labels, batch.groups, thresholds.lambdas,
                         cfg);
}

// Slope of the normalized constraint (at-least constraints flip sign).
double normalized_slope(const ConstraintSpec& c, double slope) {
  return c.relation == Relation::AtLeast ? -slope : slope;
}

}  // namespace

ImplicitGradient implicit_gradient(const ProblemSpec& problem, const ModelParams& params,
                                   const Batch& batch, const ThresholdState& thresholds,
                                   const SurrogateConfig& cfg) {
  const SmoothProblem sp = smooth_at(problem, params, batch, thresholds, cfg);
  const std::size_t m = problem.num_thresholds();
  ImplicitGradient out;
  out.objective = sp.objective;
  out.f_dlambda = sp.objective_d_lambda;
  for (std::size_t i = 0; i < m; ++i) {
    const double slope = sp.constraints[i].d_lambda;
    if (!(std::abs(slope) > kSlopeGuard)) throw DegenerateSlopeError("degenerate constraint slope");
    out.slopes.push_back(slope);
    out.ratios.push_back(out.f_dlambda[i] / slope);
    out.constraint_values.push_back(sp.constraints[i].value);
    out.xi_grad.push_back(-out.f_dlambda[i] / normalized_slope(problem.constraints[i], slope));
  }

  const Eigen::VectorXd f_score = to_eigen(sp.objective_d_score);
  if (m == 1) {
    const Eigen::VectorXd h =
        -vjp(params, batch.features, to_eigen(sp.constraints[0].d_score)) / out.slopes[0];
    out.g_theta = vjp(params, batch.features, f_score) + out.f_dlambda[0] * h;
    out.h_grads.push_back(h);
    return out;
  }
  Eigen::VectorXd w = f_score;
  for (std::size_t i = 0; i < m; ++i) w -= out.ratios[i] * to_eigen(sp.constraints[i].d_score);
  out.g_theta = vjp(params, batch.features, w);
  return out;
}

Eigen::VectorXd implicit_gradient_naive(const ProblemSpec& problem, const ModelParams& params,
                                        const Batch& batch, const ThresholdState& thresholds,
                                        const SurrogateConfig& cfg) {
  const SmoothProblem sp = smooth_at(problem, params, batch, thresholds, cfg);
  Eigen::VectorXd g = vjp(params, batch.features, to_eigen(sp.objective_d_score));
  for (std::size_t i = 0; i < problem.num_thresholds(); ++i) {
    const double slope = sp.constraints[i].d_lambda;
    if (!(std::abs(slope) > kSlopeGuard)) throw DegenerateSlopeError("degenerate constraint slope");
    const Eigen::VectorXd grad_g = vjp(params, batch.features, to_eigen(sp.constraints[i].d_score));
    g -= (sp.objective_d_lambda[i] / slope) * grad_g;
  }
  return g;
}

Eigen::VectorXd objective_gradient(const ProblemSpec& problem, const ModelParams& params,
                                   const Batch& batch, const ThresholdState& thresholds,
                                   const SurrogateConfig& cfg) {
  const SmoothProblem sp = smooth_at(problem, params, batch, thresholds, cfg);
  return vjp(params, batch.features, to_eigen(sp.objective_d_score));
}

ThresholdState threshold_gradient_update(const ProblemSpec& problem, const ThresholdState& state,
                                         const ImplicitGradient& grad,
                                         const Eigen::VectorXd& delta_theta,
                                         const std::vector<double>& delta_xi) {
  ThresholdState next = state;
  if (!grad.ratio_mode()) {
    for (std::size_t i = 0; i < grad.h_grads.size(); ++i)
      next.lambdas[i] += grad.h_grads[i].dot(delta_theta);
  }
  for (std::size_t i = 0; i < delta_xi.size(); ++i) {
    if (delta_xi[i] == 0.0) continue;
    next.lambdas[i] -= delta_xi[i] / normalized_slope(problem.constraints[i], grad.slopes[i]);
  }
  return next;
}

ThresholdState correction_step(const ProblemSpec& problem, const ModelParams& params,
                               const Batch& batch, const ThresholdState& previous,
                               bool only_if_violated) {
  const Eigen::VectorXd scores = forward(params, batch.features);
  ThresholdState next = previous;
  next.lambdas = correct_thresholds(problem, as_span(scores), batch.labels, batch.groups,
                                    previous.lambdas, only_if_violated);
  if (next.has_slacks()) {
    std::vector<double> g;
    try {
      g = unrelaxed_constraints(problem, as_span(scores), batch.labels, batch.groups, next.lambdas);
    } catch (const DegenerateError& e) {
      spdlog::warn("slack reset skipped ({})", e.what());
      return next;
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      const ConstraintSpec& c = problem.constraints[i];
      next.slacks[i] = c.inequality() ? std::max(0.0, -normalized(c, g[i])) : 0.0;
    }
  }
  return next;
}

namespace {

double smooth_constraint(const ConstraintSpec& c, std::span<const double> scores,
                         std::span<const int> labels, std::span<const int> groups, double lambda,
                         const SurrogateConfig& cfg) {
  const double v = c.count_form ? smooth_counts(scores, labels, lambda, cfg).pp.value
                                : smooth_rate(c.rate, scores, labels, lambda, cfg, groups).value;
  return v - c.target;
}

}  // namespace

std::vector<double> solve_smooth_thresholds(const ProblemSpec& problem,
                                            std::span<const double> scores,
                                            std::span<const int> labels,
                                            std::span<const int> groups,
                                            const SurrogateConfig& cfg) {
  if (scores.empty()) throw std::invalid_argument("empty batch");
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  std::vector<double> out(problem.num_thresholds(), 0.0);
  for (const ConstraintSpec& c : problem.constraints) {
    auto phi = [&](double l) { return smooth_constraint(c, scores, labels, groups, l, cfg); };
    double lo = *mn - 1.0, hi = *mx + 1.0;
    double flo = phi(lo), fhi = phi(hi);
    for (int it = 0; it < 200 && !(flo * fhi <= 0.0); ++it) {
      const double w = hi - lo;
      lo -= w;
      hi += w;
      flo = phi(lo);
      fhi = phi(hi);
    }
    if (!(flo * fhi <= 0.0)) throw DegenerateError("smoothed constraint has no root");
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (!(mid > lo && mid < hi)) break;
      const double fm = phi(mid);
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    out[static_cast<std::size_t>(c.threshold)] = 0.5 * (lo + hi);
  }
  return out;
}

double implicit_gradient_check(const ProblemSpec& problem, const ModelParams& params,
                               const Batch& batch, const SurrogateConfig& cfg) {
  auto lambdas_at = [&](const ModelParams& p) {
    const Eigen::VectorXd s = forward(p, batch.features);
    ThresholdState t;
    t.lambdas = solve_smooth_thresholds(problem, as_span(s), batch.labels, batch.groups, cfg);
    return t;
  };
  auto objective_at = [&](const ModelParams& p) {
    return smooth_at(problem, p, batch, lambdas_at(p), cfg).objective;
  };
  const Eigen::VectorXd g = implicit_gradient(problem, params, batch, lambdas_at(params), cfg).g_theta;
  Eigen::VectorXd fd(g.size());
  ModelParams probe = params;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(params.theta[j]));
    probe.theta[j] = params.theta[j] + h;
    const double up = objective_at(probe);
    probe.theta[j] = params.theta[j] - h;
    const double down = objective_at(probe);
    probe.theta[j] = params.theta[j];
    fd[j] = (up - down) / (2.0 * h);
  }
  return g.norm() == 0.0 ? fd.norm() : (g - fd).norm() / g.norm();
}

double regularizer_penalty(const ProblemSpec& problem, const ModelParams& params,
                           const Batch& batch, const ThresholdState& thresholds, double strength,
                           const SurrogateConfig& cfg) {
  if (strength < 0.0) throw std::invalid_argument("strength must be non-negative");
  if (strength == 0.0) return 0.0;
  const SmoothProblem sp = smooth_at(problem, params, batch, thresholds, cfg);
  double sum = 0.0;
  for (const SmoothEval& g : sp.constraints) sum += g.d_lambda * g.d_lambda;
  return strength * sum;
}

Eigen::VectorXd regularizer_gradient(const ProblemSpec& problem, const ModelParams& params,
                                     const Batch& batch, const ThresholdState& thresholds,
                                     double strength, const SurrogateConfig& cfg) {
  if (strength < 0.0) throw std::invalid_argument("strength must be non-negative");
  if (strength == 0.0) return Eigen::VectorXd::Zero(params.theta.size());
  const SmoothProblem sp = smooth_at(problem, params, batch, thresholds, cfg);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(batch.size()));
  for (const SmoothEval& g : sp.constraints)
    w += (2.0 * strength * g.d_lambda) * to_eigen(g.d_lambda_score);
  return vjp(params, batch.features, w);
}

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history) {
  const std::size_t m = history.empty() ? 0 : history.front().lambdas.size();
  out << "epoch,step,train_objective,train_constraint_residual,val_metric";
  for (std::size_t i = 0; i < m; ++i) out << ",lambda_" << i;
  out << '\n';
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (const HistoryRow& r : history) {
    out << r.epoch << ',' << r.step << ',' << num(r.train_objective) << ','
        << num(r.train_constraint_residual) << ',' << num(r.val_metric);
    for (double l : r.lambdas) out << ',' << num(l);
    out << '\n';
  }
}

TrainResult train(const ProblemSpec& problem, const Dataset& dataset, const ArchSpec& arch,
                  const TrainerConfig& cfg) {
  validate(cfg);
  if (arch.input_dim != dataset.dim()) throw std::invalid_argument("arch input_dim != data dim");
  detail::EpochMonitor monitor(problem, dataset);
  const std::size_t m = problem.num_thresholds();
  const bool slack_mode =
      cfg.inequality_mode == InequalityMode::Slack &&
      std::any_of(problem.constraints.begin(), problem.constraints.end(),
                  [](const ConstraintSpec& c) { return c.inequality(); });

  TrainResult result;
  ModelParams params = init(arch, cfg.seed);
  cross_entropy_warm_start(params, dataset, monitor.train_indices(), cfg);
  OptimizerState opt = make_optimizer_state(cfg.optimizer, params.theta.size());
  OptimizerState slack_opt = make_optimizer_state(cfg.optimizer, static_cast<Eigen::Index>(m));
  ThresholdState state;
  state.lambdas.assign(m, 0.0);
  if (slack_mode) state.slacks.assign(m, 0.0);

  const auto& train_idx = monitor.train_indices();
  {
    const auto first = detail::epoch_batches(train_idx, cfg.batch_size, cfg.seed, 0);
    detail::RecentBatches seed_batches(static_cast<std::size_t>(cfg.accumulation_k));
    for (std::size_t b = 0; b < first.size() && b < static_cast<std::size_t>(cfg.accumulation_k); ++b)
      seed_batches.push(first[b]);
    const auto idx = seed_batches.concatenated();
    state = correction_step(problem, params, dataset.rows(idx), state, false);
  }

  ModelParams best_params = params;
  ThresholdState best_state = state;
  detail::RecentBatches recent(static_cast<std::size_t>(cfg.accumulation_k));
  std::int64_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : detail::epoch_batches(train_idx, cfg.batch_size, cfg.seed, epoch)) {
      const Batch batch = dataset.rows(idx);
      recent.push(idx);

      std::optional<ImplicitGradient> ig;
      Eigen::VectorXd g;
      try {
        ig = implicit_gradient(problem, params, batch, state, cfg.surrogate);
        g = ig->g_theta;
      } catch (const DegenerateSlopeError&) {
        try {
          g = objective_gradient(problem, params, batch, state, cfg.surrogate);
        } catch (const DegenerateError&) {
          ++result.skipped_batches;
          continue;
        }
        ++result.fallback_steps;
        spdlog::debug("slope guard tripped at step {}; using objective gradient only", step + 1);
      } catch (const DegenerateError&) {
        ++result.skipped_batches;
        continue;
      }
      if (cfg.reg_strength > 0.0)
        g += regularizer_gradient(problem, params, batch, state, cfg.reg_strength, cfg.surrogate);

      const Eigen::VectorXd before = params.theta;
      optimizer_step(opt, params.theta, g, cfg.learning_rate);
      const Eigen::VectorXd delta_theta = params.theta - before;

      std::vector<double> delta_xi;
      if (slack_mode && ig) {
        Eigen::VectorXd xi = to_eigen(state.slacks);
        Eigen::VectorXd gxi = to_eigen(ig->xi_grad);
        for (std::size_t i = 0; i < m; ++i)
          if (!problem.constraints[i].inequality()) gxi[static_cast<Eigen::Index>(i)] = 0.0;
        optimizer_step(slack_opt, xi, gxi, cfg.learning_rate);
        xi = xi.cwiseMax(0.0);
        delta_xi.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
          delta_xi[i] = xi[static_cast<Eigen::Index>(i)] - state.slacks[i];
          state.slacks[i] = xi[static_cast<Eigen::Index>(i)];
        }
      }

      ++step;
      if (step % cfg.correction_period == 0) {
        state = correction_step(problem, params, dataset.rows(recent.concatenated()), state, true);
      } else if (ig) {
        state = threshold_gradient_update(problem, state, *ig, delta_theta, delta_xi);
      }
    }
    if (monitor.record(epoch, step, params, state.lambdas, result.history)) {
      best_params = params;
      best_state = state;
    }
  }

  if (!monitor.has_best()) {
    spdlog::warn("no epoch produced a finite validation metric; keeping the last iterate");
    best_params = params;
    best_state = state;
  }
  result.best_epoch = monitor.best_epoch();
  result.best_val = monitor.best();
  result.thresholds = correction_step(problem, best_params, monitor.train(), best_state, true);
  result.params = std::move(best_params);
  return result;
}

}  // namespace irco
