#include "irco/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "irco/error.hpp"

namespace irco {

std::string to_string(ProblemSpec::Kind kind) {
  switch (kind) {
    case ProblemSpec::Kind::FnrAtFpr: return "fnr_at_fpr";
    case ProblemSpec::Kind::FprAtFnr: return "fpr_at_fnr";
    case ProblemSpec::Kind::PrecAtRecall: return "prec_at_recall";
    case ProblemSpec::Kind::PrecAtK: return "prec_at_k";
    case ProblemSpec::Kind::PaucRoc: return "pauc_roc";
    case ProblemSpec::Kind::PaucPr: return "pauc_pr";
    case ProblemSpec::Kind::Fairness80: return "fairness_80pct";
  }
  return "unknown";
}

ProblemSpec build_fnr_at_fpr(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  ProblemSpec p;
  p.kind = ProblemSpec::Kind::FnrAtFpr;
  p.beta = beta;
  p.objective.push_back({RateKind::fnr(), 0, 1.0});
  p.constraints.push_back({RateKind::fpr(), beta, Relation::Equals, 0, Sense::AtMost});
  return p;
}

ProblemSpec build_fpr_at_fnr(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  ProblemSpec p;
  p.kind = ProblemSpec::Kind::FprAtFnr;
  p.beta = beta;
  p.objective.push_back({RateKind::fpr(), 0, 1.0});
  p.constraints.push_back({RateKind::fnr(), beta, Relation::Equals, 0, Sense::AtMost});
  return p;
}

ProblemSpec build_prec_at_recall(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in (0, 1]");
  ProblemSpec p;
  p.kind = ProblemSpec::Kind::PrecAtRecall;
  p.beta = beta;
  p.objective.push_back({RateKind::precision(), 0, -1.0});
  p.constraints.push_back({RateKind::recall(), beta, Relation::Equals, 0, Sense::AtLeast});
  return p;
}

ProblemSpec build_prec_at_k(std::int64_t k) {
  if (k < 0) throw std::invalid_argument("k must be non-negative");
  ProblemSpec p;
  p.kind = ProblemSpec::Kind::PrecAtK;
  p.k = k;
  p.objective.push_back({RateKind::precision(), 0, -1.0});
  p.constraints.push_back({RateKind::coverage(), static_cast<double>(k), Relation::Equals, 0,
                           Sense::AtLeast, true});
  return p;
}

ProblemSpec build_pauc_roc(double beta, int grid_m) {
  const auto grid = fpr_grid(beta, grid_m);
  ProblemSpec p;
  p.kind = ProblemSpec::Kind::PaucRoc;
  p.beta = beta;
  p.grid_m = grid_m;
  for (int i = 0; i < grid_m; ++i) {
    p.objective.push_back({RateKind::tpr(), i, -1.0 / grid_m});
    p.constraints.push_back({RateKind::fpr(), grid[static_cast<std::size_t>(i)], Relation::Equals,
                             i, Sense::AtMost});
  }
  return p;
}

ProblemSpec build_pauc_pr(double beta, int grid_m) {
  const auto grid = recall_grid(beta, grid_m);
  ProblemSpec p;
  p.kind = ProblemSpec::Kind::PaucPr;
  p.beta = beta;
  p.grid_m = grid_m;
  for (int i = 0; i < grid_m; ++i) {
    p.objective.push_back({RateKind::precision(), i, -1.0 / grid_m});
    p.constraints.push_back({RateKind::recall(), grid[static_cast<std::size_t>(i)],
                             Relation::Equals, i, Sense::AtLeast});
  }
  return p;
}

ProblemSpec build_fairness_80pct(int num_groups, double floor) {
  if (num_groups < 1) throw std::invalid_argument("num_groups must be positive");
  if (!(floor >= 0.0 && floor <= 1.0)) throw std::invalid_argument("floor must lie in [0, 1]");
  ProblemSpec p;
  p.kind = ProblemSpec::Kind::Fairness80;
  p.uses_groups = true;
  p.floor = floor;
  for (int g = 0; g < num_groups; ++g) {
    p.objective.push_back({RateKind::error(g), g, 1.0, true});
    p.constraints.push_back(
        {RateKind::group_coverage(g), floor, Relation::AtLeast, g, Sense::AtLeast});
  }
  return p;
}

namespace {

void check_inputs(const ProblemSpec& p, std::span<const double> scores,
                  std::span<const int> labels, std::span<const int> groups,
                  std::span<const double> lambdas) {
  if (scores.empty()) throw std::invalid_argument("empty batch");
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ");
  if (lambdas.size() != p.num_thresholds())
    throw std::invalid_argument("expected " + std::to_string(p.num_thresholds()) + " thresholds");
  if (p.uses_groups && groups.size() != scores.size())
    throw std::invalid_argument("problem needs group ids");
}

double group_share(int group, std::span<const int> groups) {
  if (group < 0) return 1.0;
  const auto in = std::count(groups.begin(), groups.end(), group);
  return static_cast<double>(in) / static_cast<double>(groups.size());
}

RateCounts counts_for(RateKind kind, std::span<const double> scores, std::span<const int> labels,
                      std::span<const int> groups, double lambda) {
  if (kind.group < 0) return confusion_counts(scores, labels, lambda);
  RateCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (groups[i] != kind.group) continue;
    const bool predicted = scores[i] > lambda;
    if (labels[i] == 1) {
      ++(predicted ? c.tp : c.fn_);
    } else {
      ++(predicted ? c.fp : c.tn);
    }
  }
  return c;
}

double unrelaxed_g(const ConstraintSpec& c, std::span<const double> scores,
                   std::span<const int> labels, std::span<const int> groups, double lambda) {
  const RateCounts counts = counts_for(c.rate, scores, labels, groups, lambda);
  if (c.count_form) return static_cast<double>(counts.predicted_positive()) - c.target;
  return rate(counts, c.rate) - c.target;
}

}  // namespace

SmoothProblem evaluate_smooth(const ProblemSpec& p, std::span<const double> scores,
                              std::span<const int> labels, std::span<const int> groups,
                              std::span<const double> lambdas, const SurrogateConfig& cfg) {
  check_inputs(p, scores, labels, groups, lambdas);
  SmoothProblem out;
  out.objective_d_lambda.assign(p.num_thresholds(), 0.0);
  out.objective_d_score.assign(scores.size(), 0.0);
  for (const ObjectiveTerm& term : p.objective) {
    const SmoothEval e = smooth_rate(term.rate, scores, labels,
                                     lambdas[static_cast<std::size_t>(term.threshold)], cfg, groups);
    const double w = term.weight * (term.share_weighted ? group_share(term.rate.group, groups) : 1.0);
    out.objective += w * e.value;
    out.objective_d_lambda[static_cast<std::size_t>(term.threshold)] += w * e.d_lambda;
    for (std::size_t j = 0; j < scores.size(); ++j) out.objective_d_score[j] += w * e.d_score[j];
  }
  out.constraints.reserve(p.num_thresholds());
  for (const ConstraintSpec& c : p.constraints) {
    const double lambda = lambdas[static_cast<std::size_t>(c.threshold)];
    SmoothEval g;
    if (c.count_form) {
      g = smooth_counts(scores, labels, lambda, cfg).pp;
    } else {
      g = smooth_rate(c.rate, scores, labels, lambda, cfg, groups);
    }
    g.value -= c.target;
    out.constraints.push_back(std::move(g));
  }
  return out;
}

double normalized(const ConstraintSpec& c, double g) {
  return c.relation == Relation::AtLeast ? -g : g;
}

double unrelaxed_objective(const ProblemSpec& p, std::span<const double> scores,
                           std::span<const int> labels, std::span<const int> groups,
                           std::span<const double> lambdas) {
  check_inputs(p, scores, labels, groups, lambdas);
  double f = 0.0;
  for (const ObjectiveTerm& term : p.objective) {
    const RateCounts c = counts_for(term.rate, scores, labels, groups,
                                    lambdas[static_cast<std::size_t>(term.threshold)]);
    const double w = term.weight * (term.share_weighted ? group_share(term.rate.group, groups) : 1.0);
    f += w * rate(c, term.rate);
  }
  return f;
}

std::vector<double> unrelaxed_constraints(const ProblemSpec& p, std::span<const double> scores,
                                          std::span<const int> labels,
                                          std::span<const int> groups,
                                          std::span<const double> lambdas) {
  check_inputs(p, scores, labels, groups, lambdas);
  std::vector<double> g;
  g.reserve(p.num_thresholds());
  for (const ConstraintSpec& c : p.constraints)
    g.push_back(unrelaxed_g(c, scores, labels, groups, lambdas[static_cast<std::size_t>(c.threshold)]));
  return g;
}

double constraint_residual(const ProblemSpec& p, std::span<const double> scores,
                           std::span<const int> labels, std::span<const int> groups,
                           std::span<const double> lambdas) {
  const auto g = unrelaxed_constraints(p, scores, labels, groups, lambdas);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const ConstraintSpec& c = p.constraints[i];
    const double r = c.inequality() ? std::max(0.0, normalized(c, g[i])) : std::abs(g[i]);
    worst = std::max(worst, r);
  }
  return worst;
}

std::int64_t constraint_population(const ConstraintSpec& c, std::span<const int> labels,
                                   std::span<const int> groups) {
  if (c.count_form) return 1;
  std::int64_t pos = 0;
  std::int64_t neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (c.rate.group >= 0 && groups[i] != c.rate.group) continue;
    (labels[i] == 1 ? pos : neg)++;
  }
  using K = RateKind::Kind;
  switch (c.rate.kind) {
    case K::FPR: return neg;
    case K::FNR:
    case K::TPR:
    case K::Recall: return pos;
    default: return pos + neg;
  }
}

std::vector<double> correct_thresholds(const ProblemSpec& p, std::span<const double> scores,
                                       std::span<const int> labels, std::span<const int> groups,
                                       std::span<const double> previous, bool only_if_violated) {
  check_inputs(p, scores, labels, groups, previous);
  std::vector<double> lambdas(previous.begin(), previous.end());
  for (const ConstraintSpec& c : p.constraints) {
    const auto t = static_cast<std::size_t>(c.threshold);
    try {
      if (only_if_violated && c.inequality() &&
          normalized(c, unrelaxed_g(c, scores, labels, groups, lambdas[t])) <= 0.0)
        continue;
      if (c.count_form) {
        const auto n = static_cast<std::int64_t>(scores.size());
        lambdas[t] = top_k_threshold(scores, std::min(n, static_cast<std::int64_t>(c.target)));
      } else {
        lambdas[t] = exact_threshold(scores, labels, c.rate, c.target, c.correction, groups);
      }
    } catch (const DegenerateError& e) {
      spdlog::warn("correction for {} skipped ({}); keeping threshold {}", to_string(c.rate),
                   e.what(), lambdas[t]);
    }
  }
  return lambdas;
}

bool metric_lower_is_better(const ProblemSpec& p) {
  return p.kind == ProblemSpec::Kind::FnrAtFpr || p.kind == ProblemSpec::Kind::FprAtFnr ||
         p.kind == ProblemSpec::Kind::Fairness80;
}

MetricValue problem_metric(const ProblemSpec& p, std::span<const double> scores,
                           std::span<const int> labels, std::span<const int> groups,
                           std::span<const double> lambdas) {
  using K = ProblemSpec::Kind;
  switch (p.kind) {
    case K::FnrAtFpr: {
      const double t = exact_threshold(scores, labels, RateKind::fpr(), p.beta, Sense::AtMost);
      return {rate(confusion_counts(scores, labels, t), RateKind::fnr()), true};
    }
    case K::FprAtFnr: {
      const double t = exact_threshold(scores, labels, RateKind::fnr(), p.beta, Sense::AtMost);
      return {rate(confusion_counts(scores, labels, t), RateKind::fpr()), true};
    }
    case K::PrecAtRecall: {
      const double t = exact_threshold(scores, labels, RateKind::recall(), p.beta, Sense::AtLeast);
      return {rate(confusion_counts(scores, labels, t), RateKind::precision()), false};
    }
    case K::PrecAtK: {
      const auto n = static_cast<std::int64_t>(scores.size());
      const double t = top_k_threshold(scores, std::min(n, p.k));
      return {rate(confusion_counts(scores, labels, t), RateKind::precision()), false};
    }
    case K::PaucRoc: return {partial_auc_roc(scores, labels, p.beta, p.grid_m).mcclish / 100.0, false};
    case K::PaucPr: return {partial_auc_pr(scores, labels, p.beta, p.grid_m), false};
    case K::Fairness80: {
      check_inputs(p, scores, labels, groups, lambdas);
      std::int64_t wrong = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (groups[i] < 0 || static_cast<std::size_t>(groups[i]) >= lambdas.size())
          throw std::invalid_argument("group id without a threshold");
        const double t = lambdas[static_cast<std::size_t>(groups[i])];
        wrong += (scores[i] > t) != (labels[i] == 1);
      }
      return {static_cast<double>(wrong) / static_cast<double>(scores.size()), true};
    }
  }
  throw std::logic_error("unknown problem kind");
}

}  // namespace irco
