#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "irco/metrics.hpp"
#include "irco/surrogates.hpp"

namespace irco {

enum class Relation { Equals, AtMost, AtLeast };

/// One weighted smoothed rate in the objective, evaluated at one threshold.
struct ObjectiveTerm {
  RateKind rate;
  int threshold = 0;
  double weight = 1.0;
  /// Multiply by the fraction of the batch inside rate.group, so per-group
  /// error terms sum to the overall error.
  bool share_weighted = false;
};

/// g_i = rate(lambda_i) - target, or predicted_positive(lambda_i) - target
/// when `count_form` is set.
struct ConstraintSpec {
  RateKind rate;
  double target = 0.0;
  Relation relation = Relation::Equals;
  int threshold = 0;
  /// Direction of the unrelaxed threshold search used by the correction.
  Sense correction = Sense::AtMost;
  bool count_form = false;

  bool inequality() const { return relation != Relation::Equals; }
};

struct ProblemSpec {
  enum class Kind { FnrAtFpr, FprAtFnr, PrecAtRecall, PrecAtK, PaucRoc, PaucPr, Fairness80 };

  Kind kind = Kind::FnrAtFpr;
  std::vector<ObjectiveTerm> objective;
  std::vector<ConstraintSpec> constraints;  // constraint i governs threshold i
  bool uses_groups = false;

  // Parameters kept for evaluation.
  double beta = 0.0;
  int grid_m = 1;
  std::int64_t k = 0;
  double floor = 0.0;

  std::size_t num_thresholds() const { return constraints.size(); }
};

std::string to_string(ProblemSpec::Kind kind);

/// Minimize FNR subject to FPR = beta.
ProblemSpec build_fnr_at_fpr(double beta);
/// Minimize FPR subject to FNR = beta.
ProblemSpec build_fpr_at_fnr(double beta);
/// Maximize precision subject to recall = beta.
ProblemSpec build_prec_at_recall(double beta);
/// Maximize precision subject to exactly k predicted positives.
ProblemSpec build_prec_at_k(std::int64_t k);
/// Maximize mean TPR at FPR targets beta*i/grid_m.
ProblemSpec build_pauc_roc(double beta, int grid_m);
/// Maximize mean precision at recall targets linspace(beta, 1, grid_m).
ProblemSpec build_pauc_pr(double beta, int grid_m);
/// Minimize classification error with one threshold per group subject to
/// every group's coverage >= floor.
ProblemSpec build_fairness_80pct(int num_groups, double floor = 0.8);

/// Smoothed objective and constraints at the given thresholds.
struct SmoothProblem {
  double objective = 0.0;
  std::vector<double> objective_d_lambda;  // per threshold
  std::vector<double> objective_d_score;   // per example
  std::vector<SmoothEval> constraints;     // g~_i and partials w.r.t. lambda_i
};

SmoothProblem evaluate_smooth(const ProblemSpec& problem, std::span<const double> scores,
                              std::span<const int> labels, std::span<const int> groups,
                              std::span<const double> lambdas, const SurrogateConfig& cfg);

/// g with sign flipped for at-least constraints, so feasibility is <= 0.
double normalized(const ConstraintSpec& c, double g);

double unrelaxed_objective(const ProblemSpec& problem, std::span<const double> scores,
                           std::span<const int> labels, std::span<const int> groups,
                           std::span<const double> lambdas);
/// Raw (un-normalized) g_i for every constraint.
std::vector<double> unrelaxed_constraints(const ProblemSpec& problem,
                                          std::span<const double> scores,
                                          std::span<const int> labels,
                                          std::span<const int> groups,
                                          std::span<const double> lambdas);
/// Worst violation: |g| for equalities, positive part of the normalized g for
/// inequalities.
double constraint_residual(const ProblemSpec& problem, std::span<const double> scores,
                           std::span<const int> labels, std::span<const int> groups,
                           std::span<const double> lambdas);
/// Population a constraint's rate is normalized by (1 for count-form).
std::int64_t constraint_population(const ConstraintSpec& c, std::span<const int> labels,
                                   std::span<const int> groups);

/// Exact correction on unrelaxed rates. With `only_if_violated`, inequality
/// constraints that already hold keep their threshold. A constraint whose
/// population is missing from the batch keeps its previous threshold.
std::vector<double> correct_thresholds(const ProblemSpec& problem, std::span<const double> scores,
                                       std::span<const int> labels, std::span<const int> groups,
                                       std::span<const double> previous, bool only_if_violated);

/// The evaluation metric of a problem on a scored split. Threshold-based
/// metrics refit their thresholds on this data; the fairness metric uses the
/// supplied per-group thresholds.
struct MetricValue {
  double value = 0.0;
  bool lower_is_better = false;
  bool better_than(const MetricValue& other) const {
    return lower_is_better ? value < other.value : value > other.value;
  }
};

bool metric_lower_is_better(const ProblemSpec& problem);

MetricValue problem_metric(const ProblemSpec& problem, std::span<const double> scores,
                           std::span<const int> labels, std::span<const int> groups,
                           std::span<const double> lambdas);

}  // namespace irco
