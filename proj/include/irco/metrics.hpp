#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace irco {

/// Hard confusion counts of the classifier 1(score > lambda).
struct RateCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn_ = 0;
  std::int64_t tn = 0;

  std::int64_t n_pos() const { return tp + fn_; }
  std::int64_t n_neg() const { return fp + tn; }
  std::int64_t total() const { return n_pos() + n_neg(); }
  std::int64_t predicted_positive() const { return tp + fp; }

  bool operator==(const RateCounts&) const = default;
};

/// Rates that can be computed from RateCounts. `Error` is the 0-1
/// classification error (fp + fn) / n, used by the fairness objective.
struct RateKind {
  enum class Kind { FPR, FNR, TPR, Precision, Recall, Coverage, GroupCoverage, Error };

  Kind kind = Kind::FPR;
  /// Restricts the population to one group id. Required for GroupCoverage,
  /// optional (-1 = everyone) for the other kinds.
  int group = -1;

  static RateKind fpr() { return {Kind::FPR}; }
  static RateKind fnr() { return {Kind::FNR}; }
  static RateKind tpr() { return {Kind::TPR}; }
  static RateKind precision() { return {Kind::Precision}; }
  static RateKind recall() { return {Kind::Recall}; }
  static RateKind coverage() { return {Kind::Coverage}; }
  static RateKind group_coverage(int g) { return {Kind::GroupCoverage, g}; }
  static RateKind error(int g = -1) { return {Kind::Error, g}; }

  /// True when rate(counts at lambda) is monotone in lambda.
  bool monotone() const { return kind != Kind::Precision && kind != Kind::Error; }
  /// True for FNR, the only kind that grows with lambda.
  bool increasing() const { return kind == Kind::FNR; }

  bool operator==(const RateKind&) const = default;
};

std::string to_string(RateKind kind);

enum class Sense { AtMost, AtLeast };

struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;
  double y = 0.0;
};

RateCounts confusion_counts(std::span<const double> scores, std::span<const int> labels,
                            double lambda);

/// Exact ratio for `kind`. Precision with no predicted positives is 1.
/// Throws DegenerateError when the denominator population is empty.
double rate(const RateCounts& counts, RateKind kind);

/// Sorted sweep over every candidate threshold of a batch: the floor sentinel,
/// midpoints of adjacent distinct scores, and the ceiling sentinel, in
/// ascending order. Sentinels sit at -(max|s|+1) and +(max|s|+1).
class ThresholdSweep {
 public:
  ThresholdSweep(std::span<const double> scores, std::span<const int> labels);

  std::size_t size() const { return thresholds_.size(); }
  double threshold(std::size_t j) const { return thresholds_[j]; }
  RateCounts counts(std::size_t j) const;
  std::int64_t n_pos() const { return n_pos_; }
  std::int64_t n_neg() const { return n_neg_; }

  /// Index of the candidate whose rate satisfies `sense` against `target`
  /// and is closest to it. Ties go to the smallest threshold for AtMost and
  /// the largest for AtLeast.
  std::size_t find(RateKind kind, double target, Sense sense) const;

 private:
  std::vector<double> thresholds_;
  // Positives / negatives strictly above each candidate.
  std::vector<std::int64_t> pos_above_;
  std::vector<std::int64_t> neg_above_;
  std::int64_t n_pos_ = 0;
  std::int64_t n_neg_ = 0;
};

/// Unrelaxed threshold search h(theta). For GroupCoverage (or any kind with a
/// group) only rows of that group are considered, so `groups` is required.
double exact_threshold(std::span<const double> scores, std::span<const int> labels,
                       RateKind kind, double target, Sense sense,
                       std::span<const int> groups = {});

/// Threshold with exactly k scores strictly above it when scores are distinct
/// (at least k when ties straddle the cut).
double top_k_threshold(std::span<const double> scores, std::int64_t k);

/// ROC curve from the ceiling sentinel down to the floor sentinel; x = FPR,
/// y = TPR.
std::vector<CurvePoint> roc_points(std::span<const double> scores, std::span<const int> labels);
/// PR curve with x = recall and y = precision, in the same threshold order.
std::vector<CurvePoint> pr_points(std::span<const double> scores, std::span<const int> labels);

double trapezoid_area(std::span<const CurvePoint> points);
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct PartialAuc {
  double raw = 0.0;      // mean TPR over the FPR grid
  double mcclish = 0.0;  // standardized area, 50 = chance, 100 = perfect
};

/// Riemann approximation of the ROC area on FPR in [0, beta]: mean TPR at the
/// exact thresholds for FPR targets beta*i/grid_m, i = 1..grid_m.
PartialAuc partial_auc_roc(std::span<const double> scores, std::span<const int> labels,
                           double beta, int grid_m);

/// Mean precision at exact thresholds for recall targets equally spaced in
/// [beta, 1] (both endpoints included; grid_m = 1 uses recall 1).
double partial_auc_pr(std::span<const double> scores, std::span<const int> labels,
                      double beta, int grid_m);

/// FPR grid beta*i/m for i = 1..m.
std::vector<double> fpr_grid(double beta, int grid_m);
/// Recall grid linspace(beta, 1, m).
std::vector<double> recall_grid(double beta, int grid_m);

/// CSV with header "threshold,x,y" and %.17g floats.
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points);

}  // namespace irco
