#include "irco/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "irco/error.hpp"

namespace irco {

namespace {

constexpr double kFeasibilityTol = 1e-12;

void check_batch(std::span<const double> scores, std::span<const int> labels) {
  if (scores.empty()) throw std::invalid_argument("empty batch");
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length");
}

double ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) throw DegenerateError("undefined rate");
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::string to_string(RateKind kind) {
  std::string name;
  switch (kind.kind) {
    case RateKind::Kind::FPR: name = "FPR"; break;
    case RateKind::Kind::FNR: name = "FNR"; break;
    case RateKind::Kind::TPR: name = "TPR"; break;
    case RateKind::Kind::Precision: name = "Precision"; break;
    case RateKind::Kind::Recall: name = "Recall"; break;
    case RateKind::Kind::Coverage: name = "Coverage"; break;
    case RateKind::Kind::GroupCoverage: name = "GroupCoverage"; break;
    case RateKind::Kind::Error: name = "Error"; break;
  }
  if (kind.group >= 0) name += "(" + std::to_string(kind.group) + ")";
  return name;
}

RateCounts confusion_counts(std::span<const double> scores, std::span<const int> labels,
                            double lambda) {
  check_batch(scores, labels);
  RateCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > lambda;
    if (labels[i] == 1) {
      ++(predicted ? c.tp : c.fn_);
    } else {
      ++(predicted ? c.fp : c.tn);
    }
  }
  return c;
}

double rate(const RateCounts& c, RateKind kind) {
  using K = RateKind::Kind;
  switch (kind.kind) {
    case K::FPR: return ratio(c.fp, c.n_neg());
    case K::FNR: return ratio(c.fn_, c.n_pos());
    case K::TPR:
    case K::Recall: return ratio(c.tp, c.n_pos());
    case K::Precision:
      return c.predicted_positive() == 0 ? 1.0 : ratio(c.tp, c.predicted_positive());
    case K::Coverage:
    case K::GroupCoverage: return ratio(c.predicted_positive(), c.total());
    case K::Error: return ratio(c.fp + c.fn_, c.total());
  }
  throw std::logic_error("unknown rate kind");
}

ThresholdSweep::ThresholdSweep(std::span<const double> scores, std::span<const int> labels) {
  check_batch(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double max_abs = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite score");
    max_abs = std::max(max_abs, std::abs(s));
  }
  for (int y : labels) (y == 1 ? n_pos_ : n_neg_)++;

  // Walk distinct score values from low to high; after consuming value u_j the
  // examples still unconsumed are exactly those strictly above the midpoint
  // between u_j and u_{j+1}.
  thresholds_.push_back(-(max_abs + 1.0));
  pos_above_.push_back(n_pos_);
  neg_above_.push_back(n_neg_);
  std::int64_t pos_left = n_pos_;
  std::int64_t neg_left = n_neg_;
  std::size_t i = 0;
  while (i < order.size()) {
    const double u = scores[order[i]];
    while (i < order.size() && scores[order[i]] == u) {
      (labels[order[i]] == 1 ? pos_left : neg_left)--;
      ++i;
    }
    if (i == order.size()) break;
    const double next = scores[order[i]];
    double mid = u + 0.5 * (next - u);
    if (!(mid < next)) mid = u;
    thresholds_.push_back(mid);
    pos_above_.push_back(pos_left);
    neg_above_.push_back(neg_left);
  }
  thresholds_.push_back(max_abs + 1.0);
  pos_above_.push_back(0);
  neg_above_.push_back(0);
}

RateCounts ThresholdSweep::counts(std::size_t j) const {
  RateCounts c;
  c.tp = pos_above_[j];
  c.fp = neg_above_[j];
  c.fn_ = n_pos_ - c.tp;
  c.tn = n_neg_ - c.fp;
  return c;
}

std::size_t ThresholdSweep::find(RateKind kind, double target, Sense sense) const {
  if (!kind.monotone()) throw std::invalid_argument("non-monotone rate");
  std::size_t best = size();
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < size(); ++j) {
    const double r = rate(counts(j), kind);
    const bool feasible = sense == Sense::AtMost ? r <= target + kFeasibilityTol
                                                 : r >= target - kFeasibilityTol;
    if (!feasible) continue;
    const double gap = std::abs(r - target);
    // Ascending scan: strict improvement keeps the smallest threshold, <= keeps the largest.
    const bool better = sense == Sense::AtMost ? gap < best_gap : gap <= best_gap;
    if (better) {
      best = j;
      best_gap = gap;
    }
  }
  if (best == size()) throw DegenerateError("infeasible rate target");
  return best;
}

double exact_threshold(std::span<const double> scores, std::span<const int> labels,
                       RateKind kind, double target, Sense sense, std::span<const int> groups) {
  if (!kind.monotone()) throw std::invalid_argument("non-monotone rate");
  if (!(target >= 0.0 && target <= 1.0)) throw std::invalid_argument("target outside [0, 1]");
  check_batch(scores, labels);
  if (kind.kind == RateKind::Kind::GroupCoverage && kind.group < 0)
    throw std::invalid_argument("GroupCoverage needs a group id");
  if (kind.group < 0) {
    const ThresholdSweep sweep(scores, labels);
    return sweep.threshold(sweep.find(kind, target, sense));
  }

  if (groups.size() != scores.size()) throw std::invalid_argument("group ids missing");
  std::vector<double> s;
  std::vector<int> y;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (groups[i] == kind.group) {
      s.push_back(scores[i]);
      y.push_back(labels[i]);
    }
  }
  if (s.empty()) throw DegenerateError("empty group");
  const ThresholdSweep sweep(s, y);
  return sweep.threshold(sweep.find(kind, target, sense));
}

double top_k_threshold(std::span<const double> scores, std::int64_t k) {
  if (scores.empty()) throw std::invalid_argument("empty batch");
  const auto n = static_cast<std::int64_t>(scores.size());
  if (k < 0 || k > n) throw std::invalid_argument("k outside [0, n]");
  const std::vector<int> labels(scores.size(), 1);
  const ThresholdSweep sweep(scores, labels);
  // Pick the largest threshold admitting at least k scores.
  for (std::size_t j = sweep.size(); j-- > 0;) {
    if (sweep.counts(j).predicted_positive() >= k) return sweep.threshold(j);
  }
  return sweep.threshold(0);
}

namespace {

std::vector<CurvePoint> curve(std::span<const double> scores, std::span<const int> labels,
                              RateKind x_kind, RateKind y_kind) {
  const ThresholdSweep sweep(scores, labels);
  if (sweep.n_pos() == 0 || sweep.n_neg() == 0)
    throw DegenerateError("curve needs both classes");
  std::vector<CurvePoint> points;
  points.reserve(sweep.size());
  for (std::size_t j = sweep.size(); j-- > 0;) {
    const RateCounts c = sweep.counts(j);
    points.push_back({sweep.threshold(j), rate(c, x_kind), rate(c, y_kind)});
  }
  return points;
}

}  // namespace

std::vector<CurvePoint> roc_points(std::span<const double> scores, std::span<const int> labels) {
  return curve(scores, labels, RateKind::fpr(), RateKind::tpr());
}

std::vector<CurvePoint> pr_points(std::span<const double> scores, std::span<const int> labels) {
  return curve(scores, labels, RateKind::recall(), RateKind::precision());
}

double trapezoid_area(std::span<const CurvePoint> points) {
  double area = 0.0;
  for (std::size_t j = 1; j < points.size(); ++j)
    area += 0.5 * (points[j].x - points[j - 1].x) * (points[j].y + points[j - 1].y);
  return area;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto points = roc_points(scores, labels);
  return trapezoid_area(points);
}

std::vector<double> fpr_grid(double beta, int grid_m) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta outside (0, 1]");
  if (grid_m < 1) throw std::invalid_argument("grid_m < 1");
  std::vector<double> grid(static_cast<std::size_t>(grid_m));
  for (int i = 0; i < grid_m; ++i) grid[i] = beta * (i + 1) / grid_m;
  return grid;
}

std::vector<double> recall_grid(double beta, int grid_m) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("beta outside [0, 1)");
  if (grid_m < 1) throw std::invalid_argument("grid_m < 1");
  if (grid_m == 1) return {1.0};
  std::vector<double> grid(static_cast<std::size_t>(grid_m));
  for (int i = 0; i < grid_m; ++i) grid[i] = beta + (1.0 - beta) * i / (grid_m - 1);
  grid.back() = 1.0;
  return grid;
}

PartialAuc partial_auc_roc(std::span<const double> scores, std::span<const int> labels,
                           double beta, int grid_m) {
  const auto grid = fpr_grid(beta, grid_m);
  const ThresholdSweep sweep(scores, labels);
  if (sweep.n_pos() == 0 || sweep.n_neg() == 0)
    throw DegenerateError("partial AUC needs both classes");
  double sum = 0.0;
  for (double target : grid)
    sum += rate(sweep.counts(sweep.find(RateKind::fpr(), target, Sense::AtMost)), RateKind::tpr());
  PartialAuc out;
  out.raw = sum / grid_m;
  const double chance = 0.5 * beta * beta;
  out.mcclish = 100.0 * 0.5 * (1.0 + (out.raw * beta - chance) / (beta - chance));
  return out;
}

double partial_auc_pr(std::span<const double> scores, std::span<const int> labels, double beta,
                      int grid_m) {
  const auto grid = recall_grid(beta, grid_m);
  const ThresholdSweep sweep(scores, labels);
  if (sweep.n_pos() == 0) throw DegenerateError("partial PR-AUC needs positives");
  double sum = 0.0;
  for (double target : grid)
    sum += rate(sweep.counts(sweep.find(RateKind::recall(), target, Sense::AtLeast)),
                RateKind::precision());
  return sum / grid_m;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points) {
  out << "threshold,x,y\n";
  char buf[96];
  for (const CurvePoint& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.x, p.y);
    out << buf;
  }
}

}  // namespace irco
