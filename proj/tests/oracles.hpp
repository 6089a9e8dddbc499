// Brute-force reference implementations and fixtures shared by the tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "irco/data.hpp"
#include "irco/metrics.hpp"
#include "irco/rng.hpp"

namespace oracle {

struct RandomBatch {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<int> groups;
};

/// Scores rounded to a coarse grid (so ties occur), labels Bernoulli(p).
inline RandomBatch random_batch(std::uint64_t seed, std::size_t n, double p_pos = 0.4,
                                int num_groups = 0, bool ties = true) {
  irco::CounterRng rng(seed, 17);
  RandomBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    double s = rng.normal() * 2.0;
    if (ties) s = std::round(s * 4.0) / 4.0;
    b.scores.push_back(s);
    b.labels.push_back(rng.uniform() < p_pos ? 1 : 0);
    if (num_groups > 0) b.groups.push_back(static_cast<int>(rng.below(num_groups)));
  }
  return b;
}

inline irco::RateCounts counts(std::span<const double> s, std::span<const int> y, double lambda,
                               std::span<const int> groups = {}, int group = -1) {
  irco::RateCounts c;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (group >= 0 && groups[i] != group) continue;
    const bool pred = s[i] > lambda;
    if (y[i] == 1) (pred ? c.tp : c.fn_)++;
    else (pred ? c.fp : c.tn)++;
  }
  return c;
}

/// Rate straight from the definitions; nullopt when the population is empty.
inline std::optional<double> rate(const irco::RateCounts& c, irco::RateKind k) {
  using K = irco::RateKind::Kind;
  auto ratio = [](double a, double b) -> std::optional<double> {
    if (b <= 0) return std::nullopt;
    return a / b;
  };
  switch (k.kind) {
    case K::FPR: return ratio(c.fp, c.fp + c.tn);
    case K::FNR: return ratio(c.fn_, c.tp + c.fn_);
    case K::TPR:
    case K::Recall: return ratio(c.tp, c.tp + c.fn_);
    case K::Precision:
      if (c.tp + c.fn_ + c.fp + c.tn == 0) return std::nullopt;
      return c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
    case K::Coverage:
    case K::GroupCoverage: return ratio(c.tp + c.fp, c.tp + c.fp + c.fn_ + c.tn);
    case K::Error: return ratio(c.fp + c.fn_, c.tp + c.fp + c.fn_ + c.tn);
  }
  return std::nullopt;
}

/// Candidate thresholds: sentinels +-(max|s|+1) and midpoints of adjacent
/// distinct scores of `s` (restricted to the group when given).
inline std::vector<double> candidates(std::span<const double> s) {
  std::set<double> distinct(s.begin(), s.end());
  double m = 0.0;
  for (double v : s) m = std::max(m, std::abs(v));
  std::vector<double> out{-(m + 1.0)};
  for (auto it = distinct.begin(); it != distinct.end(); ++it) {
    auto nx = std::next(it);
    if (nx == distinct.end()) break;
    out.push_back(0.5 * (*it + *nx));
  }
  out.push_back(m + 1.0);
  return out;
}

/// Exhaustive scan: feasible candidate closest to target; ties to the smallest
/// lambda for AtMost and the largest for AtLeast. nullopt when infeasible.
inline std::optional<double> exact_threshold(std::span<const double> s, std::span<const int> y,
                                             irco::RateKind k, double target, irco::Sense sense,
                                             std::span<const int> groups = {}) {
  std::vector<double> sub_s;
  std::vector<int> sub_y;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (k.group >= 0 && groups[i] != k.group) continue;
    sub_s.push_back(s[i]);
    sub_y.push_back(y[i]);
  }
  if (sub_s.empty()) return std::nullopt;
  std::optional<double> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double t : candidates(sub_s)) {
    const auto r = oracle::rate(oracle::counts(sub_s, sub_y, t), k);
    if (!r) return std::nullopt;
    const bool ok = sense == irco::Sense::AtMost ? *r <= target + 1e-12 : *r >= target - 1e-12;
    if (!ok) continue;
    const double gap = std::abs(*r - target);
    const bool take = sense == irco::Sense::AtMost ? gap < best_gap : gap <= best_gap;
    if (take) {
      best_gap = gap;
      best = t;
    }
  }
  return best;
}

/// Mann-Whitney AUC: P(s+ > s-) + 0.5 P(s+ = s-).
inline double pairwise_auc(std::span<const double> s, std::span<const int> y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] == 1) continue;
      pairs += 1.0;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / pairs;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Central-difference gradient of f at x.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel_h = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd p = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel_h * std::max(1.0, std::abs(x[j]));
    p[j] = x[j] + h;
    const double up = f(p);
    p[j] = x[j] - h;
    const double down = f(p);
    p[j] = x[j];
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline double rel_error(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline Eigen::MatrixXd random_matrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols) {
  irco::CounterRng rng(seed, 99);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

/// Features plus split tags all set to Train, for tests that feed trainers.
inline irco::Dataset make_dataset(const Eigen::MatrixXd& x, const std::vector<int>& y,
                                  const std::vector<int>& groups = {}) {
  irco::Dataset d;
  d.features = x;
  d.labels = y;
  d.groups = groups;
  d.split.assign(y.size(), irco::Split::Train);
  return d;
}

/// Batch wrapper for a features/labels pair.
inline irco::Batch make_batch(const Eigen::MatrixXd& x, const std::vector<int>& y,
                              const std::vector<int>& groups = {}) {
  irco::Batch b;
  b.features = x;
  b.labels = y;
  b.groups = groups;
  return b;
}

}  // namespace oracle
