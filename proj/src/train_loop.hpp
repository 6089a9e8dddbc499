// Shared plumbing for the training loops in ico.cpp and baselines.cpp.
#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "irco/data.hpp"
#include "irco/error.hpp"
#include "irco/ico.hpp"
#include "irco/rng.hpp"

namespace irco::detail {

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Shuffled minibatches of the training indices for one epoch.
inline std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<std::size_t>& train,
                                                           int batch_size, std::uint64_t seed,
                                                           int epoch) {
  std::vector<std::size_t> order = train;
  CounterRng rng(seed, 0x62617463680000ULL + static_cast<std::uint64_t>(epoch));
  rng.shuffle(order.begin(), order.end());
  const std::size_t b = batch_size <= 0 ? order.size() : static_cast<std::size_t>(batch_size);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += b)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + b)));
  return out;
}

/// The last k minibatches, concatenated on demand.
class RecentBatches {
 public:
  explicit RecentBatches(std::size_t k) : k_(k) {}
  void push(const std::vector<std::size_t>& idx) {
    recent_.push_back(idx);
    while (recent_.size() > k_) recent_.pop_front();
  }
  std::vector<std::size_t> concatenated() const {
    std::vector<std::size_t> all;
    for (const auto& b : recent_) all.insert(all.end(), b.begin(), b.end());
    return all;
  }

 private:
  std::size_t k_;
  std::deque<std::vector<std::size_t>> recent_;
};

/// Holds the train and validation splits and tracks the best epoch.
class EpochMonitor {
 public:
  EpochMonitor(const ProblemSpec& problem, const Dataset& data) : problem_(problem) {
    train_idx_ = data.indices(Split::Train);
    if (train_idx_.empty()) throw std::invalid_argument("dataset has no train split");
    train_ = data.rows(train_idx_);
    const auto pos = train_.n_pos();
    if (pos == 0 || pos == static_cast<std::int64_t>(train_.size()))
      throw std::invalid_argument("train split needs both classes");
    if (problem.uses_groups && train_.groups.empty())
      throw std::invalid_argument("problem needs a group column");
    const auto val_idx = data.indices(Split::Val);
    val_ = val_idx.empty() ? train_ : data.rows(val_idx);
  }

  const std::vector<std::size_t>& train_indices() const { return train_idx_; }
  const Batch& train() const { return train_; }
  const Batch& val() const { return val_; }

  /// Records one History row; returns true when this epoch is the new best.
  bool record(int epoch, std::int64_t step, const ModelParams& params,
              const std::vector<double>& lambdas, std::vector<HistoryRow>& history) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    HistoryRow row{epoch, step, nan, nan, nan, lambdas};
    const Eigen::VectorXd train_scores = forward(params, train_.features);
    try {
      row.train_objective =
          unrelaxed_objective(problem_, as_span(train_scores), train_.labels, train_.groups, lambdas);
      row.train_constraint_residual =
          constraint_residual(problem_, as_span(train_scores), train_.labels, train_.groups, lambdas);
    } catch (const DegenerateError&) {
    }
    MetricValue val;
    try {
      const Eigen::VectorXd val_scores = forward(params, val_.features);
      val = problem_metric(problem_, as_span(val_scores), val_.labels, val_.groups, lambdas);
      row.val_metric = val.value;
    } catch (const DegenerateError&) {
    }
    history.push_back(row);
    if (std::isnan(row.val_metric) || !std::isfinite(train_scores.sum())) return false;
    if (!best_ || val.better_than(*best_)) {
      best_ = val;
      best_epoch_ = epoch;
      return true;
    }
    return false;
  }

  bool has_best() const { return best_.has_value(); }
  MetricValue best() const { return best_.value_or(MetricValue{}); }
  int best_epoch() const { return best_epoch_; }

 private:
  const ProblemSpec& problem_;
  std::vector<std::size_t> train_idx_;
  Batch train_;
  Batch val_;
  std::optional<MetricValue> best_;
  int best_epoch_ = -1;
};

}  // namespace irco::detail
