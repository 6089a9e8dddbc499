#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace irco {

/// Rows of a dataset materialized for training or evaluation. `groups` is
/// empty when the data carries no group column.
struct Batch {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  std::vector<int> groups;

  std::size_t size() const { return labels.size(); }
  std::int64_t n_pos() const;
};

enum class Split : unsigned char { Train, Val, Test };

struct Dataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  std::vector<int> groups;
  std::vector<Split> split;  // all Train until split() is applied
  std::vector<std::string> feature_names;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
  std::vector<std::size_t> indices(Split s) const;
  Batch rows(std::span<const std::size_t> idx) const;
  Batch part(Split s) const;
  Batch all() const;
};

/// Class-conditional Gaussians.
struct SyntheticSpec {
  Eigen::VectorXd mu_pos, mu_neg;
  Eigen::MatrixXd sigma_pos, sigma_neg;
  double prior_pos = 0.5;
};

/// d = 2, mu_pos = (1,1), mu_neg = 0, Sigma_pos = diag(0.25, 4),
/// Sigma_neg = diag(4, 0.25), 5% positives. The log-loss direction and the
/// direction that minimizes FNR at low FPR disagree on this data.
SyntheticSpec heteroscedastic_spec();

/// Identity covariances for both classes.
SyntheticSpec spherical_spec(const Eigen::VectorXd& mu_pos, const Eigen::VectorXd& mu_neg,
                             double prior_pos);

/// Bernoulli(prior_pos) labels and Gaussian features. Example i draws from
/// its own counter stream, so the output depends only on (spec, n, seed).
Dataset gen_gaussian(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed);

struct AnalyticThreshold {
  double lambda = 0.0;
  Eigen::VectorXd grad;
};

/// Threshold at which a linear score w.x (no bias) has FNR beta on the
/// positive class: w.mu_pos + z_beta * sqrt(w' Sigma_pos w), with gradient.
AnalyticThreshold analytic_threshold(const SyntheticSpec& spec, const Eigen::VectorXd& w,
                                     double beta);

/// Header row of names; `label_column` holds 0/1; `group_column`, when given,
/// holds non-negative integer ids; every other column is a feature.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::optional<std::string>& group_column = std::nullopt);
/// "label idx:val ..." with 1-based indices; labels -1/+1 (or 0/1).
Dataset load_libsvm(const std::string& path);
void save_csv(const std::string& path, const Dataset& data, const std::string& label_column = "label");

/// Relative paths that do not exist locally are looked up under IRCO_DATA_DIR.
std::string resolve_data_path(const std::string& path);

/// Stratified-by-label shuffle into train/val/test with the given ratios.
Dataset split(const Dataset& data, std::array<double, 3> ratios, std::uint64_t seed);
/// Z-score every feature with train-split statistics (std floored at 1e-8).
Dataset standardize(const Dataset& data);

}  // namespace irco
