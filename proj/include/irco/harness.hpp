#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "irco/data.hpp"
#include "irco/ico.hpp"
#include "irco/model.hpp"
#include "irco/problems.hpp"

namespace irco {

enum class Method { ICO, CE, Lagrangian, Pairwise };

std::string to_string(Method m);

struct ProblemConfig {
  std::string name = "fnr_at_fpr";  // fnr_at_fpr | fpr_at_fnr | prec_at_recall | prec_at_k | pauc_roc | pauc_pr | fairness
  double beta = 0.05;
  int grid_m = 10;
  std::int64_t k = 100;
  int num_groups = 2;
  double floor = 0.8;
};

ProblemSpec build_problem(const ProblemConfig& cfg);

struct DataConfig {
  std::string source = "synthetic";  // synthetic | csv | libsvm
  std::string synthetic = "heteroscedastic";  // heteroscedastic | custom
  std::optional<SyntheticSpec> custom;
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  std::string path;
  std::string label_column = "label";
  std::optional<std::string> group_column;
  std::array<double, 3> ratios{0.5, 0.25, 0.25};
  bool standardize = true;
};

struct ExperimentConfig {
  Method method = Method::ICO;
  ProblemConfig problem;
  DataConfig data;
  std::vector<int> hidden;
  bool bias = true;
  TrainerConfig trainer;
  double dual_step = 0.01;
  std::optional<double> pairwise_beta;  // defaults to problem.beta
  int trials = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  bool record_time = false;
  /// Tunable name -> candidate values; the cartesian product is searched.
  std::map<std::string, std::vector<double>> grid;
  std::string model_out = "model.json";
  std::string history_out = "history.csv";
};

/// Parses and validates a JSON config. Unknown keys, and grid keys that are
/// not tunables of the method, are errors.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

std::vector<std::string> tunables(Method m);

/// Dataset for one trial, split and (optionally) standardized. Synthetic data
/// is redrawn per trial.
Dataset build_dataset(const DataConfig& cfg, std::uint64_t trial_seed);

/// Grid points in a fixed order (keys sorted, last key varying fastest).
std::vector<std::map<std::string, double>> grid_points(
    const std::map<std::string, std::vector<double>>& grid);

struct RunOutcome {
  ModelParams params;
  std::vector<double> thresholds;
  std::vector<HistoryRow> history;
  double val_metric = 0.0;
  double test_metric = 0.0;
  double train_residual = 0.0;
  double test_residual = 0.0;
  int best_epoch = -1;
};

/// One training run of the configured method with the given grid values.
RunOutcome run_once(const ExperimentConfig& cfg, const Dataset& data,
                    const std::map<std::string, double>& hyper, std::uint64_t seed);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> selected;
  double val_metric = 0.0;
  double test_metric = 0.0;
  double train_residual = 0.0;
  double test_residual = 0.0;
  int best_epoch = -1;
};

struct Report {
  std::string method;
  std::string problem;
  bool lower_is_better = false;
  std::vector<TrialResult> trials;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (0 for one trial)
  std::optional<double> wall_clock_seconds;
};

/// Every trial (seed + trial index) trains each grid point, keeps the best by
/// validation metric, and reports its test metric. Work may run on
/// cfg.threads threads; results are merged by index, so the report does not
/// depend on scheduling.
Report run_experiment(const ExperimentConfig& cfg);

std::string report_to_json(const Report& report);

/// Mean and sample standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& values);

/// Metric by CLI name on scored data: fnr_at_fpr, fpr_at_fnr, prec_at_recall, prec_at_k,
/// pauc_roc (McClish, 0..100), pauc_pr, auc, fairness (needs thresholds).
double evaluate_named_metric(const std::string& name, const Eigen::VectorXd& scores,
                             const Batch& data, double beta, std::int64_t k, int grid_m,
                             const std::vector<double>& thresholds);

/// Writes roc.csv and pr.csv for the model's scores on `data` into `out_dir`.
void emit_curves(const std::string& model_path, const Batch& data, const std::string& out_dir);

struct GradcheckResult {
  double model_error = 0.0;
  double implicit_error = 0.0;
  double max_error() const { return std::max(model_error, implicit_error); }
};

/// Model VJP and implicit-gradient finite-difference checks at the initial
/// parameters on (a prefix of at most 200 rows of) trial 0's training split.
GradcheckResult gradcheck(const ExperimentConfig& cfg);

}  // namespace irco
