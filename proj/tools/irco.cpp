// irco: train, evaluate and sweep rate-constrained classifiers.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "irco/data.hpp"
#include "irco/error.hpp"
#include "irco/harness.hpp"
#include "irco/ico.hpp"
#include "irco/model.hpp"

namespace {

using nlohmann::json;

bool better(double a, double b, bool lower) {
  if (std::isnan(a)) return false;
  if (std::isnan(b)) return true;
  return lower ? a < b : a > b;
}

int cmd_train(const std::string& config_path) {
  const irco::ExperimentConfig cfg = irco::load_config(config_path);
  const irco::Dataset data = irco::build_dataset(cfg.data, cfg.seed);
  const bool lower = irco::metric_lower_is_better(irco::build_problem(cfg.problem));
  std::optional<irco::RunOutcome> best;
  std::map<std::string, double> chosen;
  for (const auto& point : irco::grid_points(cfg.grid)) {
    irco::RunOutcome o = irco::run_once(cfg, data, point, cfg.seed);
    if (!best || better(o.val_metric, best->val_metric, lower)) {
      best = std::move(o);
      chosen = point;
    }
  }
  irco::save_checkpoint(cfg.model_out, {best->params, best->thresholds});
  std::ofstream hist(cfg.history_out);
  if (!hist) throw irco::Error("cannot write " + cfg.history_out);
  irco::write_history_csv(hist, best->history);
  json summary{{"model", cfg.model_out},
               {"history", cfg.history_out},
               {"selected", chosen},
               {"best_epoch", best->best_epoch},
               {"val_metric", best->val_metric},
               {"test_metric", best->test_metric},
               {"train_constraint_residual", best->train_residual},
               {"thresholds", best->thresholds}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

irco::Batch load_eval_data(const std::string& path, const std::string& label,
                           const std::optional<std::string>& group) {
  return irco::load_csv(irco::resolve_data_path(path), label, group).all();
}

int cmd_eval(const std::string& model, const std::string& data_path, const std::string& label,
             const std::optional<std::string>& group, const std::string& metric, double beta,
             std::int64_t k, int grid_m) {
  const irco::Checkpoint ck = irco::load_checkpoint(model);
  const irco::Batch data = load_eval_data(data_path, label, group);
  const Eigen::VectorXd scores = irco::forward(ck.params, data.features);
  const double v =
      irco::evaluate_named_metric(metric, scores, data, beta, k, grid_m, ck.thresholds);
  std::printf("%s %.17g\n", metric.c_str(), v);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out, int threads) {
  irco::ExperimentConfig cfg = irco::load_config(config_path);
  if (threads > 0) cfg.threads = threads;
  const irco::Report report = irco::run_experiment(cfg);
  const std::string text = irco::report_to_json(report);
  std::ofstream f(out);
  if (!f) throw irco::Error("cannot write " + out);
  f << text << '\n';
  std::printf("%s %s: mean %.2f std %.2f over %zu trials\n", report.method.c_str(),
              report.problem.c_str(), report.mean * 100.0, report.std * 100.0,
              report.trials.size());
  return 0;
}

int cmd_gradcheck(const std::string& config_path) {
  const irco::GradcheckResult r = irco::gradcheck(irco::load_config(config_path));
  std::printf("model_vjp %.3e\nimplicit_gradient %.3e\n", r.model_error, r.implicit_error);
  return r.max_error() > 1e-3 ? 1 : 0;
}

int cmd_synth(const std::string& out, std::size_t n, std::uint64_t seed) {
  irco::save_csv(out, irco::gen_gaussian(irco::heteroscedastic_spec(), n, seed));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate-constrained classifier training with implicit thresholds"};
  app.require_subcommand(1);
  std::string level = "warn";
  app.add_option("--log-level", level, "trace|debug|info|warn|error|off");

  std::string config, model, data, out, metric = "pauc_roc", label = "label";
  std::optional<std::string> group;
  double beta = 0.1;
  std::int64_t k = 100;
  int grid_m = 10, threads = 0;
  std::size_t n = 10000;
  std::uint64_t seed = 0;

  auto* train = app.add_subcommand("train", "train one model from a config");
  train->add_option("-c,--config", config)->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "evaluate a saved model on a CSV file");
  eval->add_option("-m,--model", model)->required();
  eval->add_option("-d,--data", data)->required();
  eval->add_option("--metric", metric)
      ->check(CLI::IsMember({"fnr_at_fpr", "fpr_at_fnr", "prec_at_recall", "prec_at_k",
                             "pauc_roc", "pauc_pr", "auc", "fairness"}));
  eval->add_option("--beta", beta);
  eval->add_option("--k", k);
  eval->add_option("--grid-m", grid_m);
  eval->add_option("--label", label, "label column");
  eval->add_option("--group", group, "group column");

  auto* sweep = app.add_subcommand("sweep", "multi-trial experiment with grid search");
  sweep->add_option("-c,--config", config)->required()->check(CLI::ExistingFile);
  sweep->add_option("-o,--out", out)->required();
  sweep->add_option("-j,--threads", threads, "override the config's thread count");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference checks at initialization");
  gc->add_option("-c,--config", config)->required()->check(CLI::ExistingFile);

  auto* curves = app.add_subcommand("curves", "write roc.csv and pr.csv for a saved model");
  curves->add_option("-m,--model", model)->required();
  curves->add_option("-d,--data", data)->required();
  curves->add_option("-o,--out", out)->required();
  curves->add_option("--label", label, "label column");

  auto* synth = app.add_subcommand("synth", "write the heteroscedastic synthetic set as CSV");
  synth->add_option("-o,--out", out)->required();
  synth->add_option("-n", n);
  synth->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(level));

  try {
    if (*train) return cmd_train(config);
    if (*eval) return cmd_eval(model, data, label, group, metric, beta, k, grid_m);
    if (*sweep) return cmd_sweep(config, out, threads);
    if (*gc) return cmd_gradcheck(config);
    if (*curves) {
      irco::emit_curves(model, load_eval_data(data, label, std::nullopt), out);
      return 0;
    }
    if (*synth) return cmd_synth(out, n, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "irco: %s\n", e.what());
    return 2;
  }
  return 0;
}
