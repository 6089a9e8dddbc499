#include "irco/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "irco/baselines.hpp"
#include "irco/error.hpp"
#include "irco/rng.hpp"

namespace irco {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Eigen::VectorXd to_vector(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd to_matrix(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw std::invalid_argument("empty matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw std::invalid_argument("ragged matrix");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

Method parse_method(const std::string& s) {
  if (s == "ico") return Method::ICO;
  if (s == "ce") return Method::CE;
  if (s == "lagrangian") return Method::Lagrangian;
  if (s == "pairwise") return Method::Pairwise;
  throw std::invalid_argument("unknown method '" + s + "'");
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::SGD;
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "adagrad") return OptimizerKind::Adagrad;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

void parse_problem(const json& j, ProblemConfig& p) {
  check_keys(j, {"name", "beta", "grid_m", "k", "num_groups", "floor"}, "problem");
  read(j, "name", p.name);
  read(j, "beta", p.beta);
  read(j, "grid_m", p.grid_m);
  read(j, "k", p.k);
  read(j, "num_groups", p.num_groups);
  read(j, "floor", p.floor);
}

void parse_data(const json& j, DataConfig& d) {
  check_keys(j, {"source", "synthetic", "n", "seed", "path", "label_column", "group_column",
                 "ratios", "standardize"},
             "data");
  read(j, "source", d.source);
  if (d.source != "synthetic" && d.source != "csv" && d.source != "libsvm")
    throw std::invalid_argument("unknown data source '" + d.source + "'");
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    if (s.is_string()) {
      d.synthetic = s.get<std::string>();
      if (d.synthetic != "heteroscedastic")
        throw std::invalid_argument("unknown synthetic preset '" + d.synthetic + "'");
    } else {
      check_keys(s, {"mu_pos", "mu_neg", "sigma_pos", "sigma_neg", "prior_pos"}, "data.synthetic");
      SyntheticSpec spec;
      spec.mu_pos = to_vector(s.at("mu_pos"));
      spec.mu_neg = to_vector(s.at("mu_neg"));
      spec.sigma_pos = to_matrix(s.at("sigma_pos"));
      spec.sigma_neg = to_matrix(s.at("sigma_neg"));
      read(s, "prior_pos", spec.prior_pos);
      d.synthetic = "custom";
      d.custom = std::move(spec);
    }
  }
  read(j, "n", d.n);
  read(j, "seed", d.seed);
  read(j, "path", d.path);
  read(j, "label_column", d.label_column);
  if (j.contains("group_column")) d.group_column = j.at("group_column").get<std::string>();
  if (j.contains("ratios")) {
    const auto r = j.at("ratios").get<std::vector<double>>();
    if (r.size() != 3) throw std::invalid_argument("data.ratios needs three values");
    d.ratios = {r[0], r[1], r[2]};
  }
  read(j, "standardize", d.standardize);
  if (d.source != "synthetic" && d.path.empty())
    throw std::invalid_argument("data.path is required for file sources");
}

void parse_trainer(const json& j, TrainerConfig& t) {
  check_keys(j, {"optimizer", "learning_rate", "correction_period", "accumulation_k", "surrogate",
                 "temperature", "reg_strength", "batch_size", "epochs", "inequality_mode", "warm_start_epochs"},
             "trainer");
  if (j.contains("optimizer")) t.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  read(j, "learning_rate", t.learning_rate);
  read(j, "correction_period", t.correction_period);
  read(j, "accumulation_k", t.accumulation_k);
  if (j.contains("surrogate")) {
    const auto s = j.at("surrogate").get<std::string>();
    if (s == "sigmoid") t.surrogate.kind = SurrogateConfig::Kind::Sigmoid;
    else if (s == "softplus") t.surrogate.kind = SurrogateConfig::Kind::Softplus;
    else throw std::invalid_argument("unknown surrogate '" + s + "'");
  }
  read(j, "temperature", t.surrogate.temperature);
  read(j, "reg_strength", t.reg_strength);
  read(j, "batch_size", t.batch_size);
  read(j, "epochs", t.epochs);
  read(j, "warm_start_epochs", t.warm_start_epochs);
  if (j.contains("inequality_mode")) {
    const auto s = j.at("inequality_mode").get<std::string>();
    if (s == "search") t.inequality_mode = InequalityMode::Search;
    else if (s == "slack") t.inequality_mode = InequalityMode::Slack;
    else throw std::invalid_argument("unknown inequality_mode '" + s + "'");
  }
}

void apply_hyper(const std::map<std::string, double>& hyper, TrainerConfig& t, double& dual_step) {
  for (const auto& [key, value] : hyper) {
    if (key == "temperature") t.surrogate.temperature = value;
    else if (key == "reg_strength") t.reg_strength = value;
    else if (key == "learning_rate") t.learning_rate = value;
    else if (key == "dual_step") dual_step = value;
    else throw std::invalid_argument("unknown tunable '" + key + "'");
  }
}

double safe_metric(const ProblemSpec& p, const Eigen::VectorXd& s, const Batch& b,
                   const std::vector<double>& lambdas) {
  if (b.size() == 0) return kNaN;
  try {
    return problem_metric(p, {s.data(), static_cast<std::size_t>(s.size())}, b.labels, b.groups,
                          lambdas)
        .value;
  } catch (const DegenerateError&) {
    return kNaN;
  }
}

double safe_residual(const ProblemSpec& p, const Eigen::VectorXd& s, const Batch& b,
                     const std::vector<double>& lambdas) {
  if (b.size() == 0) return kNaN;
  try {
    return constraint_residual(p, {s.data(), static_cast<std::size_t>(s.size())}, b.labels,
                               b.groups, lambdas);
  } catch (const DegenerateError&) {
    return kNaN;
  }
}

bool better(double a, double b, bool lower) {
  if (std::isnan(a)) return false;
  if (std::isnan(b)) return true;
  return lower ? a < b : a > b;
}

double percent(double v) { return std::round(v * 100.0 * 100.0) / 100.0; }

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::ICO: return "ico";
    case Method::CE: return "ce";
    case Method::Lagrangian: return "lagrangian";
    case Method::Pairwise: return "pairwise";
  }
  return "?";
}

std::vector<std::string> tunables(Method m) {
  switch (m) {
    case Method::ICO: return {"learning_rate", "reg_strength", "temperature"};
    case Method::CE: return {"learning_rate"};
    case Method::Lagrangian: return {"dual_step", "learning_rate", "temperature"};
    case Method::Pairwise: return {"learning_rate", "temperature"};
  }
  return {};
}

ProblemSpec build_problem(const ProblemConfig& c) {
  if (c.name == "fnr_at_fpr") return build_fnr_at_fpr(c.beta);
  if (c.name == "fpr_at_fnr") return build_fpr_at_fnr(c.beta);
  if (c.name == "prec_at_recall") return build_prec_at_recall(c.beta);
  if (c.name == "prec_at_k") return build_prec_at_k(c.k);
  if (c.name == "pauc_roc") return build_pauc_roc(c.beta, c.grid_m);
  if (c.name == "pauc_pr") return build_pauc_pr(c.beta, c.grid_m);
  if (c.name == "fairness") return build_fairness_80pct(c.num_groups, c.floor);
  throw std::invalid_argument("unknown problem '" + c.name + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  const json j = json::parse(text);
  check_keys(j, {"method", "problem", "data", "arch", "trainer", "dual_step", "pairwise_beta",
                 "trials", "seed", "threads", "record_time", "grid", "output"},
             "config");
  ExperimentConfig cfg;
  if (j.contains("method")) cfg.method = parse_method(j.at("method").get<std::string>());
  if (j.contains("problem")) parse_problem(j.at("problem"), cfg.problem);
  if (j.contains("data")) parse_data(j.at("data"), cfg.data);
  if (j.contains("arch")) {
    const json& a = j.at("arch");
    check_keys(a, {"hidden", "activation", "bias"}, "arch");
    read(a, "hidden", cfg.hidden);
    read(a, "bias", cfg.bias);
    if (a.contains("activation") && a.at("activation").get<std::string>() != "relu")
      throw std::invalid_argument("only relu activations are supported");
  }
  if (j.contains("trainer")) parse_trainer(j.at("trainer"), cfg.trainer);
  read(j, "dual_step", cfg.dual_step);
  if (j.contains("pairwise_beta")) cfg.pairwise_beta = j.at("pairwise_beta").get<double>();
  read(j, "trials", cfg.trials);
  read(j, "seed", cfg.seed);
  read(j, "threads", cfg.threads);
  read(j, "record_time", cfg.record_time);
  if (j.contains("grid")) {
    const auto allowed = tunables(cfg.method);
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, values] : j.at("grid").items()) {
      if (!ok.contains(key))
        throw std::invalid_argument("grid key '" + key + "' is not a tunable of method " +
                                    to_string(cfg.method));
      auto v = values.get<std::vector<double>>();
      if (v.empty()) throw std::invalid_argument("grid key '" + key + "' has no values");
      cfg.grid[key] = std::move(v);
    }
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, {"model", "history"}, "output");
    read(o, "model", cfg.model_out);
    read(o, "history", cfg.history_out);
  }
  if (cfg.trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (cfg.threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (!(cfg.dual_step > 0.0)) throw std::invalid_argument("dual_step must be positive");
  validate(cfg.trainer);
  build_problem(cfg.problem);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const std::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

Dataset build_dataset(const DataConfig& cfg, std::uint64_t trial_seed) {
  Dataset raw;
  if (cfg.source == "synthetic") {
    const SyntheticSpec spec = cfg.custom ? *cfg.custom : heteroscedastic_spec();
    raw = gen_gaussian(spec, cfg.n, mix64(cfg.seed) ^ mix64(trial_seed + 0x9e37));
  } else if (cfg.source == "csv") {
    raw = load_csv(resolve_data_path(cfg.path), cfg.label_column, cfg.group_column);
  } else {
    raw = load_libsvm(resolve_data_path(cfg.path));
  }
  Dataset out = split(raw, cfg.ratios, trial_seed);
  return cfg.standardize ? standardize(out) : out;
}

std::vector<std::map<std::string, double>> grid_points(
    const std::map<std::string, std::vector<double>>& grid) {
  std::vector<std::map<std::string, double>> out{{}};
  for (const auto& [key, values] : grid) {
    std::vector<std::map<std::string, double>> next;
    for (const auto& partial : out)
      for (double v : values) {
        auto p = partial;
        p[key] = v;
        next.push_back(std::move(p));
      }
    out = std::move(next);
  }
  return out;
}

RunOutcome run_once(const ExperimentConfig& cfg, const Dataset& data,
                    const std::map<std::string, double>& hyper, std::uint64_t seed) {
  const ProblemSpec problem = build_problem(cfg.problem);
  ArchSpec arch;
  arch.input_dim = data.dim();
  arch.hidden = cfg.hidden;
  arch.bias = cfg.bias;
  TrainerConfig t = cfg.trainer;
  t.seed = seed;
  double dual_step = cfg.dual_step;
  apply_hyper(hyper, t, dual_step);

  TrainResult r;
  switch (cfg.method) {
    case Method::ICO: r = train(problem, data, arch, t); break;
    case Method::CE: r = train_cross_entropy(problem, data, arch, t); break;
    case Method::Lagrangian: r = train_lagrangian(problem, data, arch, t, dual_step).train; break;
    case Method::Pairwise:
      r = train_pairwise(problem, data, arch, t, cfg.pairwise_beta.value_or(cfg.problem.beta));
      break;
  }

  RunOutcome out;
  out.thresholds = r.thresholds.lambdas;
  out.history = std::move(r.history);
  out.best_epoch = r.best_epoch;
  const Batch train_b = data.part(Split::Train);
  Batch val_b = data.part(Split::Val);
  if (val_b.size() == 0) val_b = train_b;
  const Batch test_b = data.part(Split::Test);
  out.val_metric = safe_metric(problem, forward(r.params, val_b.features), val_b, out.thresholds);
  const Eigen::VectorXd test_s = forward(r.params, test_b.features);
  out.test_metric = safe_metric(problem, test_s, test_b, out.thresholds);
  out.test_residual = safe_residual(problem, test_s, test_b, out.thresholds);
  out.train_residual =
      safe_residual(problem, forward(r.params, train_b.features), train_b, out.thresholds);
  out.params = std::move(r.params);
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {kNaN, kNaN};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

Report run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const ProblemSpec problem = build_problem(cfg.problem);
  const auto points = grid_points(cfg.grid);
  const auto trials = static_cast<std::size_t>(cfg.trials);

  std::vector<Dataset> datasets;
  datasets.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    try {
      datasets.push_back(build_dataset(cfg.data, cfg.seed + t));
    } catch (const std::exception& e) {
      throw Error("trial " + std::to_string(t) + ": " + e.what());
    }
  }

  const std::size_t tasks = trials * points.size();
  std::vector<std::optional<RunOutcome>> outcomes(tasks);
  std::vector<std::exception_ptr> errors(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks; i = next++) {
      const std::size_t t = i / points.size();
      try {
        outcomes[i] = run_once(cfg, datasets[t], points[i % points.size()], cfg.seed + t);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), tasks);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < tasks; ++i) {
    if (!errors[i]) continue;
    const std::string where = "trial " + std::to_string(i / points.size()) + ", grid point " +
                              std::to_string(i % points.size());
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw Error(where + ": " + e.what());
    }
  }

  Report report;
  report.method = to_string(cfg.method);
  report.problem = cfg.problem.name;
  report.lower_is_better = metric_lower_is_better(problem);
  std::vector<double> values;
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t best = 0;
    for (std::size_t g = 1; g < points.size(); ++g)
      if (better(outcomes[t * points.size() + g]->val_metric,
                 outcomes[t * points.size() + best]->val_metric, report.lower_is_better))
        best = g;
    const RunOutcome& o = *outcomes[t * points.size() + best];
    TrialResult tr;
    tr.trial = static_cast<int>(t);
    tr.seed = cfg.seed + t;
    tr.selected = points[best];
    tr.val_metric = o.val_metric;
    tr.test_metric = o.test_metric;
    tr.train_residual = o.train_residual;
    tr.test_residual = o.test_residual;
    tr.best_epoch = o.best_epoch;
    values.push_back(o.test_metric);
    report.trials.push_back(std::move(tr));
  }
  std::tie(report.mean, report.std) = mean_std(values);
  if (cfg.record_time)
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string report_to_json(const Report& r) {
  json j;
  j["method"] = r.method;
  j["problem"] = r.problem;
  j["lower_is_better"] = r.lower_is_better;
  j["trials"] = json::array();
  for (const TrialResult& t : r.trials) {
    json jt;
    jt["trial"] = t.trial;
    jt["seed"] = t.seed;
    jt["selected"] = t.selected;
    jt["val_metric"] = t.val_metric;
    jt["test_metric"] = t.test_metric;
    jt["test_metric_percent"] = percent(t.test_metric);
    jt["train_constraint_residual"] = t.train_residual;
    jt["test_constraint_residual"] = t.test_residual;
    jt["best_epoch"] = t.best_epoch;
    j["trials"].push_back(std::move(jt));
  }
  j["mean"] = r.mean;
  j["std"] = r.std;
  j["mean_percent"] = percent(r.mean);
  j["std_percent"] = percent(r.std);
  if (r.method == "lagrangian")
    j["note"] = "simplified two-player Lagrangian stand-in, not an external library";
  if (r.wall_clock_seconds) j["wall_clock_seconds"] = *r.wall_clock_seconds;
  return j.dump(2);
}

double evaluate_named_metric(const std::string& name, const Eigen::VectorXd& scores,
                             const Batch& data, double beta, std::int64_t k, int grid_m,
                             const std::vector<double>& thresholds) {
  const std::span<const double> s(scores.data(), static_cast<std::size_t>(scores.size()));
  if (name == "auc") return roc_auc(s, data.labels);
  if (name == "pauc_roc") return partial_auc_roc(s, data.labels, beta, grid_m).mcclish;
  ProblemConfig pc;
  pc.name = name;
  pc.beta = beta;
  pc.k = k;
  pc.grid_m = grid_m;
  if (name == "fairness") pc.num_groups = static_cast<int>(thresholds.size());
  const ProblemSpec p = build_problem(pc);
  return problem_metric(p, s, data.labels, data.groups, thresholds).value;
}

void emit_curves(const std::string& model_path, const Batch& data, const std::string& out_dir) {
  const Checkpoint ck = load_checkpoint(model_path);
  const Eigen::VectorXd s = forward(ck.params, data.features);
  const std::span<const double> sp(s.data(), static_cast<std::size_t>(s.size()));
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  auto write = [&](const std::string& file, const std::vector<CurvePoint>& pts) {
    std::ofstream out(dir / file);
    if (!out) throw Error("cannot write " + (dir / file).string());
    write_curve_csv(out, pts);
  };
  write("roc.csv", roc_points(sp, data.labels));
  write("pr.csv", pr_points(sp, data.labels));
}

GradcheckResult gradcheck(const ExperimentConfig& cfg) {
  const Dataset data = build_dataset(cfg.data, cfg.seed);
  auto idx = data.indices(Split::Train);
  if (idx.size() > 200) idx.resize(200);
  const Batch batch = data.rows(idx);
  ArchSpec arch;
  arch.input_dim = data.dim();
  arch.hidden = cfg.hidden;
  arch.bias = cfg.bias;
  const ModelParams params = init(arch, cfg.seed);

  GradcheckResult out;
  CounterRng rng(cfg.seed, 0x67636b);
  Eigen::VectorXd w(static_cast<Eigen::Index>(batch.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
  out.model_error = grad_check(params, batch.features, w);
  out.implicit_error =
      implicit_gradient_check(build_problem(cfg.problem), params, batch, cfg.trainer.surrogate);
  return out;
}

}  // namespace irco
