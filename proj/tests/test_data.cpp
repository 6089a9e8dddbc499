#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "irco/data.hpp"
#include "irco/error.hpp"
#include "irco/metrics.hpp"
#include "oracles.hpp"

using namespace irco;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("gen_gaussian moments and determinism") {
  const SyntheticSpec spec = spherical_spec(vec2(1.0, -2.0), vec2(0.0, 0.0), 0.5);
  const Dataset d = gen_gaussian(spec, 10000, 42);
  const Batch pos_neg = d.all();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.labels[i] == 1) {
      mean += d.features.row(static_cast<Eigen::Index>(i)).transpose();
      ++n_pos;
    }
  mean /= static_cast<double>(n_pos);
  const double frac = static_cast<double>(n_pos) / 10000.0;
  CHECK(frac >= 0.47);
  CHECK(frac <= 0.53);
  // 4 sigma / sqrt(n) with unit variances.
  CHECK((mean - spec.mu_pos).cwiseAbs().maxCoeff() < 4.0 / std::sqrt(static_cast<double>(n_pos)));

  const Dataset again = gen_gaussian(spec, 10000, 42);
  CHECK(again.features == d.features);
  CHECK(again.labels == d.labels);
  CHECK(gen_gaussian(spec, 10000, 43).features != d.features);
  // A prefix is its own stream: example i depends only on (seed, i).
  CHECK(gen_gaussian(spec, 50, 42).features == d.features.topRows(50));
}

TEST_CASE("gen_gaussian validation") {
  SyntheticSpec bad = heteroscedastic_spec();
  bad.sigma_pos(0, 0) = -1.0;
  CHECK_THROWS_AS(gen_gaussian(bad, 100, 0), std::invalid_argument);
  SyntheticSpec asym = heteroscedastic_spec();
  asym.sigma_neg(0, 1) = 0.3;
  CHECK_THROWS_AS(gen_gaussian(asym, 100, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_gaussian(heteroscedastic_spec(), 9, 0), std::invalid_argument);
}

TEST_CASE("heteroscedastic preset") {
  const SyntheticSpec s = heteroscedastic_spec();
  CHECK(s.mu_pos == vec2(1, 1));
  CHECK(s.mu_neg == vec2(0, 0));
  CHECK(s.sigma_pos(0, 0) == 0.25);
  CHECK(s.sigma_pos(1, 1) == 4.0);
  CHECK(s.sigma_neg(0, 0) == 4.0);
  CHECK(s.sigma_neg(1, 1) == 0.25);
  CHECK(s.prior_pos == 0.05);
}

TEST_CASE("analytic threshold closed forms") {
  const SyntheticSpec s = heteroscedastic_spec();
  const Eigen::VectorXd w = vec2(0.3, -0.7);
  const AnalyticThreshold med = analytic_threshold(s, w, 0.5);
  CHECK(med.lambda == doctest::Approx(w.dot(s.mu_pos)));
  CHECK((med.grad - s.mu_pos).norm() < 1e-15);

  const SyntheticSpec sph = spherical_spec(vec2(0, 0), vec2(0, 0), 0.5);
  const AnalyticThreshold t = analytic_threshold(sph, w, 0.1);
  const double z = -1.2815515655446004;
  CHECK(t.lambda == doctest::Approx(z * w.norm()).epsilon(1e-12));
  CHECK((t.grad - z * w / w.norm()).norm() < 1e-12);

  CHECK_THROWS_AS(analytic_threshold(s, w, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(analytic_threshold(s, w, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(analytic_threshold(s, Eigen::VectorXd::Zero(2), 0.2), std::invalid_argument);
}

TEST_CASE("analytic threshold gradient matches finite differences") {
  const SyntheticSpec s = heteroscedastic_spec();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::VectorXd w = oracle::random_matrix(seed, 2, 1).col(0);
    const double beta = 0.05 + 0.04 * static_cast<double>(seed % 10);
    const Eigen::VectorXd fd = oracle::fd_gradient(
        [&](const Eigen::VectorXd& v) { return analytic_threshold(s, v, beta).lambda; }, w, 1e-5);
    CHECK(oracle::rel_error(analytic_threshold(s, w, beta).grad, fd) < 1e-8);
  }
}

TEST_CASE("analytic threshold is scale equivariant") {
  SyntheticSpec s = heteroscedastic_spec();
  irco::CounterRng rng(9, 1);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd w = oracle::random_matrix(i, 2, 1).col(0);
    const double c = rng.uniform(0.1, 10.0);
    CHECK(analytic_threshold(s, c * w, 0.2).lambda ==
          doctest::Approx(c * analytic_threshold(s, w, 0.2).lambda).epsilon(1e-12));
  }
}

TEST_CASE("analytic threshold matches a Monte Carlo exact threshold") {
  const SyntheticSpec s = spherical_spec(vec2(2.0, 1.0), vec2(0.0, 0.0), 0.5);
  const Dataset d = gen_gaussian(s, 1000000, 5);
  const Eigen::VectorXd w = vec2(0.8, 0.6);
  const Eigen::VectorXd scores = d.features * w;
  const double beta = 0.1;
  const double mc = exact_threshold({scores.data(), static_cast<std::size_t>(scores.size())},
                                    d.labels, RateKind::fnr(), beta, Sense::AtMost);
  CHECK(oracle::rel_error(mc, analytic_threshold(s, w, beta).lambda) < 1e-2);
}

TEST_CASE("CSV round trip and errors") {
  const fs::path p = write_file("irco_two_rows.csv", "a,b,label\n1.5,-2,1\n0.25,3e2,0\n");
  const Dataset d = load_csv(p.string(), "label");
  REQUIRE(d.size() == 2);
  CHECK(d.dim() == 2);
  CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(d.features(1, 1) == 300.0);
  CHECK(d.labels == std::vector<int>{1, 0});

  const fs::path out = fs::temp_directory_path() / "irco_two_rows_out.csv";
  save_csv(out.string(), d);
  const Dataset back = load_csv(out.string(), "label");
  CHECK(back.features == d.features);
  CHECK(back.labels == d.labels);

  const fs::path g = write_file("irco_groups.csv", "x,sex,y\n1,0,1\n2,1,0\n3,1,1\n");
  const Dataset dg = load_csv(g.string(), "y", std::string("sex"));
  CHECK(dg.dim() == 1);
  CHECK(dg.groups == std::vector<int>{0, 1, 1});

  const fs::path bad = write_file("irco_bad.csv", "a,label\n1,0\nfoo,1\n");
  CHECK(error_of([&] { load_csv(bad.string(), "label"); }).find(":3:") != std::string::npos);
  const fs::path bad_label = write_file("irco_bad_label.csv", "a,label\n1,2\n");
  CHECK(error_of([&] { load_csv(bad_label.string(), "label"); }).find(":2:") != std::string::npos);
  const fs::path ragged = write_file("irco_ragged.csv", "a,b,label\n1,2,0\n1,0\n");
  CHECK(error_of([&] { load_csv(ragged.string(), "label"); }).find(":3:") != std::string::npos);
  CHECK_THROWS(load_csv(p.string(), "missing"));
  CHECK_THROWS(load_csv("/nonexistent/file.csv", "label"));
}

TEST_CASE("LIBSVM rows with gaps are zero filled") {
  const fs::path p = write_file("irco_svm.txt", "+1 1:0.5 4:2\n-1 2:1.5\n# comment\n1 3:-1\n");
  const Dataset d = load_libsvm(p.string());
  REQUIRE(d.size() == 3);
  CHECK(d.dim() == 4);
  CHECK(d.labels == std::vector<int>{1, 0, 1});
  CHECK(d.features(0, 0) == 0.5);
  CHECK(d.features(0, 1) == 0.0);
  CHECK(d.features(0, 3) == 2.0);
  CHECK(d.features(1, 1) == 1.5);
  CHECK(d.features(2, 2) == -1.0);

  const fs::path bad = write_file("irco_svm_bad.txt", "1 1:2\n1 3:1 2:4\n");
  CHECK(error_of([&] { load_libsvm(bad.string()); }).find(":2:") != std::string::npos);
  const fs::path zero = write_file("irco_svm_zero.txt", "1 0:2\n");
  CHECK(error_of([&] { load_libsvm(zero.string()); }).find(":1:") != std::string::npos);
}

TEST_CASE("a generated 1000-line file loads every row") {
  std::string text = "f0,f1,f2,label\n";
  double checksum = 0.0;
  irco::CounterRng rng(3, 0);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.normal(), b = rng.normal(), c = rng.normal();
    checksum += a + b + c;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", a, b, c, i % 3 == 0);
    text += buf;
  }
  const Dataset d = load_csv(write_file("irco_gen.csv", text).string(), "label");
  CHECK(d.size() == 1000);
  CHECK(d.features.sum() == doctest::Approx(checksum).epsilon(1e-12));
  CHECK(std::count(d.labels.begin(), d.labels.end(), 1) == 334);
}

TEST_CASE("data directory lookup") {
  const fs::path dir = fs::temp_directory_path() / "irco_data_dir";
  fs::create_directories(dir);
  std::ofstream(dir / "only_here.csv") << "a,label\n1,1\n";
  setenv("IRCO_DATA_DIR", dir.c_str(), 1);
  CHECK(resolve_data_path("only_here.csv") == (dir / "only_here.csv").string());
  CHECK(resolve_data_path("missing.csv") == "missing.csv");
  unsetenv("IRCO_DATA_DIR");
  CHECK(resolve_data_path("only_here.csv") == "only_here.csv");
}

TEST_CASE("stratified split") {
  const Dataset d = gen_gaussian(heteroscedastic_spec(), 5000, 1);
  const Dataset s = split(d, {0.5, 0.25, 0.25}, 7);
  const double total_pos = static_cast<double>(std::count(d.labels.begin(), d.labels.end(), 1));
  const double prior = total_pos / static_cast<double>(d.size());
  std::size_t covered = 0;
  for (Split part : {Split::Train, Split::Val, Split::Test}) {
    const auto idx = s.indices(part);
    covered += idx.size();
    std::int64_t pos = 0;
    for (auto i : idx) pos += s.labels[i];
    // Within one example of the exact share of positives.
    CHECK(std::abs(static_cast<double>(pos) - prior * static_cast<double>(idx.size())) <= 1.0 + 1e-9);
  }
  CHECK(covered == d.size());
  CHECK(s.indices(Split::Train).size() == doctest::Approx(2500).epsilon(0.001));
  CHECK(split(d, {0.5, 0.25, 0.25}, 7).split == s.split);
  CHECK(split(d, {0.5, 0.25, 0.25}, 8).split != s.split);
  CHECK_THROWS_AS(split(d, {0.5, 0.25, 0.2}, 7), std::invalid_argument);
  CHECK_THROWS_AS(split(d, {1.2, -0.1, -0.1}, 7), std::invalid_argument);
}

TEST_CASE("standardize uses train statistics only") {
  const Dataset s = split(gen_gaussian(heteroscedastic_spec(), 4000, 2), {0.5, 0.25, 0.25}, 3);
  const Dataset z = standardize(s);
  const Batch train = z.part(Split::Train);
  for (Eigen::Index j = 0; j < train.features.cols(); ++j) {
    const Eigen::VectorXd col = train.features.col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  }
  const Batch val = z.part(Split::Val);
  CHECK(std::abs(val.features.col(0).mean()) > 1e-6);

  Dataset constant = oracle::make_dataset(Eigen::MatrixXd::Constant(10, 1, 3.0),
                                          std::vector<int>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  const Dataset zc = standardize(constant);
  CHECK(zc.features.allFinite());
  CHECK(zc.features.cwiseAbs().maxCoeff() == 0.0);
}
