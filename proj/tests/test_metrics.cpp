#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>
#include <string>

#include "irco/error.hpp"
#include "irco/metrics.hpp"
#include "oracles.hpp"

using namespace irco;

namespace {

const RateKind kMonotoneKinds[] = {RateKind::fpr(), RateKind::fnr(), RateKind::tpr(),
                                   RateKind::recall(), RateKind::coverage()};

}  // namespace

TEST_CASE("confusion_counts matches a direct count") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const std::size_t n = 1 + seed % 200;
    const auto b = oracle::random_batch(seed, n);
    irco::CounterRng rng(seed, 3);
    const double lambda = rng.uniform(-5.0, 5.0);
    REQUIRE(confusion_counts(b.scores, b.labels, lambda) ==
            oracle::counts(b.scores, b.labels, lambda));
    // Thresholds exactly at a score: strict inequality.
    const double at = b.scores[rng.below(n)];
    REQUIRE(confusion_counts(b.scores, b.labels, at) == oracle::counts(b.scores, b.labels, at));
  }
}

TEST_CASE("rates follow the usual definitions") {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.2, 0.1};
  const std::vector<int> y{1, 0, 1, 0, 0};
  const RateCounts c = confusion_counts(s, y, 0.5);
  CHECK(c == RateCounts{1, 1, 1, 2});
  CHECK(rate(c, RateKind::fpr()) == doctest::Approx(1.0 / 3.0));
  CHECK(rate(c, RateKind::fnr()) == doctest::Approx(0.5));
  CHECK(rate(c, RateKind::tpr()) == doctest::Approx(0.5));
  CHECK(rate(c, RateKind::precision()) == doctest::Approx(0.5));
  CHECK(rate(c, RateKind::coverage()) == doctest::Approx(0.4));
  CHECK(rate(c, RateKind::error()) == doctest::Approx(0.4));
  // Nobody predicted positive: precision is 1 by convention.
  CHECK(rate(confusion_counts(s, y, 10.0), RateKind::precision()) == 1.0);
}

TEST_CASE("rates with an empty population raise") {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> all_neg{0, 0};
  const RateCounts c = confusion_counts(s, all_neg, 0.15);
  CHECK_THROWS_AS(rate(c, RateKind::fnr()), DegenerateError);
  CHECK_THROWS_AS(rate(c, RateKind::tpr()), DegenerateError);
  CHECK(rate(c, RateKind::fpr()) == doctest::Approx(0.5));
  CHECK_THROWS_AS(rate(RateCounts{}, RateKind::coverage()), DegenerateError);
  CHECK_THROWS_AS(confusion_counts(std::vector<double>{}, std::vector<int>{}, 0.0),
                  std::invalid_argument);
}

TEST_CASE("exact_threshold equals the exhaustive midpoint scan") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const std::size_t n = 1 + seed % 200;
    const auto b = oracle::random_batch(seed, n, 0.3, 0, seed % 3 != 0);
    irco::CounterRng rng(seed, 5);
    for (const RateKind& k : kMonotoneKinds) {
      for (Sense sense : {Sense::AtMost, Sense::AtLeast}) {
        const double target = rng.uniform();
        const auto want = oracle::exact_threshold(b.scores, b.labels, k, target, sense);
        if (want) {
          const double got = exact_threshold(b.scores, b.labels, k, target, sense);
          REQUIRE(got == doctest::Approx(*want).epsilon(1e-12));
          REQUIRE(confusion_counts(b.scores, b.labels, got) ==
                  oracle::counts(b.scores, b.labels, *want));
        } else {
          REQUIRE_THROWS_AS(exact_threshold(b.scores, b.labels, k, target, sense),
                            DegenerateError);
        }
      }
    }
  }
}

TEST_CASE("group-restricted threshold search uses only that group") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto b = oracle::random_batch(seed, 20 + seed % 150, 0.4, 3);
    const RateKind k = RateKind::group_coverage(static_cast<int>(seed % 3));
    const auto want = oracle::exact_threshold(b.scores, b.labels, k, 0.8, Sense::AtLeast, b.groups);
    if (!want) continue;
    const double got = exact_threshold(b.scores, b.labels, k, 0.8, Sense::AtLeast, b.groups);
    REQUIRE(got == doctest::Approx(*want).epsilon(1e-12));
  }
  const std::vector<double> s{1, 2};
  const std::vector<int> y{0, 1};
  CHECK_THROWS_AS(exact_threshold(s, y, RateKind::group_coverage(5), 0.5, Sense::AtLeast,
                                  std::vector<int>{0, 0}),
                  DegenerateError);
}

TEST_CASE("exact thresholds are midpoints or sentinels and meet the target") {
  const std::vector<double> s{0.1, 0.4, 0.4, 0.7, 0.9};
  const std::vector<int> y{0, 0, 1, 0, 1};
  const double t = exact_threshold(s, y, RateKind::fpr(), 0.34, Sense::AtMost);
  CHECK(t == doctest::Approx(0.55));
  CHECK(rate(confusion_counts(s, y, t), RateKind::fpr()) <= 0.34);
  // FPR 0 is reachable only at or above the largest negative.
  CHECK(exact_threshold(s, y, RateKind::fpr(), 0.0, Sense::AtMost) == doctest::Approx(0.8));
  CHECK(exact_threshold(s, y, RateKind::fpr(), 1.0, Sense::AtMost) == doctest::Approx(-1.9));
  CHECK_THROWS_AS(exact_threshold(s, y, RateKind::precision(), 0.5, Sense::AtLeast),
                  std::invalid_argument);
  CHECK_THROWS_AS(exact_threshold(s, y, RateKind::tpr(), 1.5, Sense::AtLeast),
                  std::invalid_argument);
  CHECK_THROWS_AS(exact_threshold(s, std::vector<int>(5, 0), RateKind::fnr(), 0.1, Sense::AtMost),
                  DegenerateError);
}

TEST_CASE("top_k_threshold admits k scores") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto b = oracle::random_batch(seed, 1 + seed % 100, 0.5, 0, false);
    const auto n = static_cast<std::int64_t>(b.scores.size());
    const std::int64_t k = static_cast<std::int64_t>(seed) % (n + 1);
    const double t = top_k_threshold(b.scores, k);
    REQUIRE(confusion_counts(b.scores, b.labels, t).predicted_positive() == k);
  }
  CHECK_THROWS_AS(top_k_threshold(std::vector<double>{1.0}, 2), std::invalid_argument);
}

TEST_CASE("trapezoid ROC area equals the pairwise AUC") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto b = oracle::random_batch(seed, 10 + seed % 190, 0.4);
    if (std::count(b.labels.begin(), b.labels.end(), 1) == 0 ||
        std::count(b.labels.begin(), b.labels.end(), 0) == 0)
      continue;
    REQUIRE(roc_auc(b.scores, b.labels) ==
            doctest::Approx(oracle::pairwise_auc(b.scores, b.labels)).epsilon(1e-12));
  }
}

TEST_CASE("curves run from the ceiling to the floor") {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  const std::vector<int> y{1, 1, 0, 0};
  const auto roc = roc_points(s, y);
  REQUIRE(roc.size() == 5);
  CHECK(roc.front().x == 0.0);
  CHECK(roc.front().y == 0.0);
  CHECK(roc.back().x == 1.0);
  CHECK(roc.back().y == 1.0);
  CHECK(roc[2].x == 0.0);
  CHECK(roc[2].y == 1.0);
  const auto pr = pr_points(s, y);
  CHECK(pr.front().y == 1.0);
  CHECK(pr.back().x == 1.0);
  CHECK(pr.back().y == 0.5);
  CHECK_THROWS_AS(roc_points(s, std::vector<int>{1, 1, 1, 1}), DegenerateError);
}

TEST_CASE("curve CSV has one row per midpoint plus two sentinels") {
  const auto b = oracle::random_batch(7, 50, 0.5);
  const auto pts = roc_points(b.scores, b.labels);
  std::ostringstream out;
  write_curve_csv(out, pts);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "threshold,x,y");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  const std::set<double> distinct(b.scores.begin(), b.scores.end());
  CHECK(rows == (distinct.size() - 1) + 2);

  std::ostringstream one;
  write_curve_csv(one, std::vector<CurvePoint>{{0.1, 1.0 / 3.0, 2.0}});
  CHECK(one.str() == "threshold,x,y\n0.10000000000000001,0.33333333333333331,2\n");
}

TEST_CASE("grids") {
  const auto f = fpr_grid(0.1, 4);
  REQUIRE(f.size() == 4);
  CHECK(f[0] == doctest::Approx(0.025));
  CHECK(f[3] == doctest::Approx(0.1));
  const auto r = recall_grid(0.5, 3);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == 0.5);
  CHECK(r[1] == doctest::Approx(0.75));
  CHECK(r[2] == 1.0);
  CHECK(recall_grid(0.3, 1) == std::vector<double>{1.0});
  CHECK_THROWS_AS(fpr_grid(0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(fpr_grid(0.1, 0), std::invalid_argument);
}

TEST_CASE("partial ROC AUC") {
  SUBCASE("perfect classifier scores exactly 100") {
    const std::vector<double> s{3, 2.5, 1, 0.5, 0.2};
    const std::vector<int> y{1, 1, 0, 0, 0};
    for (double beta : {0.05, 0.1, 0.5, 1.0}) {
      const PartialAuc p = partial_auc_roc(s, y, beta, 10);
      CHECK(p.raw == 1.0);
      CHECK(p.mcclish == 100.0);
    }
  }
  SUBCASE("beta = 1 with a fine grid approaches the full AUC") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto b = oracle::random_batch(seed, 200, 0.4, 0, false);
      const double auc = roc_auc(b.scores, b.labels);
      CHECK(std::abs(partial_auc_roc(b.scores, b.labels, 1.0, 200).raw - auc) < 0.01);
    }
  }
  SUBCASE("a reversed classifier is below chance") {
    const std::vector<double> s{0, 1, 2, 3};
    const std::vector<int> y{1, 1, 0, 0};
    CHECK(partial_auc_roc(s, y, 0.5, 4).mcclish < 50.0);
  }
}

TEST_CASE("partial PR AUC") {
  const std::vector<double> s{3, 2.5, 1, 0.5, 0.2};
  const std::vector<int> y{1, 1, 0, 0, 0};
  CHECK(partial_auc_pr(s, y, 0.5, 5) == 1.0);
  // Interleaved: recall 1 needs the top five scores, precision 3/5.
  const std::vector<double> s2{6, 5, 4, 3, 2, 1};
  const std::vector<int> y2{1, 0, 1, 0, 1, 0};
  CHECK(partial_auc_pr(s2, y2, 0.5, 1) == doctest::Approx(0.6));
  CHECK_THROWS_AS(partial_auc_pr(s2, std::vector<int>(6, 0), 0.5, 3), DegenerateError);
}
