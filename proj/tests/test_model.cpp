#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "irco/model.hpp"
#include "oracles.hpp"

using namespace irco;

namespace {

ArchSpec arch(int d, std::vector<int> hidden = {}, bool bias = true) {
  ArchSpec a;
  a.input_dim = d;
  a.hidden = std::move(hidden);
  a.bias = bias;
  return a;
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(param_count(arch(4)) == 5);
  CHECK(param_count(arch(4, {}, false)) == 4);
  CHECK(param_count(arch(3, {5, 2})) == (3 * 5 + 5) + (5 * 2 + 2) + (2 + 1));
  CHECK_THROWS_AS(validate(arch(0)), std::invalid_argument);
  CHECK_THROWS_AS(validate(arch(2, {0})), std::invalid_argument);
}

TEST_CASE("init is deterministic and has zero biases") {
  const ModelParams a = init(arch(3, {4}), 7);
  const ModelParams b = init(arch(3, {4}), 7);
  const ModelParams c = init(arch(3, {4}), 8);
  CHECK(a.theta == b.theta);
  CHECK(a.theta != c.theta);
  // First-layer bias follows the 4x3 weight block.
  CHECK(a.theta.segment(12, 4).isZero());
  CHECK(a.theta[a.theta.size() - 1] == 0.0);
}

TEST_CASE("linear forward and vjp are the closed forms") {
  const Eigen::MatrixXd x = oracle::random_matrix(1, 50, 4);
  ModelParams p = init(arch(4), 3);
  p.theta << 0.5, -1.0, 2.0, 0.25, 0.75;
  const Eigen::VectorXd s = forward(p, x);
  CHECK((s - (x * p.theta.head(4)).array().matrix() - Eigen::VectorXd::Constant(50, 0.75)).norm() <
        1e-12);
  const Eigen::VectorXd w = oracle::random_matrix(2, 50, 1).col(0);
  const Eigen::VectorXd g = vjp(p, x, w);
  CHECK((g.head(4) - x.transpose() * w).norm() < 1e-12);
  CHECK(g[4] == doctest::Approx(w.sum()));
  CHECK(grad_check(p, x, w) < 1e-9);
}

TEST_CASE("MLP vjp matches finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd x = oracle::random_matrix(seed, 40, 3);
    // Random biases keep pre-activations away from the ReLU kink; with zero
    // biases a dead first layer puts the second one exactly at 0.
    ModelParams p = init(arch(3, {6, 4}), seed);
    p.theta = oracle::random_matrix(seed + 50, p.theta.size(), 1).col(0);
    const Eigen::VectorXd w = oracle::random_matrix(seed + 100, 40, 1).col(0);
    const Eigen::VectorXd g = vjp(p, x, w);
    const Eigen::VectorXd fd = oracle::fd_gradient(
        [&](const Eigen::VectorXd& t) {
          ModelParams q = p;
          q.theta = t;
          return forward(q, x).dot(w);
        },
        p.theta);
    CHECK(oracle::rel_error(g, fd) < 1e-4);
    CHECK(grad_check(p, x, w) < 1e-4);
  }
}

TEST_CASE("shape errors") {
  const ModelParams p = init(arch(3), 0);
  CHECK_THROWS_AS(forward(p, Eigen::MatrixXd::Zero(4, 2)), std::invalid_argument);
  CHECK_THROWS_AS(vjp(p, Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("checkpoint round trip") {
  Checkpoint ck{init(arch(3, {2}), 5), {0.25, -1.5}};
  const Checkpoint back = checkpoint_from_json(checkpoint_to_json(ck));
  CHECK(back.params.arch == ck.params.arch);
  CHECK(back.params.theta == ck.params.theta);
  CHECK(back.thresholds == ck.thresholds);

  const auto path = std::filesystem::temp_directory_path() / "irco_ck_test.json";
  save_checkpoint(path.string(), ck);
  const Checkpoint disk = load_checkpoint(path.string());
  CHECK(disk.params.theta == ck.params.theta);
  std::filesystem::remove(path);

  CHECK_THROWS(checkpoint_from_json(R"({"arch":{"input_dim":2,"hidden":[]},"theta":[1]})"));
  CHECK_THROWS(load_checkpoint("/nonexistent/irco.json"));
}
