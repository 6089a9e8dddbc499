#include "irco/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "irco/error.hpp"
#include "irco/rng.hpp"

namespace irco {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Layer {
  int in;
  int out;
  std::size_t weight_offset;
  std::size_t bias_offset;  // == weight_offset + in*out when bias is on
};

std::vector<Layer> layout(const ArchSpec& arch) {
  std::vector<Layer> layers;
  std::size_t offset = 0;
  int in = arch.input_dim;
  auto add = [&](int out) {
    Layer l{in, out, offset, offset + static_cast<std::size_t>(in) * out};
    offset = l.bias_offset + (arch.bias ? static_cast<std::size_t>(out) : 0);
    layers.push_back(l);
    in = out;
  };
  for (int h : arch.hidden) add(h);
  add(1);
  return layers;
}

Eigen::Map<const RowMatrix> weights_of(const Eigen::VectorXd& theta, const Layer& l) {
  return {theta.data() + l.weight_offset, l.out, l.in};
}

void check_features(const ModelParams& p, const Eigen::MatrixXd& x) {
  if (x.cols() != p.arch.input_dim)
    throw std::invalid_argument("feature dimension mismatch: expected " +
                                std::to_string(p.arch.input_dim) + ", got " +
                                std::to_string(x.cols()));
  if (static_cast<std::size_t>(p.theta.size()) != param_count(p.arch))
    throw std::invalid_argument("parameter vector does not match architecture");
}

// Pre-activations of every layer (the last one is the score column).
std::vector<Eigen::MatrixXd> forward_trace(const ModelParams& p, const std::vector<Layer>& layers,
                                           const Eigen::MatrixXd& x) {
  std::vector<Eigen::MatrixXd> pre;
  pre.reserve(layers.size());
  Eigen::MatrixXd h = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Layer& l = layers[k];
    Eigen::MatrixXd z = h * weights_of(p.theta, l).transpose();
    if (p.arch.bias)
      z.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(p.theta.data() + l.bias_offset, l.out);
    pre.push_back(z);
    if (k + 1 < layers.size()) h = z.cwiseMax(0.0);
  }
  return pre;
}

}  // namespace

void validate(const ArchSpec& arch) {
  if (arch.input_dim < 1) throw std::invalid_argument("input_dim must be positive");
  for (int h : arch.hidden)
    if (h < 1) throw std::invalid_argument("hidden widths must be positive");
}

std::size_t param_count(const ArchSpec& arch) {
  validate(arch);
  const auto layers = layout(arch);
  const Layer& last = layers.back();
  return last.bias_offset + (arch.bias ? 1 : 0);
}

ModelParams init(const ArchSpec& arch, std::uint64_t seed) {
  ModelParams p{arch, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(arch)))};
  CounterRng rng(seed, 0x6d6f64656cULL);
  for (const Layer& l : layout(arch)) {
    const double a = std::sqrt(6.0 / (l.in + l.out));
    for (std::size_t i = 0; i < static_cast<std::size_t>(l.in) * l.out; ++i)
      p.theta[static_cast<Eigen::Index>(l.weight_offset + i)] = rng.uniform(-a, a);
  }
  return p;
}

Eigen::VectorXd forward(const ModelParams& p, const Eigen::MatrixXd& x) {
  check_features(p, x);
  const auto layers = layout(p.arch);
  if (layers.size() == 1) {
    const Layer& l = layers[0];
    Eigen::VectorXd s = x * Eigen::Map<const Eigen::VectorXd>(p.theta.data(), l.in);
    if (p.arch.bias) s.array() += p.theta[static_cast<Eigen::Index>(l.bias_offset)];
    return s;
  }
  return forward_trace(p, layers, x).back().col(0);
}

Eigen::VectorXd vjp(const ModelParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
  check_features(p, x);
  if (w.size() != x.rows()) throw std::invalid_argument("weights length mismatch");
  const auto layers = layout(p.arch);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.theta.size());

  if (layers.size() == 1) {
    const Layer& l = layers[0];
    grad.head(l.in) = x.transpose() * w;
    if (p.arch.bias) grad[static_cast<Eigen::Index>(l.bias_offset)] = w.sum();
    return grad;
  }

  const auto pre = forward_trace(p, layers, x);
  Eigen::MatrixXd delta = w;  // d/dz of the weighted score sum, n x out
  for (std::size_t k = layers.size(); k-- > 0;) {
    const Layer& l = layers[k];
    const Eigen::MatrixXd input = k == 0 ? x : Eigen::MatrixXd(pre[k - 1].cwiseMax(0.0));
    Eigen::Map<RowMatrix>(grad.data() + l.weight_offset, l.out, l.in) = delta.transpose() * input;
    if (p.arch.bias)
      grad.segment(static_cast<Eigen::Index>(l.bias_offset), l.out) =
          delta.colwise().sum().transpose();
    if (k == 0) break;
    Eigen::MatrixXd upstream = delta * weights_of(p.theta, l);
    const Eigen::MatrixXd& z = pre[k - 1];
    delta = (z.array() > 0.0).select(upstream, 0.0);
  }
  return grad;
}

double grad_check(const ModelParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
  const Eigen::VectorXd analytic = vjp(p, x, w);
  Eigen::VectorXd numeric(analytic.size());
  ModelParams probe = p;
  for (Eigen::Index j = 0; j < p.theta.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(p.theta[j]));
    probe.theta[j] = p.theta[j] + h;
    const double up = w.dot(forward(probe, x));
    probe.theta[j] = p.theta[j] - h;
    const double down = w.dot(forward(probe, x));
    probe.theta[j] = p.theta[j];
    numeric[j] = (up - down) / (2.0 * h);
  }
  const double scale = std::max(analytic.lpNorm<Eigen::Infinity>(),
                                numeric.lpNorm<Eigen::Infinity>());
  if (scale == 0.0) return 0.0;
  return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

std::string checkpoint_to_json(const Checkpoint& c) {
  nlohmann::json j;
  j["arch"] = {{"input_dim", c.params.arch.input_dim},
               {"hidden", c.params.arch.hidden},
               {"activation", "relu"},
               {"bias", c.params.arch.bias}};
  j["theta"] = std::vector<double>(c.params.theta.data(),
                                   c.params.theta.data() + c.params.theta.size());
  j["thresholds"] = c.thresholds;
  return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Checkpoint c;
    const auto& a = j.at("arch");
    c.params.arch.input_dim = a.at("input_dim").get<int>();
    c.params.arch.hidden = a.value("hidden", std::vector<int>{});
    c.params.arch.bias = a.value("bias", true);
    if (a.value("activation", std::string("relu")) != "relu")
      throw Error("unsupported activation");
    const auto theta = j.at("theta").get<std::vector<double>>();
    c.params.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(),
                                                       static_cast<Eigen::Index>(theta.size()));
    if (theta.size() != param_count(c.params.arch))
      throw Error("checkpoint theta length does not match arch");
    c.thresholds = j.value("thresholds", std::vector<double>{});
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << checkpoint_to_json(c) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace irco
