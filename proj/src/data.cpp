#include "irco/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "irco/error.hpp"
#include "irco/rng.hpp"

namespace irco {

std::int64_t Batch::n_pos() const {
  return std::count(labels.begin(), labels.end(), 1);
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < size(); ++i)
    if (split[i] == s) idx.push_back(i);
  return idx;
}

Batch Dataset::rows(std::span<const std::size_t> idx) const {
  Batch b;
  b.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
  b.labels.reserve(idx.size());
  if (!groups.empty()) b.groups.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    b.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(idx[r]));
    b.labels.push_back(labels[idx[r]]);
    if (!groups.empty()) b.groups.push_back(groups[idx[r]]);
  }
  return b;
}

Batch Dataset::part(Split s) const {
  const auto idx = indices(s);
  return rows(idx);
}

Batch Dataset::all() const {
  Batch b{features, labels, groups};
  return b;
}

SyntheticSpec heteroscedastic_spec() {
  SyntheticSpec s;
  s.mu_pos = Eigen::Vector2d(1.0, 1.0);
  s.mu_neg = Eigen::Vector2d(0.0, 0.0);
  s.sigma_pos = Eigen::Vector2d(0.25, 4.0).asDiagonal();
  s.sigma_neg = Eigen::Vector2d(4.0, 0.25).asDiagonal();
  s.prior_pos = 0.05;
  return s;
}

SyntheticSpec spherical_spec(const Eigen::VectorXd& mu_pos, const Eigen::VectorXd& mu_neg,
                             double prior_pos) {
  const auto d = mu_pos.size();
  return {mu_pos, mu_neg, Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d),
          prior_pos};
}

namespace {

Eigen::MatrixXd cholesky(const Eigen::MatrixXd& sigma, Eigen::Index d) {
  if (sigma.rows() != d || sigma.cols() != d) throw std::invalid_argument("covariance shape");
  if (!sigma.isApprox(sigma.transpose(), 1e-12))
    throw std::invalid_argument("covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("covariance is not positive-definite");
  return llt.matrixL();
}

}  // namespace

Dataset gen_gaussian(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 10) throw std::invalid_argument("n must be at least 10");
  if (!(spec.prior_pos > 0.0 && spec.prior_pos < 1.0))
    throw std::invalid_argument("prior_pos outside (0, 1)");
  const Eigen::Index d = spec.mu_pos.size();
  if (spec.mu_neg.size() != d) throw std::invalid_argument("mean dimensions differ");
  const Eigen::MatrixXd l_pos = cholesky(spec.sigma_pos, d);
  const Eigen::MatrixXd l_neg = cholesky(spec.sigma_neg, d);

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(n), d);
  data.labels.resize(n);
  data.split.assign(n, Split::Train);
  for (Eigen::Index k = 0; k < d; ++k) data.feature_names.push_back("x" + std::to_string(k));
  Eigen::VectorXd z(d);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    const int y = rng.uniform() < spec.prior_pos ? 1 : 0;
    for (Eigen::Index k = 0; k < d; ++k) z[k] = rng.normal();
    data.labels[i] = y;
    data.features.row(static_cast<Eigen::Index>(i)) =
        (y == 1 ? spec.mu_pos + l_pos * z : spec.mu_neg + l_neg * z).transpose();
  }
  return data;
}

AnalyticThreshold analytic_threshold(const SyntheticSpec& spec, const Eigen::VectorXd& w,
                                     double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (w.size() != spec.mu_pos.size()) throw std::invalid_argument("dimension mismatch");
  const Eigen::VectorXd sw = spec.sigma_pos * w;
  const double var = w.dot(sw);
  if (!(var > 0.0)) throw std::invalid_argument("theta must be nonzero");
  const double sd = std::sqrt(var);
  const double z = boost::math::quantile(boost::math::normal(), beta);
  return {w.dot(spec.mu_pos) + z * sd, spec.mu_pos + z * sw / sd};
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& what) {
  throw Error(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& s, const std::string& path, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    fail(path, line, "malformed number '" + s + "'");
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::optional<std::string>& group_column) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "missing header");
  const auto header = split_fields(line);
  std::ptrdiff_t label_at = -1;
  std::ptrdiff_t group_at = -1;
  std::vector<std::size_t> feature_at;
  Dataset data;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) {
      label_at = static_cast<std::ptrdiff_t>(c);
    } else if (group_column && header[c] == *group_column) {
      group_at = static_cast<std::ptrdiff_t>(c);
    } else {
      feature_at.push_back(c);
      data.feature_names.push_back(header[c]);
    }
  }
  if (label_at < 0) fail(path, 1, "no column named '" + label_column + "'");
  if (group_column && group_at < 0) fail(path, 1, "no column named '" + *group_column + "'");

  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      fail(path, line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
    const double y = parse_double(fields[static_cast<std::size_t>(label_at)], path, line_no);
    if (y != 0.0 && y != 1.0) fail(path, line_no, "label must be 0 or 1");
    data.labels.push_back(static_cast<int>(y));
    if (group_at >= 0) {
      const double g = parse_double(fields[static_cast<std::size_t>(group_at)], path, line_no);
      if (g < 0 || g != std::floor(g)) fail(path, line_no, "group id must be a non-negative integer");
      data.groups.push_back(static_cast<int>(g));
    }
    for (std::size_t c : feature_at) values.push_back(parse_double(fields[c], path, line_no));
  }
  const auto n = static_cast<Eigen::Index>(data.labels.size());
  const auto d = static_cast<Eigen::Index>(feature_at.size());
  data.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                 Eigen::RowMajor>>(values.data(), n, d);
  data.split.assign(data.labels.size(), Split::Train);
  return data;
}

Dataset load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<std::vector<std::pair<int, double>>> rows;
  Dataset data;
  int dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    ss >> tok;
    const double y = parse_double(tok, path, line_no);
    if (y == 1.0) {
      data.labels.push_back(1);
    } else if (y == -1.0 || y == 0.0) {
      data.labels.push_back(0);
    } else {
      fail(path, line_no, "label must be -1/+1 or 0/1");
    }
    auto& row = rows.emplace_back();
    int prev = 0;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) fail(path, line_no, "expected idx:val, got '" + tok + "'");
      const double idx = parse_double(tok.substr(0, colon), path, line_no);
      if (idx < 1 || idx != std::floor(idx)) fail(path, line_no, "index must be a positive integer");
      const int k = static_cast<int>(idx);
      if (k <= prev) fail(path, line_no, "indices must be increasing");
      prev = k;
      row.emplace_back(k - 1, parse_double(tok.substr(colon + 1), path, line_no));
      dim = std::max(dim, k);
    }
  }
  data.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (auto [k, v] : rows[r]) data.features(static_cast<Eigen::Index>(r), k) = v;
  for (int k = 0; k < dim; ++k) data.feature_names.push_back("f" + std::to_string(k + 1));
  data.split.assign(data.labels.size(), Split::Train);
  return data;
}

void save_csv(const std::string& path, const Dataset& data, const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (int k = 0; k < data.dim(); ++k) {
    const std::string name = k < static_cast<int>(data.feature_names.size())
                                 ? data.feature_names[static_cast<std::size_t>(k)]
                                 : "x" + std::to_string(k);
    out << name << ',';
  }
  if (!data.groups.empty()) out << "group,";
  out << label_column << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int k = 0; k < data.dim(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(static_cast<Eigen::Index>(i), k));
      out << buf << ',';
    }
    if (!data.groups.empty()) out << data.groups[i] << ',';
    out << data.labels[i] << '\n';
  }
}

std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (p.is_absolute() || fs::exists(p)) return path;
  if (const char* dir = std::getenv("IRCO_DATA_DIR")) {
    const fs::path candidate = fs::path(dir) / p;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

Dataset split(const Dataset& data, std::array<double, 3> ratios, std::uint64_t seed) {
  for (double r : ratios)
    if (r < 0.0) throw std::invalid_argument("ratios must be non-negative");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw std::invalid_argument("ratios must sum to 1");
  Dataset out = data;
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.labels[i] == cls) idx.push_back(i);
    CounterRng rng(seed, 0x73706c6974ULL + static_cast<std::uint64_t>(cls));
    rng.shuffle(idx.begin(), idx.end());
    const auto n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * n));
    const auto n_val = std::min(idx.size() - n_train,
                                static_cast<std::size_t>(std::llround(ratios[1] * n)));
    for (std::size_t r = 0; r < idx.size(); ++r)
      out.split[idx[r]] = r < n_train ? Split::Train : r < n_train + n_val ? Split::Val : Split::Test;
  }
  return out;
}

Dataset standardize(const Dataset& data) {
  const auto train = data.indices(Split::Train);
  if (train.empty()) throw std::invalid_argument("standardize needs a non-empty train split");
  const Eigen::Index d = data.features.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  for (std::size_t i : train) mean += data.features.row(static_cast<Eigen::Index>(i)).transpose();
  mean /= static_cast<double>(train.size());
  for (std::size_t i : train) {
    const Eigen::VectorXd c = data.features.row(static_cast<Eigen::Index>(i)).transpose() - mean;
    sq += c.cwiseProduct(c);
  }
  const Eigen::VectorXd sd =
      (sq / static_cast<double>(train.size())).cwiseSqrt().cwiseMax(1e-8);
  Dataset out = data;
  out.features = (data.features.rowwise() - mean.transpose()).array().rowwise() /
                 sd.transpose().array();
  return out;
}

}  // namespace irco
