#include "irco/surrogates.hpp"

#include <cmath>
#include <stdexcept>

#include "irco/error.hpp"

namespace irco {

namespace {

// Logistic function and its complement, both without cancellation.
struct Logistic {
  double s;     // 1 / (1 + e^-t)
  double comp;  // 1 - s
};

Logistic logistic(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return {1.0 / (1.0 + e), e / (1.0 + e)};
  }
  const double e = std::exp(t);
  return {e / (1.0 + e), 1.0 / (1.0 + e)};
}

}  // namespace

SigmaValue sigma(const SurrogateConfig& cfg, double x) {
  const double tau = cfg.temperature;
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  const double t = tau * x;
  const Logistic l = logistic(t);
  SigmaValue out;
  if (cfg.kind == SurrogateConfig::Kind::Sigmoid) {
    out.value = l.s;
    out.d1 = tau * l.s * l.comp;
    out.d2 = tau * tau * l.s * l.comp * (l.comp - l.s);
  } else {
    out.value = std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
    out.d1 = tau * l.s;
    out.d2 = tau * tau * l.s * l.comp;
  }
  return out;
}

void SmoothEval::resize(std::size_t n) {
  d_score.assign(n, 0.0);
  d_lambda_score.assign(n, 0.0);
}

SmoothEval& SmoothEval::operator+=(const SmoothEval& o) {
  value += o.value;
  d_lambda += o.d_lambda;
  d2_lambda += o.d2_lambda;
  if (d_score.size() != o.d_score.size()) throw std::invalid_argument("SmoothEval size mismatch");
  for (std::size_t j = 0; j < d_score.size(); ++j) {
    d_score[j] += o.d_score[j];
    d_lambda_score[j] += o.d_lambda_score[j];
  }
  return *this;
}

SmoothEval& SmoothEval::operator*=(double c) {
  value *= c;
  d_lambda *= c;
  d2_lambda *= c;
  for (double& v : d_score) v *= c;
  for (double& v : d_lambda_score) v *= c;
  return *this;
}

SmoothCounts smooth_counts(std::span<const double> scores, std::span<const int> labels,
                           double lambda, const SurrogateConfig& cfg,
                           std::span<const unsigned char> include) {
  if (scores.empty()) throw std::invalid_argument("empty batch");
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length");
  if (!include.empty() && include.size() != scores.size())
    throw std::invalid_argument("mask length mismatch");
  const std::size_t n = scores.size();
  SmoothCounts c;
  for (SmoothEval* e : {&c.tp, &c.fp, &c.fn_, &c.tn}) e->resize(n);

  for (std::size_t j = 0; j < n; ++j) {
    if (!include.empty() && !include[j]) continue;
    const double u = scores[j] - lambda;
    const SigmaValue a = sigma(cfg, u);   // sigma(p - lambda)
    const SigmaValue b = sigma(cfg, -u);  // sigma(lambda - p)
    const bool pos = labels[j] == 1;
    SmoothEval& above = pos ? c.tp : c.fp;
    SmoothEval& below = pos ? c.fn_ : c.tn;
    (pos ? c.n_pos : c.n_neg) += 1.0;

    above.value += a.value;
    above.d_lambda -= a.d1;
    above.d2_lambda += a.d2;
    above.d_score[j] = a.d1;
    above.d_lambda_score[j] = -a.d2;

    below.value += b.value;
    below.d_lambda += b.d1;
    below.d2_lambda += b.d2;
    below.d_score[j] = -b.d1;
    below.d_lambda_score[j] = -b.d2;
  }
  c.pp = c.tp;
  c.pp += c.fp;
  return c;
}

namespace {

SmoothEval scaled(const SmoothEval& e, double population) {
  if (population <= 0.0) throw DegenerateError("undefined rate");
  SmoothEval out = e;
  out *= 1.0 / population;
  return out;
}

// value = num / den with both terms smooth.
SmoothEval quotient(const SmoothEval& num, const SmoothEval& den) {
  const double d = den.value;
  if (!(d > 1e-12)) throw DegenerateError("degenerate denominator");
  SmoothEval out;
  out.resize(num.d_score.size());
  const double v = num.value / d;
  const double v_l = (num.d_lambda - v * den.d_lambda) / d;
  out.value = v;
  out.d_lambda = v_l;
  out.d2_lambda = (num.d2_lambda - 2.0 * v_l * den.d_lambda - v * den.d2_lambda) / d;
  for (std::size_t j = 0; j < out.d_score.size(); ++j) {
    const double v_p = (num.d_score[j] - v * den.d_score[j]) / d;
    out.d_score[j] = v_p;
    out.d_lambda_score[j] = (num.d_lambda_score[j] - v_p * den.d_lambda - v * den.d_lambda_score[j] -
                             v_l * den.d_score[j]) /
                            d;
  }
  return out;
}

}  // namespace

SmoothEval smooth_rate(RateKind kind, const SmoothCounts& c) {
  using K = RateKind::Kind;
  switch (kind.kind) {
    case K::FPR: return scaled(c.fp, c.n_neg);
    case K::FNR: return scaled(c.fn_, c.n_pos);
    case K::TPR:
    case K::Recall: return scaled(c.tp, c.n_pos);
    case K::Precision: return quotient(c.tp, c.pp);
    case K::Coverage:
    case K::GroupCoverage: return scaled(c.pp, c.n());
    case K::Error: {
      SmoothEval err = c.fp;
      err += c.fn_;
      return scaled(err, c.n());
    }
  }
  throw std::logic_error("unknown rate kind");
}

SmoothEval smooth_rate(RateKind kind, std::span<const double> scores, std::span<const int> labels,
                       double lambda, const SurrogateConfig& cfg, std::span<const int> groups) {
  if (kind.kind == RateKind::Kind::GroupCoverage && kind.group < 0)
    throw std::invalid_argument("GroupCoverage needs a group id");
  if (kind.group < 0) return smooth_rate(kind, smooth_counts(scores, labels, lambda, cfg));
  if (groups.size() != scores.size()) throw std::invalid_argument("group ids missing");
  std::vector<unsigned char> mask(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) mask[j] = groups[j] == kind.group;
  return smooth_rate(kind, smooth_counts(scores, labels, lambda, cfg, mask));
}

}  // namespace irco
