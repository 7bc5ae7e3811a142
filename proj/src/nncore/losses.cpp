#include "gatefuse/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gatefuse/errors.hpp"

namespace gatefuse {

namespace {

// log-softmax of one row, max-subtracted.
void log_softmax_row(std::span<const double> in, std::span<double> out) {
  const double m = *std::max_element(in.begin(), in.end());
  double z = 0.0;
  for (double v : in) z += std::exp(v - m);
  const double log_z = m + std::log(z);
  for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] - log_z;
}

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t))
    throw ParameterError("temperature must be > 0, got " + std::to_string(t));
}

}  // namespace

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rows() != labels.size())
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + logits.shape_string());
  require_finite(logits, "softmax_cross_entropy logits");
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  LossResult r{0.0, Tensor(n, c)};
  if (n == 0) return r;
  std::vector<double> logp(c);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw IndexError("label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
    log_softmax_row(logits.row(i), logp);
    r.loss -= logp[static_cast<std::size_t>(y)];
    auto g = r.grad.row(i);
    for (std::size_t j = 0; j < c; ++j) g[j] = std::exp(logp[j]) * inv_n;
    g[static_cast<std::size_t>(y)] -= inv_n;
  }
  r.loss *= inv_n;
  return r;
}

std::vector<double> kl_per_example(const Tensor& teacher, const Tensor& student,
                                   double temperature) {
  check_temperature(temperature);
  require_same_shape(teacher, student, "kl_divergence_tempered");
  const std::size_t c = teacher.cols();
  std::vector<double> out(teacher.rows());
  std::vector<double> st(c), ss(c), lt(c), ls(c);
  for (std::size_t i = 0; i < teacher.rows(); ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      st[j] = teacher(i, j) / temperature;
      ss[j] = student(i, j) / temperature;
    }
    log_softmax_row(st, lt);
    log_softmax_row(ss, ls);
    double kl = 0.0;
    for (std::size_t j = 0; j < c; ++j) kl += std::exp(lt[j]) * (lt[j] - ls[j]);
    out[i] = std::max(kl, 0.0);
  }
  return out;
}

LossResult kl_divergence_tempered(const Tensor& teacher, const Tensor& student, double temperature,
                                  std::span<const double> weights) {
  check_temperature(temperature);
  require_same_shape(teacher, student, "kl_divergence_tempered");
  if (!weights.empty() && weights.size() != teacher.rows())
    throw DimensionError("kl_divergence_tempered: weight count does not match batch");
  const std::size_t n = teacher.rows();
  const std::size_t c = teacher.cols();
  LossResult r{0.0, Tensor(n, c)};
  if (n == 0) return r;
  const std::vector<double> kl = kl_per_example(teacher, student, temperature);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> pt(c), ps(c);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w == 0.0) continue;
    r.loss += w * kl[i];
    for (std::size_t j = 0; j < c; ++j) {
      pt[j] = teacher(i, j) / temperature;
      ps[j] = student(i, j) / temperature;
    }
    softmax_inplace(pt);
    softmax_inplace(ps);
    auto g = r.grad.row(i);
    for (std::size_t j = 0; j < c; ++j) g[j] = w * inv_n * (ps[j] - pt[j]) / temperature;
  }
  r.loss *= inv_n;
  return r;
}

}  // namespace gatefuse
