#include "gatefuse/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "gatefuse/errors.hpp"
#include "gatefuse/kernels.hpp"

namespace gatefuse {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_)
    throw DimensionError("tensor " + shape_string() + " given " + std::to_string(values_.size()) +
                         " values");
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged rows in Tensor::from_rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(v));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const {
  Tensor out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw IndexError("row index out of range in gather_rows");
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                out.values_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
  const auto& k = kernels::active();
  Tensor c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* crow = c.row(i).data();
    const auto arow = a.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      // Hashed bag-of-words inputs are mostly zeros.
      if (arow[p] == 0.0) continue;
      k.axpy(n, arow[p], b.row(p).data(), crow);
    }
  }
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols())
    throw DimensionError("matmul_nt shape mismatch: " + a.shape_string() + " x " +
                         b.shape_string() + "^T");
  const auto& k = kernels::active();
  Tensor c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      c(i, j) = k.dot(a.cols(), a.row(i).data(), b.row(j).data());
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows())
    throw DimensionError("matmul_tn shape mismatch: " + a.shape_string() + "^T x " +
                         b.shape_string());
  const auto& k = kernels::active();
  Tensor c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto arow = a.row(r);
    const double* brow = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      if (arow[i] == 0.0) continue;
      k.axpy(n, arow[i], brow, c.row(i).data());
    }
  }
  return c;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericDomainError(std::string(what) + ": non-finite value");
}

void softmax_inplace(std::span<double> row) {
  if (row.empty()) return;
  const double m = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (double& v : row) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : row) v /= z;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p = logits;
  for (std::size_t i = 0; i < p.rows(); ++i) softmax_inplace(p.row(i));
  return p;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace gatefuse
