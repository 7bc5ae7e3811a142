#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gatefuse {

// Dense row-major 2-D array of doubles.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  void fill(double v);
  bool all_finite() const;
  std::string shape_string() const;

  // Rows picked by index, in the given order.
  Tensor gather_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// a (m x k) * b (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
// a (m x k) * b^T where b is (n x k)
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// a^T * b where a is (k x m), b is (k x n)
Tensor matmul_tn(const Tensor& a, const Tensor& b);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_finite(const Tensor& t, const char* what);

// Row-wise softmax, stabilised by subtracting the row max.
Tensor softmax_rows(const Tensor& logits);
void softmax_inplace(std::span<double> row);

// Index of the largest entry; the lowest index wins ties.
std::size_t argmax(std::span<const double> row);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace gatefuse
