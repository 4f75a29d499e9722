#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace krylyap {

using index_t = std::size_t;

// Column-major dense matrix of doubles. Used both for the small projected
// quantities (gamma, tau, eigenvector row slices, reduced solutions) and for
// tall n x k blocks of basis vectors.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(index_t rows, index_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  // Row-major nested initializer, convenient for small literals in tests:
  // DenseMatrix{{1, 2}, {3, 4}}.
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(index_t n);
  static DenseMatrix identity(index_t rows, index_t cols);
  static DenseMatrix diagonal(std::span<const double> d);
  // Single column from a vector.
  static DenseMatrix column(std::span<const double> v);

  index_t rows() const noexcept { return rows_; }
  index_t cols() const noexcept { return cols_; }
  index_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(index_t i, index_t j) noexcept { return data_[i + j * rows_]; }
  double operator()(index_t i, index_t j) const noexcept { return data_[i + j * rows_]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  double* col(index_t j) noexcept { return data_.data() + j * rows_; }
  const double* col(index_t j) const noexcept { return data_.data() + j * rows_; }
  std::span<double> col_span(index_t j) noexcept { return {col(j), rows_}; }
  std::span<const double> col_span(index_t j) const noexcept { return {col(j), rows_}; }

  DenseMatrix block(index_t r0, index_t c0, index_t nr, index_t nc) const;
  DenseMatrix cols_range(index_t c0, index_t nc) const { return block(0, c0, rows_, nc); }
  DenseMatrix rows_range(index_t r0, index_t nr) const { return block(r0, 0, nr, cols_); }
  void set_block(index_t r0, index_t c0, const DenseMatrix& b);

  DenseMatrix transpose() const;
  double frobenius_norm() const;
  double max_abs() const;
  bool all_finite() const;

  DenseMatrix& operator+=(const DenseMatrix& o);
  DenseMatrix& operator-=(const DenseMatrix& o);
  DenseMatrix& operator*=(double a);

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  index_t rows_ = 0;
  index_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double a, DenseMatrix m);

// C = A * B, C = A^T * B, C = A * B^T. Small and moderate sizes; the
// tall-skinny products used on basis blocks live in kernels.hpp.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

// [a, b] and [a; b].
DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix vcat(const DenseMatrix& a, const DenseMatrix& b);

// Solve X * U = B for X with U upper triangular (B is r x k, U is k x k).
DenseMatrix solve_upper_right(const DenseMatrix& b, const DenseMatrix& u);

}  // namespace krylyap
