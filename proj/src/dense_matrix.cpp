#include "krylyap/dense_matrix.hpp"

#include <algorithm>
#include <cmath>

#include "krylyap/errors.hpp"
#include "krylyap/kernels.hpp"

namespace krylyap {

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.assign(rows_ * cols_, 0.0);
  index_t i = 0;
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged initializer for DenseMatrix");
    index_t j = 0;
    for (double v : r) (*this)(i, j++) = v;
    ++i;
  }
}

DenseMatrix DenseMatrix::identity(index_t n) { return identity(n, n); }

DenseMatrix DenseMatrix::identity(index_t rows, index_t cols) {
  DenseMatrix m(rows, cols);
  for (index_t i = 0; i < std::min(rows, cols); ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
  DenseMatrix m(d.size(), d.size());
  for (index_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

DenseMatrix DenseMatrix::column(std::span<const double> v) {
  DenseMatrix m(v.size(), 1);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

DenseMatrix DenseMatrix::block(index_t r0, index_t c0, index_t nr, index_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) throw DimensionError("block out of range");
  DenseMatrix b(nr, nc);
  for (index_t j = 0; j < nc; ++j) std::copy_n(col(c0 + j) + r0, nr, b.col(j));
  return b;
}

void DenseMatrix::set_block(index_t r0, index_t c0, const DenseMatrix& b) {
  if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_) throw DimensionError("set_block out of range");
  for (index_t j = 0; j < b.cols(); ++j) std::copy_n(b.col(j), b.rows(), col(c0 + j) + r0);
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (index_t j = 0; j < cols_; ++j)
    for (index_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
  return t;
}

double DenseMatrix::frobenius_norm() const {
  // Scaled accumulation so tiny and huge entries do not under/overflow.
  double scale = 0.0, ssq = 1.0;
  for (double v : data_) {
    if (v == 0.0) continue;
    const double a = std::abs(v);
    if (scale < a) {
      ssq = 1.0 + ssq * (scale / a) * (scale / a);
      scale = a;
    } else {
      ssq += (a / scale) * (a / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

double DenseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw DimensionError("operator+= shape mismatch");
  for (index_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw DimensionError("operator-= shape mismatch");
  for (index_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double a) {
  for (double& v : data_) v *= a;
  return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double a, DenseMatrix m) { return m *= a; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  DenseMatrix c(a.rows(), b.cols());
  kernels::gemm_nn(a, b, c);
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("matmul_tn: row counts differ");
  DenseMatrix c(a.cols(), b.cols());
  kernels::gemm_tn(a, b, c);
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  return matmul(a, b.transpose());
}

DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("hcat: row counts differ");
  DenseMatrix c(a.rows(), a.cols() + b.cols());
  c.set_block(0, 0, a);
  c.set_block(0, a.cols(), b);
  return c;
}

DenseMatrix vcat(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("vcat: column counts differ");
  DenseMatrix c(a.rows() + b.rows(), a.cols());
  c.set_block(0, 0, a);
  c.set_block(a.rows(), 0, b);
  return c;
}

DenseMatrix solve_upper_right(const DenseMatrix& b, const DenseMatrix& u) {
  const index_t k = u.rows();
  if (u.cols() != k || b.cols() != k) throw DimensionError("solve_upper_right: shape mismatch");
  DenseMatrix x = b;
  // Column j of X: x_j = (b_j - sum_{p<j} x_p u_pj) / u_jj
  for (index_t j = 0; j < k; ++j) {
    for (index_t p = 0; p < j; ++p) {
      const double f = u(p, j);
      if (f == 0.0) continue;
      for (index_t i = 0; i < x.rows(); ++i) x(i, j) -= x(i, p) * f;
    }
    const double d = u(j, j);
    for (index_t i = 0; i < x.rows(); ++i) x(i, j) /= d;
  }
  return x;
}

}  // namespace krylyap
