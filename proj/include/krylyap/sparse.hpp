#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "krylyap/dense_matrix.hpp"

namespace krylyap {

struct Triplet {
  index_t row;
  index_t col;
  double value;
};

// Symmetric sparse matrix in CSR form holding both triangles. Symmetry is
// checked bit for bit when the matrix is built; nothing is symmetrized.
class SparseSymmetric {
 public:
  SparseSymmetric() = default;

  // Full pattern. Duplicate entries are summed before the symmetry check.
  static SparseSymmetric from_triplets(index_t n, std::span<const Triplet> entries);
  // Lower (or upper) triangle only; the other triangle is mirrored.
  static SparseSymmetric from_triangle(index_t n, std::span<const Triplet> entries);

  index_t n() const noexcept { return n_; }
  index_t nnz() const noexcept { return values_.size(); }
  std::span<const index_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const index_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  // Entry (i, j), zero when not stored.
  double value(index_t i, index_t j) const;
  DenseMatrix to_dense() const;
  SparseSymmetric scaled(double a) const;
  double frobenius_norm() const;
  // Stored entries with row >= col, in row order.
  std::vector<Triplet> lower_triplets() const;

 private:
  index_t n_ = 0;
  std::vector<index_t> row_ptr_{0};
  std::vector<index_t> col_idx_;
  std::vector<double> values_;
};

// Y = A V, per column.
DenseMatrix multiply(const SparseSymmetric& a, const DenseMatrix& v);

// LDL^T of a symmetric sparse matrix with a fill-reducing (AMD) ordering.
class SparseFactorization {
 public:
  // Throws IndefiniteError if a pivot is numerically zero.
  explicit SparseFactorization(const SparseSymmetric& a);
  ~SparseFactorization();
  SparseFactorization(SparseFactorization&&) noexcept;
  SparseFactorization& operator=(SparseFactorization&&) noexcept;

  index_t n() const noexcept { return n_; }
  // Solves A Y = V.
  DenseMatrix solve(const DenseMatrix& v) const;

 private:
  struct Impl;
  index_t n_;
  std::unique_ptr<Impl> impl_;
};

DenseMatrix block_solve(const SparseFactorization& fact, const DenseMatrix& v);

// Symmetric operator acting on n x k blocks.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual index_t dim() const = 0;
  virtual void apply(const DenseMatrix& v, DenseMatrix& y) const = 0;
  virtual bool has_inverse() const { return false; }
  // Solves A Y = V. Throws Error when has_inverse() is false.
  virtual void apply_inverse(const DenseMatrix& v, DenseMatrix& y) const;
  // Whether the operator is meant to be symmetric negative definite.
  virtual bool negative_definite() const { return true; }
};

DenseMatrix block_apply(const LinearOperator& op, const DenseMatrix& v);
DenseMatrix block_apply_inverse(const LinearOperator& op, const DenseMatrix& v);

class SparseOperator final : public LinearOperator {
 public:
  explicit SparseOperator(std::shared_ptr<const SparseSymmetric> a, bool negative_definite = true);
  explicit SparseOperator(SparseSymmetric a, bool negative_definite = true);

  // Factorizes A so that apply_inverse becomes available.
  void enable_inverse();

  index_t dim() const override { return a_->n(); }
  void apply(const DenseMatrix& v, DenseMatrix& y) const override;
  bool has_inverse() const override { return fact_ != nullptr; }
  void apply_inverse(const DenseMatrix& v, DenseMatrix& y) const override;
  bool negative_definite() const override { return negative_definite_; }

  const SparseSymmetric& matrix() const { return *a_; }

 private:
  std::shared_ptr<const SparseSymmetric> a_;
  std::shared_ptr<const SparseFactorization> fact_;
  bool negative_definite_;
};

// diag(d); the inverse is available whenever no entry is zero.
class DiagonalOperator final : public LinearOperator {
 public:
  explicit DiagonalOperator(std::vector<double> d);
  static DiagonalOperator identity(index_t n) { return DiagonalOperator(std::vector<double>(n, 1.0)); }

  index_t dim() const override { return d_.size(); }
  void apply(const DenseMatrix& v, DenseMatrix& y) const override;
  bool has_inverse() const override;
  void apply_inverse(const DenseMatrix& v, DenseMatrix& y) const override;
  bool negative_definite() const override;

 private:
  std::vector<double> d_;
};

// Small dense symmetric operator. The inverse uses a dense LDL^T.
class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(DenseMatrix a);
  ~DenseOperator() override;

  index_t dim() const override { return a_.rows(); }
  void apply(const DenseMatrix& v, DenseMatrix& y) const override;
  bool has_inverse() const override { return true; }
  void apply_inverse(const DenseMatrix& v, DenseMatrix& y) const override;

  const DenseMatrix& matrix() const { return a_; }

 private:
  struct Impl;
  DenseMatrix a_;
  std::unique_ptr<Impl> impl_;
};

// For E = L L^T symmetric positive definite, the operator L^{-1} A L^{-T},
// applied lazily. A X E + E X A + C C^T = 0 becomes a standard Lyapunov
// equation in X~ = L^T X L with right-hand side factor L^{-1} C, and a factor
// Z~ of X~ maps back to Z = L^{-T} Z~.
class CholeskyTransformOperator final : public LinearOperator {
 public:
  // Throws IndefiniteError when E is not positive definite.
  CholeskyTransformOperator(const SparseSymmetric& e, std::shared_ptr<const SparseSymmetric> a);
  ~CholeskyTransformOperator() override;

  // Makes apply_inverse available: (L^{-1} A L^{-T})^{-1} = L^T A^{-1} L.
  void enable_inverse();

  index_t dim() const override;
  void apply(const DenseMatrix& v, DenseMatrix& y) const override;
  bool has_inverse() const override { return a_fact_ != nullptr; }
  void apply_inverse(const DenseMatrix& v, DenseMatrix& y) const override;

  DenseMatrix transform_rhs(const DenseMatrix& c) const;       // L^{-1} C
  DenseMatrix recover_factor(const DenseMatrix& z) const;      // L^{-T} Z
  DenseMatrix apply_l(const DenseMatrix& v) const;              // L V
  DenseMatrix apply_lt(const DenseMatrix& v) const;             // L^T V

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::shared_ptr<const SparseSymmetric> a_;
  std::shared_ptr<const SparseFactorization> a_fact_;
};

std::unique_ptr<CholeskyTransformOperator> cholesky_transform(const SparseSymmetric& e,
                                                              std::shared_ptr<const SparseSymmetric> a);

// Largest Ritz value after `steps` Lanczos steps with full
// reorthogonalization from a seeded random start. Diagnostic for definiteness.
double estimate_largest_eigenvalue(const LinearOperator& op, index_t steps = 60, std::uint64_t seed = 1);

}  // namespace krylyap
