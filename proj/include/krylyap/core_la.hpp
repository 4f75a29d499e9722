#pragma once

#include <span>
#include <vector>

#include "krylyap/dense_matrix.hpp"

// Dense kernels for the projected problem: economy QR, band reduction of a
// symmetric block tridiagonal matrix to tridiagonal form tracking only a few
// rows of the transformation, an implicit QL tridiagonal eigensolver and the
// truncated low-rank factorizations used at convergence.
namespace krylyap {

inline constexpr double kRankTol = 1e-12;
inline constexpr double kTruncationEps = 1e-12;

// Symmetric block tridiagonal matrix with square blocks of size `block_size`.
// Only the diagonal blocks and the blocks below the diagonal are stored; the
// block above the diagonal is the transpose of the one below.
class BlockTridiagonal {
 public:
  BlockTridiagonal() = default;
  explicit BlockTridiagonal(index_t block_size) : block_size_(block_size) {}
  BlockTridiagonal(std::vector<DenseMatrix> diag, std::vector<DenseMatrix> offdiag);

  // Appends a diagonal block; from the second block on, `below` is the block
  // coupling the new block to the previous one (row = new, col = previous).
  void append(DenseMatrix diag);
  void append(DenseMatrix below, DenseMatrix diag);

  index_t block_size() const noexcept { return block_size_; }
  index_t num_blocks() const noexcept { return diag_.size(); }
  index_t dim() const noexcept { return block_size_ * diag_.size(); }

  const DenseMatrix& diag(index_t i) const { return diag_.at(i); }
  // Block (i + 1, i).
  const DenseMatrix& offdiag(index_t i) const { return offdiag_.at(i); }
  DenseMatrix& diag(index_t i) { return diag_.at(i); }
  DenseMatrix& offdiag(index_t i) { return offdiag_.at(i); }

  // Leading principal block submatrix with the first `blocks` blocks.
  BlockTridiagonal leading(index_t blocks) const;

  // Entry (i, j) of the implied full matrix.
  double entry(index_t i, index_t j) const;
  DenseMatrix to_dense() const;
  double frobenius_norm() const;

 private:
  index_t block_size_ = 0;
  std::vector<DenseMatrix> diag_;
  std::vector<DenseMatrix> offdiag_;
};

struct QrResult {
  DenseMatrix q;  // n x k, orthonormal columns
  DenseMatrix r;  // k x k upper triangular, nonnegative diagonal
  bool rank_deficient = false;
  // min_i |R_ii| / ||W||_F (0 for a zero input).
  double min_pivot_ratio = 0.0;
};

// Householder economy QR. Column j of Q and R depend only on columns 0..j of
// W, bit for bit, so a QR of the leading columns reproduces the leading part
// of the QR of the whole block.
QrResult economy_qr(const DenseMatrix& w, double rank_tol = kRankTol);

struct Tridiagonal {
  std::vector<double> diag;
  std::vector<double> offdiag;  // offdiag[i] couples i and i + 1
};

struct BandReduction {
  Tridiagonal f;
  // Rows of the orthogonal P (P^T T P = F) selected by `rows`, as a
  // rows.size() x dim matrix.
  DenseMatrix tracked;
};

// Reduces T to tridiagonal form with Givens bulge chasing, updating only the
// requested rows of the accumulated transformation.
BandReduction band_tridiagonalize_rows(const BlockTridiagonal& t, std::span<const index_t> rows);

struct BandTridiagonalization {
  Tridiagonal f;
  DenseMatrix p_first;  // first block_size rows of P
  DenseMatrix p_last;   // last block_size rows of P
};
BandTridiagonalization band_tridiagonalize(const BlockTridiagonal& t);

struct TridiagonalEigen {
  std::vector<double> eigenvalues;  // ascending
  DenseMatrix vectors;              // k x k, column j belongs to eigenvalue j
};

// Eigendecomposition of a symmetric tridiagonal matrix by implicit QL with
// Wilkinson-type shifts. Column signs are fixed so the entry of largest
// magnitude is positive. Throws ConvergenceError after 30 iterations on one
// eigenvalue.
TridiagonalEigen sym_tridiag_eig(std::span<const double> diag, std::span<const double> offdiag);

// Same iteration, but the rotations are applied to the columns of `z` (r x k)
// instead of an identity: on return z holds Z * G with columns sorted like the
// returned ascending eigenvalues. With z = selected rows of P this yields the
// same rows of P * G at O(r k) cost per sweep.
std::vector<double> tridiag_eig_apply(std::span<const double> diag, std::span<const double> offdiag,
                                      DenseMatrix& z);

struct PartialSpectral {
  std::vector<double> eigenvalues;  // ascending
  DenseMatrix first_rows;           // E_1^T Q, block_size x dim
  DenseMatrix last_rows;            // E_m^T Q, block_size x dim
};

PartialSpectral partial_eig_blocktridiag(const BlockTridiagonal& t);

struct SymmetricEigen {
  std::vector<double> eigenvalues;  // ascending
  DenseMatrix vectors;
};

// Full eigendecomposition of a block tridiagonal matrix through the same band
// reduction, tracking every row. O(dim^3); used once at convergence.
SymmetricEigen full_eig_blocktridiag(const BlockTridiagonal& t);

// Dense symmetric eigendecomposition (Householder tridiagonalization + QL).
SymmetricEigen sym_eig(const DenseMatrix& a);

struct TruncatedFactor {
  DenseMatrix factor;          // rows x t
  double discarded_mass = 0.0; // Frobenius norm of the dropped spectral part
};

// Y ~= F F^T from the eigendecomposition of symmetric PSD Y, dropping the
// smallest eigenvalues while their Frobenius mass stays <= eps.
TruncatedFactor truncated_spd_factor(const DenseMatrix& y, double eps = kTruncationEps);

struct TruncatedSvdFactor {
  DenseMatrix left;   // U_1 Sigma_1^{1/2}
  DenseMatrix right;  // V_1 Sigma_1^{1/2}
  double discarded_mass = 0.0;
};

// Y ~= L R^T from a one-sided Jacobi SVD, dropping the tail of singular
// values whose Frobenius mass is <= eps.
TruncatedSvdFactor truncated_svd_factor(const DenseMatrix& y, double eps = kTruncationEps);

struct Svd {
  DenseMatrix u;                  // rows x p
  std::vector<double> singular;   // descending, p = min(rows, cols)
  DenseMatrix v;                  // cols x p
};
Svd jacobi_svd(const DenseMatrix& y);

}  // namespace krylyap
