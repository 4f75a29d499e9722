#include "krylyap/sparse.hpp"

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "krylyap/core_la.hpp"
#include "krylyap/errors.hpp"
#include "krylyap/kernels.hpp"

namespace krylyap {

namespace {

using EigenSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using Map = Eigen::Map<Eigen::MatrixXd>;

ConstMap as_eigen(const DenseMatrix& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

DenseMatrix from_eigen(const Eigen::MatrixXd& e) {
  DenseMatrix m(static_cast<index_t>(e.rows()), static_cast<index_t>(e.cols()));
  Map(m.data(), e.rows(), e.cols()) = e;
  return m;
}

EigenSparse to_eigen_sparse(const SparseSymmetric& a) {
  std::vector<Eigen::Triplet<double, int>> t;
  t.reserve(a.nnz());
  const auto ptr = a.row_ptr();
  const auto idx = a.col_idx();
  const auto val = a.values();
  for (index_t i = 0; i < a.n(); ++i)
    for (index_t p = ptr[i]; p < ptr[i + 1]; ++p)
      t.emplace_back(static_cast<int>(i), static_cast<int>(idx[p]), val[p]);
  const int n = static_cast<int>(a.n());
  EigenSparse m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

void check_rows(const char* what, index_t n, const DenseMatrix& v) {
  if (v.rows() != n) {
    std::ostringstream os;
    os << what << ": operator has dimension " << n << " but block has " << v.rows() << " rows";
    throw DimensionError(os.str());
  }
}

void check_pivots(const Eigen::VectorXd& d, const char* what) {
  const double big = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (!(std::abs(d(i)) > 1e-14 * big)) {
      std::ostringstream os;
      os << what << ": numerically zero pivot at position " << i << " (matrix singular)";
      throw IndefiniteError(os.str());
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// SparseSymmetric

SparseSymmetric SparseSymmetric::from_triplets(index_t n, std::span<const Triplet> entries) {
  std::vector<Triplet> t(entries.begin(), entries.end());
  for (const Triplet& e : t) {
    if (e.row >= n || e.col >= n) throw DimensionError("sparse entry outside the matrix");
    if (!std::isfinite(e.value)) throw FormatError("non-finite sparse entry");
  }
  std::stable_sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseSymmetric s;
  s.n_ = n;
  s.row_ptr_.assign(n + 1, 0);
  for (index_t p = 0; p < t.size();) {
    index_t q = p;
    double v = 0.0;
    while (q < t.size() && t[q].row == t[p].row && t[q].col == t[p].col) v += t[q++].value;
    if (v != 0.0) {
      s.col_idx_.push_back(t[p].col);
      s.values_.push_back(v);
      ++s.row_ptr_[t[p].row + 1];
    }
    p = q;
  }
  for (index_t i = 0; i < n; ++i) s.row_ptr_[i + 1] += s.row_ptr_[i];

  for (index_t i = 0; i < n; ++i) {
    for (index_t p = s.row_ptr_[i]; p < s.row_ptr_[i + 1]; ++p) {
      const index_t j = s.col_idx_[p];
      if (j <= i) continue;
      const double mirror = s.value(j, i);
      if (mirror != s.values_[p]) {
        std::ostringstream os;
        os.precision(17);
        os << "matrix is not symmetric: entry (" << i + 1 << ", " << j + 1 << ") = " << s.values_[p]
           << " but entry (" << j + 1 << ", " << i + 1 << ") = " << mirror << " (1-based)";
        throw FormatError(os.str());
      }
    }
    // Entries below the diagonal without a partner above.
    for (index_t p = s.row_ptr_[i]; p < s.row_ptr_[i + 1]; ++p) {
      const index_t j = s.col_idx_[p];
      if (j < i && s.value(j, i) == 0.0) {
        std::ostringstream os;
        os.precision(17);
        os << "matrix is not symmetric: entry (" << i + 1 << ", " << j + 1 << ") = " << s.values_[p]
           << " but entry (" << j + 1 << ", " << i + 1 << ") is absent (1-based)";
        throw FormatError(os.str());
      }
    }
  }
  return s;
}

SparseSymmetric SparseSymmetric::from_triangle(index_t n, std::span<const Triplet> entries) {
  std::vector<Triplet> full;
  full.reserve(2 * entries.size());
  bool lower = false, upper = false;
  for (const Triplet& e : entries) {
    lower |= e.row > e.col;
    upper |= e.row < e.col;
    full.push_back(e);
    if (e.row != e.col) full.push_back({e.col, e.row, e.value});
  }
  if (lower && upper) throw FormatError("triangle input has entries on both sides of the diagonal");
  return from_triplets(n, full);
}

double SparseSymmetric::value(index_t i, index_t j) const {
  const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  return (it != last && *it == j) ? values_[static_cast<index_t>(it - col_idx_.begin())] : 0.0;
}

DenseMatrix SparseSymmetric::to_dense() const {
  DenseMatrix d(n_, n_);
  for (index_t i = 0; i < n_; ++i)
    for (index_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) d(i, col_idx_[p]) = values_[p];
  return d;
}

SparseSymmetric SparseSymmetric::scaled(double a) const {
  SparseSymmetric s = *this;
  for (double& v : s.values_) v *= a;
  return s;
}

double SparseSymmetric::frobenius_norm() const {
  return DenseMatrix::column(values_).frobenius_norm();
}

std::vector<Triplet> SparseSymmetric::lower_triplets() const {
  std::vector<Triplet> t;
  for (index_t i = 0; i < n_; ++i)
    for (index_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
      if (col_idx_[p] <= i) t.push_back({i, col_idx_[p], values_[p]});
  return t;
}

DenseMatrix multiply(const SparseSymmetric& a, const DenseMatrix& v) {
  check_rows("multiply", a.n(), v);
  DenseMatrix y(v.rows(), v.cols());
  kernels::csr_apply(a.row_ptr(), a.col_idx(), a.values(), v, y);
  return y;
}

// ---------------------------------------------------------------------------
// SparseFactorization

struct SparseFactorization::Impl {
  Eigen::SimplicialLDLT<EigenSparse, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
};

SparseFactorization::SparseFactorization(const SparseSymmetric& a) : n_(a.n()), impl_(std::make_unique<Impl>()) {
  impl_->ldlt.compute(to_eigen_sparse(a));
  if (impl_->ldlt.info() != Eigen::Success) throw IndefiniteError("sparse LDL^T factorization failed");
  check_pivots(impl_->ldlt.vectorD(), "sparse LDL^T factorization");
}

SparseFactorization::~SparseFactorization() = default;
SparseFactorization::SparseFactorization(SparseFactorization&&) noexcept = default;
SparseFactorization& SparseFactorization::operator=(SparseFactorization&&) noexcept = default;

DenseMatrix SparseFactorization::solve(const DenseMatrix& v) const {
  check_rows("block_solve", n_, v);
  return from_eigen(impl_->ldlt.solve(as_eigen(v)));
}

DenseMatrix block_solve(const SparseFactorization& fact, const DenseMatrix& v) { return fact.solve(v); }

// ---------------------------------------------------------------------------
// Operators

void LinearOperator::apply_inverse(const DenseMatrix&, DenseMatrix&) const {
  throw Error("operator has no inverse-apply (factorization not enabled)");
}

DenseMatrix block_apply(const LinearOperator& op, const DenseMatrix& v) {
  check_rows("block_apply", op.dim(), v);
  DenseMatrix y(v.rows(), v.cols());
  op.apply(v, y);
  return y;
}

DenseMatrix block_apply_inverse(const LinearOperator& op, const DenseMatrix& v) {
  check_rows("block_apply_inverse", op.dim(), v);
  DenseMatrix y(v.rows(), v.cols());
  op.apply_inverse(v, y);
  return y;
}

SparseOperator::SparseOperator(std::shared_ptr<const SparseSymmetric> a, bool negative_definite)
    : a_(std::move(a)), negative_definite_(negative_definite) {}

SparseOperator::SparseOperator(SparseSymmetric a, bool negative_definite)
    : SparseOperator(std::make_shared<const SparseSymmetric>(std::move(a)), negative_definite) {}

void SparseOperator::enable_inverse() {
  if (!fact_) fact_ = std::make_shared<const SparseFactorization>(*a_);
}

void SparseOperator::apply(const DenseMatrix& v, DenseMatrix& y) const {
  check_rows("SparseOperator::apply", a_->n(), v);
  kernels::csr_apply(a_->row_ptr(), a_->col_idx(), a_->values(), v, y);
}

void SparseOperator::apply_inverse(const DenseMatrix& v, DenseMatrix& y) const {
  if (!fact_) LinearOperator::apply_inverse(v, y);
  y = fact_->solve(v);
}

DiagonalOperator::DiagonalOperator(std::vector<double> d) : d_(std::move(d)) {}

void DiagonalOperator::apply(const DenseMatrix& v, DenseMatrix& y) const {
  check_rows("DiagonalOperator::apply", d_.size(), v);
  for (index_t j = 0; j < v.cols(); ++j)
    for (index_t i = 0; i < v.rows(); ++i) y(i, j) = d_[i] * v(i, j);
}

bool DiagonalOperator::has_inverse() const {
  return std::none_of(d_.begin(), d_.end(), [](double x) { return x == 0.0; });
}

void DiagonalOperator::apply_inverse(const DenseMatrix& v, DenseMatrix& y) const {
  if (!has_inverse()) throw IndefiniteError("diagonal operator has a zero entry");
  check_rows("DiagonalOperator::apply_inverse", d_.size(), v);
  for (index_t j = 0; j < v.cols(); ++j)
    for (index_t i = 0; i < v.rows(); ++i) y(i, j) = v(i, j) / d_[i];
}

bool DiagonalOperator::negative_definite() const {
  return std::all_of(d_.begin(), d_.end(), [](double x) { return x < 0.0; });
}

struct DenseOperator::Impl {
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
};

DenseOperator::DenseOperator(DenseMatrix a) : a_(std::move(a)), impl_(std::make_unique<Impl>()) {
  if (a_.rows() != a_.cols()) throw DimensionError("DenseOperator needs a square matrix");
  if (!(a_ == a_.transpose())) throw FormatError("DenseOperator needs a symmetric matrix");
  impl_->ldlt.compute(as_eigen(a_));
}

DenseOperator::~DenseOperator() = default;

void DenseOperator::apply(const DenseMatrix& v, DenseMatrix& y) const {
  check_rows("DenseOperator::apply", a_.rows(), v);
  kernels::gemm_nn(a_, v, y);
}

void DenseOperator::apply_inverse(const DenseMatrix& v, DenseMatrix& y) const {
  check_rows("DenseOperator::apply_inverse", a_.rows(), v);
  check_pivots(impl_->ldlt.vectorD(), "dense LDL^T");
  y = from_eigen(impl_->ldlt.solve(as_eigen(v)));
}

// ---------------------------------------------------------------------------
// Cholesky transform

struct CholeskyTransformOperator::Impl {
  // P E P^T = L L^T; the factor of E itself is P^T L.
  EigenSparse l;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p, pinv;
  index_t n;

  Eigen::MatrixXd lt_inv(const Eigen::MatrixXd& v) const {  // (P^T L)^{-T} v = P^T L^{-T} v
    return pinv * l.transpose().triangularView<Eigen::Upper>().solve(v);
  }
  Eigen::MatrixXd l_inv(const Eigen::MatrixXd& v) const {  // (P^T L)^{-1} v = L^{-1} P v
    return l.triangularView<Eigen::Lower>().solve(p * v);
  }
};

CholeskyTransformOperator::CholeskyTransformOperator(const SparseSymmetric& e,
                                                     std::shared_ptr<const SparseSymmetric> a)
    : impl_(std::make_unique<Impl>()), a_(std::move(a)) {
  if (e.n() != a_->n()) throw DimensionError("cholesky_transform: E and A differ in size");
  Eigen::SimplicialLLT<EigenSparse, Eigen::Lower, Eigen::AMDOrdering<int>> llt(to_eigen_sparse(e));
  if (llt.info() != Eigen::Success) throw IndefiniteError("cholesky_transform: E is not positive definite");
  impl_->l = llt.matrixL();
  impl_->p = llt.permutationP();
  impl_->pinv = llt.permutationPinv();
  impl_->n = e.n();
  for (int i = 0; i < impl_->l.rows(); ++i)
    if (!(impl_->l.coeff(i, i) > 0.0)) throw IndefiniteError("cholesky_transform: E is not positive definite");
}

CholeskyTransformOperator::~CholeskyTransformOperator() = default;

void CholeskyTransformOperator::enable_inverse() {
  if (!a_fact_) a_fact_ = std::make_shared<const SparseFactorization>(*a_);
}

index_t CholeskyTransformOperator::dim() const { return impl_->n; }

void CholeskyTransformOperator::apply(const DenseMatrix& v, DenseMatrix& y) const {
  check_rows("CholeskyTransformOperator::apply", dim(), v);
  const DenseMatrix w = from_eigen(impl_->lt_inv(as_eigen(v)));
  const DenseMatrix aw = multiply(*a_, w);
  y = from_eigen(impl_->l_inv(as_eigen(aw)));
}

void CholeskyTransformOperator::apply_inverse(const DenseMatrix& v, DenseMatrix& y) const {
  if (!a_fact_) LinearOperator::apply_inverse(v, y);
  check_rows("CholeskyTransformOperator::apply_inverse", dim(), v);
  y = apply_lt(a_fact_->solve(apply_l(v)));
}

DenseMatrix CholeskyTransformOperator::transform_rhs(const DenseMatrix& c) const {
  check_rows("transform_rhs", dim(), c);
  return from_eigen(impl_->l_inv(as_eigen(c)));
}

DenseMatrix CholeskyTransformOperator::recover_factor(const DenseMatrix& z) const {
  check_rows("recover_factor", dim(), z);
  return from_eigen(impl_->lt_inv(as_eigen(z)));
}

DenseMatrix CholeskyTransformOperator::apply_l(const DenseMatrix& v) const {
  check_rows("apply_l", dim(), v);
  return from_eigen(impl_->pinv * (impl_->l * as_eigen(v)));
}

DenseMatrix CholeskyTransformOperator::apply_lt(const DenseMatrix& v) const {
  check_rows("apply_lt", dim(), v);
  return from_eigen(impl_->l.transpose() * (impl_->p * as_eigen(v)));
}

std::unique_ptr<CholeskyTransformOperator> cholesky_transform(const SparseSymmetric& e,
                                                              std::shared_ptr<const SparseSymmetric> a) {
  return std::make_unique<CholeskyTransformOperator>(e, std::move(a));
}

// ---------------------------------------------------------------------------

double estimate_largest_eigenvalue(const LinearOperator& op, index_t steps, std::uint64_t seed) {
  const index_t n = op.dim();
  steps = std::min(steps, n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix v(n, steps + 1);
  for (index_t i = 0; i < n; ++i) v(i, 0) = u(rng);
  v.set_block(0, 0, (1.0 / v.cols_range(0, 1).frobenius_norm()) * v.cols_range(0, 1));

  std::vector<double> alpha, beta;
  for (index_t k = 0; k < steps; ++k) {
    DenseMatrix w = block_apply(op, v.cols_range(k, 1));
    alpha.push_back(matmul_tn(v.cols_range(k, 1), w)(0, 0));
    const double wnorm = w.frobenius_norm();
    // Full reorthogonalization, twice.
    for (int pass = 0; pass < 2; ++pass) {
      const DenseMatrix basis = v.cols_range(0, k + 1);
      kernels::sub_mul(w, basis, matmul_tn(basis, w));
    }
    const double b = w.frobenius_norm();
    // A collapse to roundoff level means the Krylov space is invariant.
    if (k + 1 == steps || b <= 1e-10 * wnorm) break;
    beta.push_back(b);
    v.set_block(0, k + 1, (1.0 / b) * w);
  }
  const auto eig = sym_tridiag_eig(alpha, std::span<const double>(beta.data(), alpha.size() - 1));
  return eig.eigenvalues.back();
}

}  // namespace krylyap
