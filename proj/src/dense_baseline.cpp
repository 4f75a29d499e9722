#include "krylyap/dense_baseline.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>

#include "krylyap/errors.hpp"

namespace krylyap {

namespace {

constexpr double kDenominatorTol = 1e-14;
constexpr double kPlugBackTol = 1e-6;

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Y~_ij = -S_ij / (p_i + q_j).
DenseMatrix divide_by_sums(const DenseMatrix& s, const std::vector<double>& p, const std::vector<double>& q) {
  const double guard = kDenominatorTol * std::max(max_abs(p), max_abs(q));
  DenseMatrix y(s.rows(), s.cols());
  for (index_t j = 0; j < s.cols(); ++j)
    for (index_t i = 0; i < s.rows(); ++i) {
      const double den = p[i] + q[j];
      if (!(std::abs(den) >= guard))
        throw IndefiniteError("singular denominator in the reduced equation: eigenvalue sum " +
                              std::to_string(den) + " is numerically zero");
      y(i, j) = -s(i, j) / den;
    }
  return y;
}

void symmetrize(DenseMatrix& y) {
  for (index_t j = 0; j < y.cols(); ++j)
    for (index_t i = j + 1; i < y.rows(); ++i) {
      const double v = 0.5 * (y(i, j) + y(j, i));
      y(i, j) = v;
      y(j, i) = v;
    }
}

// E_1^T Q for a block tridiagonal T whose first block has gamma.rows() rows.
DenseMatrix leading_rows(const DenseMatrix& q, index_t l) { return q.rows_range(0, l); }

Eigen::Map<const Eigen::MatrixXd> view(const DenseMatrix& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

DenseMatrix from_eigen(const Eigen::MatrixXd& e) {
  DenseMatrix m(static_cast<index_t>(e.rows()), static_cast<index_t>(e.cols()));
  Eigen::Map<Eigen::MatrixXd>(m.data(), e.rows(), e.cols()) = e;
  return m;
}

void check_sylvester_dims(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c1, const DenseMatrix& c2) {
  if (a.rows() != a.cols() || b.rows() != b.cols()) throw DimensionError("kronecker_solve: A and B must be square");
  if (c1.rows() != a.rows() || c2.rows() != b.rows() || c1.cols() != c2.cols())
    throw DimensionError("kronecker_solve: C1, C2 do not match A, B");
  if (a.rows() * b.rows() > kKroneckerLimit)
    throw DimensionError("kronecker_solve: n1 n2 = " + std::to_string(a.rows() * b.rows()) + " exceeds " +
                         std::to_string(kKroneckerLimit));
}

// Relative plug-back residual; a singular operator shows up here.
void check_solution(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c,
                    const Eigen::MatrixXd& x) {
  const double res = (a * x + x * b + c).norm();
  const double ref = c.norm();
  if (!std::isfinite(res) || !x.allFinite() || res > kPlugBackTol * ref)
    throw IndefiniteError("kronecker_solve: the Sylvester operator is singular (plug-back residual " +
                          std::to_string(ref > 0 ? res / ref : res) + ")");
}

}  // namespace

ReducedSolution solve_reduced_lyapunov(const BlockTridiagonal& t, const DenseMatrix& gamma) {
  const SymmetricEigen e = sym_eig(t.to_dense());
  const DenseMatrix a = matmul_tn(leading_rows(e.vectors, gamma.rows()), gamma);
  ReducedSolution out;
  out.y_tilde = divide_by_sums(matmul_nt(a, a), e.eigenvalues, e.eigenvalues);
  out.y = matmul_nt(matmul(e.vectors, out.y_tilde), e.vectors);
  symmetrize(out.y);
  out.left = e.vectors;
  out.right = e.vectors;
  return out;
}

ReducedSolution solve_reduced_sylvester(const BlockTridiagonal& t, const BlockTridiagonal& j,
                                        const DenseMatrix& gamma1, const DenseMatrix& gamma2) {
  const SymmetricEigen et = sym_eig(t.to_dense());
  const SymmetricEigen ej = sym_eig(j.to_dense());
  const DenseMatrix a = matmul_tn(leading_rows(et.vectors, gamma1.rows()), gamma1);
  const DenseMatrix b = matmul_tn(leading_rows(ej.vectors, gamma2.rows()), gamma2);
  ReducedSolution out;
  out.y_tilde = divide_by_sums(matmul_nt(a, b), et.eigenvalues, ej.eigenvalues);
  out.y = matmul_nt(matmul(et.vectors, out.y_tilde), ej.vectors);
  out.left = et.vectors;
  out.right = ej.vectors;
  return out;
}

ReducedSolution solve_reduced_one_sided(const BlockTridiagonal& t, const SymmetricEigen& b_eigen,
                                        const DenseMatrix& gamma1, const DenseMatrix& c2) {
  if (c2.rows() != b_eigen.vectors.rows()) throw DimensionError("solve_reduced_one_sided: C2 does not match B");
  const SymmetricEigen et = sym_eig(t.to_dense());
  const DenseMatrix a = matmul_tn(leading_rows(et.vectors, gamma1.rows()), gamma1);
  const DenseMatrix c = matmul_tn(b_eigen.vectors, c2);
  ReducedSolution out;
  out.y_tilde = divide_by_sums(matmul_nt(a, c), et.eigenvalues, b_eigen.eigenvalues);
  out.y = matmul_nt(matmul(et.vectors, out.y_tilde), b_eigen.vectors);
  out.left = et.vectors;
  out.right = b_eigen.vectors;
  return out;
}

ResidualValue naive_residual_lyapunov(const ReducedSolution& y, const DenseMatrix& tau, double beta) {
  const index_t l = tau.cols();
  const DenseMatrix last = y.y.cols_range(y.y.cols() - l, l);
  const double res = std::sqrt(2.0) * matmul_nt(last, tau).frobenius_norm();
  return {res, res / (beta * beta)};
}

ResidualValue naive_residual_sylvester(const ReducedSolution& y, const DenseMatrix& tau, const DenseMatrix& iota,
                                       double norm) {
  const DenseMatrix top = matmul(tau, y.y.rows_range(y.y.rows() - tau.cols(), tau.cols()));
  const DenseMatrix side = matmul_nt(y.y.cols_range(y.y.cols() - iota.cols(), iota.cols()), iota);
  const double res = std::hypot(top.frobenius_norm(), side.frobenius_norm());
  return {res, res / norm};
}

ResidualValue naive_residual_one_sided(const ReducedSolution& y, const DenseMatrix& tau, double norm) {
  const double res = matmul(tau, y.y.rows_range(y.y.rows() - tau.cols(), tau.cols())).frobenius_norm();
  return {res, res / norm};
}

DenseMatrix kronecker_solve_direct(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c1,
                                   const DenseMatrix& c2) {
  check_sylvester_dims(a, b, c1, c2);
  const Eigen::Index n1 = static_cast<Eigen::Index>(a.rows()), n2 = static_cast<Eigen::Index>(b.rows());
  const Eigen::MatrixXd ea = view(a), eb = view(b);
  const Eigen::MatrixXd c = view(c1) * view(c2).transpose();
  // vec(A X + X B) = (I (x) A + B^T (x) I) vec(X), column-major vec.
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n1 * n2, n1 * n2);
  for (Eigen::Index j = 0; j < n2; ++j) {
    k.block(j * n1, j * n1, n1, n1) += ea;
    for (Eigen::Index jp = 0; jp < n2; ++jp)
      if (eb(jp, j) != 0.0) k.block(j * n1, jp * n1, n1, n1).diagonal().array() += eb(jp, j);
  }
  const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(c.data(), n1 * n2);
  const Eigen::VectorXd x = k.partialPivLu().solve(rhs);
  const Eigen::MatrixXd xm = Eigen::Map<const Eigen::MatrixXd>(x.data(), n1, n2);
  check_solution(ea, eb, c, xm);
  return from_eigen(xm);
}

DenseMatrix kronecker_solve_schur(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c1,
                                  const DenseMatrix& c2) {
  check_sylvester_dims(a, b, c1, c2);
  // The cost is n2 dense solves of size n1; transpose so n1 is the smaller side.
  // A X + X B + C = 0 transposes to B^T X^T + X^T A^T + C^T = 0.
  if (a.rows() > b.rows()) return kronecker_solve_schur(b.transpose(), a.transpose(), c2, c1).transpose();

  using Cplx = std::complex<double>;
  const Eigen::Index n1 = static_cast<Eigen::Index>(a.rows()), n2 = static_cast<Eigen::Index>(b.rows());
  const Eigen::MatrixXd ea = view(a), eb = view(b);
  const Eigen::MatrixXd c = view(c1) * view(c2).transpose();

  // B = U S U^*, X^ = X U:  A X^ + X^ S = -C U, solved column by column.
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(eb.cast<Cplx>());
  if (schur.info() != Eigen::Success) throw ConvergenceError("kronecker_solve: Schur decomposition failed");
  const Eigen::MatrixXcd& u = schur.matrixU();
  const Eigen::MatrixXcd& s = schur.matrixT();
  const Eigen::MatrixXcd f = -(c.cast<Cplx>() * u);
  const Eigen::MatrixXcd ac = ea.cast<Cplx>();
  Eigen::MatrixXcd xh(n1, n2);
  for (Eigen::Index k = 0; k < n2; ++k) {
    Eigen::VectorXcd rhs = f.col(k);
    for (Eigen::Index i = 0; i < k; ++i) rhs -= xh.col(i) * s(i, k);
    Eigen::MatrixXcd shifted = ac;
    shifted.diagonal().array() += s(k, k);
    xh.col(k) = shifted.partialPivLu().solve(rhs);
  }
  const Eigen::MatrixXd x = (xh * u.adjoint()).real();
  check_solution(ea, eb, c, x);
  return from_eigen(x);
}

DenseMatrix kronecker_solve(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c1,
                            const DenseMatrix& c2) {
  if (a.rows() * b.rows() <= kKroneckerDirectLimit) return kronecker_solve_direct(a, b, c1, c2);
  return kronecker_solve_schur(a, b, c1, c2);
}

}  // namespace krylyap
