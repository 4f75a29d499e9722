#include "krylyap/residual.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <vector>

#include "krylyap/errors.hpp"

namespace krylyap {

namespace {

constexpr double kDenominatorTol = 1e-14;

// Row-major copy, so the inner loops walk contiguous memory.
struct Rows {
  index_t n = 0, w = 0;
  std::vector<double> v;
  const double* row(index_t i) const { return v.data() + i * w; }
};

Rows row_major(const DenseMatrix& m) {
  Rows r{m.rows(), m.cols(), std::vector<double>(m.size())};
  for (index_t j = 0; j < m.cols(); ++j)
    for (index_t i = 0; i < m.rows(); ++i) r.v[i * r.w + j] = m(i, j);
  return r;
}

// Sum over i of || sum_j (u_i . v_j) / (p_i + q_j) w_j ||^2, where u_i, v_j
// and w_j are rows. Each i is independent; the per-i results are added in
// index order afterwards, so the value does not depend on the thread count.
double scaled_row_sum(const Rows& u, std::span<const double> p, const Rows& v, std::span<const double> q,
                      const Rows& w, bool parallel) {
  double scale = 0.0;
  for (double x : p) scale = std::max(scale, std::abs(x));
  for (double x : q) scale = std::max(scale, std::abs(x));
  const double guard = kDenominatorTol * scale;

  const index_t ni = u.n, nj = v.n, s = u.w, r = w.w;
  std::vector<double> part(ni, 0.0);
  std::atomic<bool> singular{false};

  auto body = [&](index_t i, std::vector<double>& x) {
    std::fill(x.begin(), x.end(), 0.0);
    const double* ui = u.row(i);
    for (index_t j = 0; j < nj; ++j) {
      const double den = p[i] + q[j];
      if (!(std::abs(den) >= guard)) {
        singular.store(true, std::memory_order_relaxed);
        return;
      }
      const double* vj = v.row(j);
      double sij = 0.0;
      for (index_t k = 0; k < s; ++k) sij += ui[k] * vj[k];
      const double c = sij / den;
      const double* wj = w.row(j);
      for (index_t k = 0; k < r; ++k) x[k] += c * wj[k];
    }
    double acc = 0.0;
    for (index_t k = 0; k < r; ++k) acc += x[k] * x[k];
    part[i] = acc;
  };

  if (parallel) {
#pragma omp parallel
    {
      std::vector<double> x(r);
#pragma omp for schedule(static)
      for (index_t i = 0; i < ni; ++i) body(i, x);
    }
  } else {
    std::vector<double> x(r);
    for (index_t i = 0; i < ni; ++i) body(i, x);
  }
  if (singular.load())
    throw IndefiniteError("singular denominator in the reduced equation: some eigenvalue sum is numerically "
                          "zero, the coefficient matrices are not definite");
  double total = 0.0;
  for (double x : part) total += x;
  return total;
}

void check_spectral(const PartialSpectral& sp, const DenseMatrix& gamma, const DenseMatrix& tau, const char* who) {
  const index_t k = sp.eigenvalues.size();
  if (sp.first_rows.cols() != k || sp.last_rows.cols() != k)
    throw DimensionError(std::string(who) + ": inconsistent spectral data");
  if (gamma.rows() != sp.first_rows.rows())
    throw DimensionError(std::string(who) + ": gamma must have one row per column of the first block");
  if (tau.cols() != sp.last_rows.rows())
    throw DimensionError(std::string(who) + ": tau must have one column per column of the last block");
}

ResidualValue lyapunov_impl(const PartialSpectral& sp, const DenseMatrix& gamma, const DenseMatrix& tau,
                            bool parallel) {
  check_spectral(sp, gamma, tau, "ctri_lyapunov");
  const Rows a = row_major(matmul_tn(sp.first_rows, gamma));
  const Rows w = row_major(matmul_tn(sp.last_rows, tau.transpose()));
  const double res = std::sqrt(2.0 * scaled_row_sum(a, sp.eigenvalues, a, sp.eigenvalues, w, parallel));
  const double beta = gamma.frobenius_norm();
  return {res, res / (beta * beta)};
}

ResidualValue sylvester_impl(const PartialSpectral& st, const PartialSpectral& sj, const DenseMatrix& gamma1,
                             const DenseMatrix& gamma2, const DenseMatrix& tau, const DenseMatrix& iota,
                             bool parallel) {
  check_spectral(st, gamma1, tau, "ctri_sylvester");
  check_spectral(sj, gamma2, iota, "ctri_sylvester");
  if (gamma1.cols() != gamma2.cols()) throw DimensionError("ctri_sylvester: gamma1 and gamma2 differ in rank");
  const Rows a = row_major(matmul_tn(st.first_rows, gamma1));
  const Rows b = row_major(matmul_tn(sj.first_rows, gamma2));
  const Rows f = row_major(matmul_tn(st.last_rows, tau.transpose()));
  const Rows g = row_major(matmul_tn(sj.last_rows, iota.transpose()));
  // Rows of Y~ G (indexed by T's eigenvalues) and of Y~^T F (by J's).
  const double left = scaled_row_sum(a, st.eigenvalues, b, sj.eigenvalues, g, parallel);
  const double right = scaled_row_sum(b, sj.eigenvalues, a, st.eigenvalues, f, parallel);
  const double res = std::sqrt(left + right);
  return {res, res / (gamma1.frobenius_norm() * gamma2.frobenius_norm())};
}

ResidualValue one_sided_impl(const PartialSpectral& st, const DenseMatrix& tau, const DenseMatrix& gamma1,
                             const DenseMatrix& c2_hat, std::span<const double> upsilon, bool parallel) {
  check_spectral(st, gamma1, tau, "residual_one_sided");
  if (c2_hat.rows() != upsilon.size()) throw DimensionError("residual_one_sided: C2 and B differ in size");
  if (c2_hat.cols() != gamma1.cols()) throw DimensionError("residual_one_sided: C1 and C2 differ in rank");
  const Rows a = row_major(matmul_tn(st.first_rows, gamma1));
  const Rows c = row_major(c2_hat);
  const Rows w = row_major(matmul_tn(st.last_rows, tau.transpose()));
  const double res = std::sqrt(scaled_row_sum(c, upsilon, a, st.eigenvalues, w, parallel));
  return {res, res / (gamma1.frobenius_norm() * c2_hat.frobenius_norm())};
}

}  // namespace

ResidualValue ctri_lyapunov(const PartialSpectral& spec, const DenseMatrix& gamma, const DenseMatrix& tau) {
  return lyapunov_impl(spec, gamma, tau, true);
}

ResidualValue ctri_lyapunov(const BlockTridiagonal& t, const DenseMatrix& gamma, const DenseMatrix& tau) {
  return ctri_lyapunov(partial_eig_blocktridiag(t), gamma, tau);
}

ResidualValue ctri_sylvester(const PartialSpectral& st, const PartialSpectral& sj, const DenseMatrix& gamma1,
                             const DenseMatrix& gamma2, const DenseMatrix& tau, const DenseMatrix& iota) {
  return sylvester_impl(st, sj, gamma1, gamma2, tau, iota, true);
}

ResidualValue ctri_sylvester(const BlockTridiagonal& t, const BlockTridiagonal& j, const DenseMatrix& gamma1,
                             const DenseMatrix& gamma2, const DenseMatrix& tau, const DenseMatrix& iota) {
  return ctri_sylvester(partial_eig_blocktridiag(t), partial_eig_blocktridiag(j), gamma1, gamma2, tau, iota);
}

ResidualValue residual_one_sided(const PartialSpectral& st, const DenseMatrix& tau, const DenseMatrix& gamma1,
                                 const DenseMatrix& c2_hat, std::span<const double> upsilon) {
  return one_sided_impl(st, tau, gamma1, c2_hat, upsilon, true);
}

ResidualValue residual_one_sided(const BlockTridiagonal& t, const DenseMatrix& tau, const DenseMatrix& gamma1,
                                 const DenseMatrix& c2_hat, std::span<const double> upsilon) {
  return residual_one_sided(partial_eig_blocktridiag(t), tau, gamma1, c2_hat, upsilon);
}

namespace serial {

ResidualValue ctri_lyapunov(const PartialSpectral& spec, const DenseMatrix& gamma, const DenseMatrix& tau) {
  return lyapunov_impl(spec, gamma, tau, false);
}

ResidualValue ctri_sylvester(const PartialSpectral& st, const PartialSpectral& sj, const DenseMatrix& gamma1,
                             const DenseMatrix& gamma2, const DenseMatrix& tau, const DenseMatrix& iota) {
  return sylvester_impl(st, sj, gamma1, gamma2, tau, iota, false);
}

ResidualValue residual_one_sided(const PartialSpectral& st, const DenseMatrix& tau, const DenseMatrix& gamma1,
                                 const DenseMatrix& c2_hat, std::span<const double> upsilon) {
  return one_sided_impl(st, tau, gamma1, c2_hat, upsilon, false);
}

}  // namespace serial

}  // namespace krylyap
