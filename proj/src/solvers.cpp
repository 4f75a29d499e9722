#include "krylyap/solvers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>

#include "krylyap/errors.hpp"
#include "krylyap/kernels.hpp"
#include "krylyap/residual.hpp"

namespace krylyap {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Adds the time spent in its scope to `sink`.
class ScopedTimer {
 public:
  explicit ScopedTimer(double& sink) : sink_(sink), t0_(Clock::now()) {}
  ~ScopedTimer() { sink_ += seconds_since(t0_); }
  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  double& sink_;
  Clock::time_point t0_;
};

constexpr double kDenominatorTol = 1e-14;

struct Side {
  BasisWindow window;
  ProjectionState state;

  explicit Side(KrylovStart k) : window(std::move(k.window)), state(std::move(k.state)) {}
  bool done() const noexcept { return state.invariant; }
  // The nonzero part of T_{m+1,m}.
  DenseMatrix tau() const { return state.space == Space::extended ? state.tau_bar() : state.tau_next; }
};

// One step; an invariant breakdown just marks the side as finished.
void advance(const LinearOperator& op, Side& side) {
  try {
    krylov_step(op, side.window, side.state);
  } catch (const BreakdownError& e) {
    if (!e.invariant())
      throw BreakdownError("Krylov breakdown at step " + std::to_string(side.state.m + 1) +
                               ": the new block lost rank and deflation is not supported (" + e.what() + ")",
                           false);
  }
}

void check_rhs(const LinearOperator& op, const DenseMatrix& c, const char* who) {
  if (c.rows() != op.dim())
    throw DimensionError(std::string(who) + ": right-hand side has " + std::to_string(c.rows()) +
                         " rows, operator dimension is " + std::to_string(op.dim()));
  if (c.cols() == 0) throw DimensionError(std::string(who) + ": right-hand side has no columns");
  if (!c.all_finite()) throw DimensionError(std::string(who) + ": right-hand side has non-finite entries");
}

// Y~_ij = -(a_i . b_j) / (p_i + q_j), a and b holding one row per eigenvalue.
DenseMatrix diagonal_solution(const DenseMatrix& a, const std::vector<double>& p, const DenseMatrix& b,
                              const std::vector<double>& q) {
  double scale = 0.0;
  for (double x : p) scale = std::max(scale, std::abs(x));
  for (double x : q) scale = std::max(scale, std::abs(x));
  const DenseMatrix s = matmul_nt(a, b);
  DenseMatrix y(s.rows(), s.cols());
  for (index_t j = 0; j < s.cols(); ++j)
    for (index_t i = 0; i < s.rows(); ++i) {
      const double den = p[i] + q[j];
      if (!(std::abs(den) >= kDenominatorTol * scale))
        throw IndefiniteError("singular denominator in the reduced equation: eigenvalue sum " + std::to_string(den) +
                              " is numerically zero");
      y(i, j) = -s(i, j) / den;
    }
  return y;
}

DenseMatrix recover(const LinearOperator& op, const Side& side, const DenseMatrix& qy) {
  return side.window.storage() == Storage::stored ? stored_recover(side.state, side.window, qy)
                                                  : two_pass_recover(op, side.state, side.window, qy);
}

void record(LowRankSolution& sol, index_t m, index_t dim, double res) {
  sol.history.push_back({m, dim, res, res / sol.norm, sol.timings.basis, sol.timings.residual});
  sol.final_res = res;
  sol.final_relative = res / sol.norm;
}

// Evaluates `f` and adds its running time to `sink`.
template <class F>
auto timed(double& sink, F&& f) {
  const auto t0 = Clock::now();
  auto out = f();
  sink += seconds_since(t0);
  return out;
}

bool is_check(index_t m, const SolveOptions& opts) { return m % opts.check_period == 0 || m >= opts.max_m; }

Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
  return Eigen::Map<const Eigen::MatrixXd>(m.data(), static_cast<Eigen::Index>(m.rows()),
                                           static_cast<Eigen::Index>(m.cols()));
}

// R of a Householder QR of u, min(rows, cols) x cols.
Eigen::MatrixXd qr_r(const DenseMatrix& u) {
  const Eigen::MatrixXd e = to_eigen(u);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(e);
  const Eigen::Index k = std::min(e.rows(), e.cols());
  return qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

// ||U1 U2^T||_F.
double lowrank_product_norm(const DenseMatrix& u1, const DenseMatrix& u2) {
  return (qr_r(u1) * qr_r(u2).transpose()).norm();
}

void finish_timings(LowRankSolution& sol, Clock::time_point t0) { sol.timings.total = seconds_since(t0); }

}  // namespace

void validate(const SolveOptions& opts) {
  if (!(opts.tol > 0.0)) throw DimensionError("tol must be positive");
  if (opts.check_period < 1) throw DimensionError("check period must be at least 1");
  if (opts.max_m < 1) throw DimensionError("max_m must be at least 1");
  if (!(opts.trunc_eps >= 0.0)) throw DimensionError("truncation eps must be nonnegative");
}

DenseMatrix stored_recover(const ProjectionState& state, const BasisWindow& window, const DenseMatrix& qy) {
  const index_t l = state.ell;
  if (qy.rows() != l * state.m) throw DimensionError("stored_recover: QY must have ell m rows");
  DenseMatrix z(window.block(1).rows(), qy.cols());
  for (index_t j = 1; j <= state.m; ++j) kernels::add_mul(z, window.block(j), qy.rows_range((j - 1) * l, l));
  return z;
}

DenseMatrix two_pass_recover(const LinearOperator& op, const ProjectionState& state, const BasisWindow& window,
                             const DenseMatrix& qy) {
  const index_t l = state.ell;
  if (qy.rows() != l * state.m) throw DimensionError("two_pass_recover: QY must have ell m rows");
  DenseMatrix z(op.dim(), qy.cols());
  regenerate_basis(op, state, window, [&](index_t j, const DenseMatrix& v) {
    kernels::add_mul(z, v, qy.rows_range((j - 1) * l, l));
  });
  return z;
}

double explicit_residual(const LinearOperator& op_a, const LinearOperator& op_b, const DenseMatrix& z1,
                         const DenseMatrix& z2, const DenseMatrix& c1, const DenseMatrix& c2) {
  if (z1.rows() != op_a.dim() || c1.rows() != op_a.dim() || z2.rows() != op_b.dim() || c2.rows() != op_b.dim() ||
      z1.cols() != z2.cols() || c1.cols() != c2.cols())
    throw DimensionError("explicit_residual: factor dimensions do not match");
  const DenseMatrix u1 = hcat(hcat(block_apply(op_a, z1), z1), c1);
  const DenseMatrix u2 = hcat(hcat(z2, block_apply(op_b, z2)), c2);
  return lowrank_product_norm(u1, u2);
}

LowRankSolution solve_lyapunov(const LinearOperator& op, const DenseMatrix& c, const SolveOptions& opts) {
  validate(opts);
  check_rhs(op, c, "solve_lyapunov");
  const auto t0 = Clock::now();
  LowRankSolution sol;

  std::unique_ptr<Side> side;
  {
    ScopedTimer timer(sol.timings.basis);
    side = std::make_unique<Side>(init_basis(op, c, opts.space, opts.storage));
  }
  const ProjectionState& st = side->state;
  sol.norm = st.beta * st.beta;
  sol.block_size = st.ell;

  while (st.m < opts.max_m) {
    {
      ScopedTimer timer(sol.timings.basis);
      advance(op, *side);
    }
    if (side->done()) {
      record(sol, st.m, st.t.dim(), 0.0);
      sol.converged = sol.invariant = true;
      break;
    }
    if (!is_check(st.m, opts)) continue;
    const ResidualValue r =
        timed(sol.timings.residual, [&] { return ctri_lyapunov(st.t, st.gamma, side->tau()); });
    record(sol, st.m, st.t.dim(), r.res);
    if (r.relative <= opts.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.m = st.m;
  sol.peak_basis_vectors = side->window.peak_vectors();
  sol.stored_half_vectors = side->window.stored_half_vectors();
  sol.local_orthogonality = st.local_orthogonality;

  {
    ScopedTimer timer(sol.timings.recovery);
    const SymmetricEigen e = full_eig_blocktridiag(st.t);
    const DenseMatrix a = matmul_tn(e.vectors.rows_range(0, st.ell), st.gamma);
    DenseMatrix y = diagonal_solution(a, e.eigenvalues, a, e.eigenvalues);
    for (index_t j = 0; j < y.cols(); ++j)
      for (index_t i = j + 1; i < y.rows(); ++i) y(i, j) = y(j, i) = 0.5 * (y(i, j) + y(j, i));
    const TruncatedFactor f = truncated_spd_factor(y, opts.trunc_eps * sol.norm);
    sol.truncation_mass = f.discarded_mass;
    sol.rank = f.factor.cols();
    sol.z1 = recover(op, *side, matmul(e.vectors, f.factor));
  }

  if (opts.verify && op.dim() <= kVerifyLimit) {
    sol.verified = true;
    sol.verified_res = explicit_residual(op, op, sol.z1, sol.z1, c, c);
    sol.verified_relative = sol.verified_res / sol.norm;
  }
  finish_timings(sol, t0);
  return sol;
}

LowRankSolution solve_lyapunov_generalized(const SparseSymmetric& a, const SparseSymmetric& e,
                                           const DenseMatrix& c, const SolveOptions& opts) {
  if (a.n() != e.n()) throw DimensionError("solve_lyapunov_generalized: A and E differ in size");
  auto a_ptr = std::make_shared<const SparseSymmetric>(a);
  std::unique_ptr<CholeskyTransformOperator> op = cholesky_transform(e, a_ptr);
  if (opts.space == Space::extended) op->enable_inverse();
  check_rhs(*op, c, "solve_lyapunov_generalized");

  SolveOptions inner = opts;
  inner.verify = false;
  LowRankSolution sol = solve_lyapunov(*op, op->transform_rhs(c), inner);
  sol.z1 = op->recover_factor(sol.z1);

  if (opts.verify && a.n() <= kVerifyLimit) {
    // A X E + E X A + C C^T = [A Z, E Z, C] [E Z, A Z, C]^T.
    const DenseMatrix az = multiply(a, sol.z1), ez = multiply(e, sol.z1);
    sol.verified = true;
    sol.verified_res = lowrank_product_norm(hcat(hcat(az, ez), c), hcat(hcat(ez, az), c));
    const double beta = c.frobenius_norm();
    sol.verified_relative = sol.verified_res / (beta * beta);
  }
  return sol;
}

LowRankSolution solve_sylvester_two_sided(const LinearOperator& op_a, const LinearOperator& op_b,
                                          const DenseMatrix& c1, const DenseMatrix& c2, const SolveOptions& opts) {
  validate(opts);
  check_rhs(op_a, c1, "solve_sylvester_two_sided");
  check_rhs(op_b, c2, "solve_sylvester_two_sided");
  if (c1.cols() != c2.cols()) throw DimensionError("solve_sylvester_two_sided: C1 and C2 differ in rank");
  const auto t0 = Clock::now();
  LowRankSolution sol;

  std::unique_ptr<Side> left, right;
  {
    ScopedTimer timer(sol.timings.basis);
    left = std::make_unique<Side>(init_basis(op_a, c1, opts.space, opts.storage));
    right = std::make_unique<Side>(init_basis(op_b, c2, opts.space, opts.storage));
  }
  const ProjectionState &sa = left->state, &sb = right->state;
  sol.norm = sa.beta * sb.beta;
  sol.block_size = sa.ell;

  index_t m = 0;
  while (m < opts.max_m) {
    {
      ScopedTimer timer(sol.timings.basis);
      // A finished side keeps its space; the other one goes on growing.
      if (!left->done()) advance(op_a, *left);
      if (!right->done()) advance(op_b, *right);
    }
    ++m;
    if (left->done() && right->done()) {
      record(sol, m, sa.t.dim(), 0.0);
      sol.converged = sol.invariant = true;
      break;
    }
    if (!is_check(m, opts) && !left->done() && !right->done()) continue;
    const ResidualValue r = timed(sol.timings.residual, [&] {
      return ctri_sylvester(sa.t, sb.t, sa.gamma, sb.gamma, left->tau(), right->tau());
    });
    record(sol, m, sa.t.dim(), r.res);
    if (r.relative <= opts.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.m = m;
  sol.peak_basis_vectors = left->window.peak_vectors() + right->window.peak_vectors();
  sol.stored_half_vectors = left->window.stored_half_vectors() + right->window.stored_half_vectors();
  sol.local_orthogonality = std::max(sa.local_orthogonality, sb.local_orthogonality);

  {
    ScopedTimer timer(sol.timings.recovery);
    const SymmetricEigen ea = full_eig_blocktridiag(sa.t);
    const SymmetricEigen eb = full_eig_blocktridiag(sb.t);
    const DenseMatrix a = matmul_tn(ea.vectors.rows_range(0, sa.ell), sa.gamma);
    const DenseMatrix b = matmul_tn(eb.vectors.rows_range(0, sb.ell), sb.gamma);
    const TruncatedSvdFactor f =
        truncated_svd_factor(diagonal_solution(a, ea.eigenvalues, b, eb.eigenvalues), opts.trunc_eps * sol.norm);
    sol.truncation_mass = f.discarded_mass;
    sol.rank = f.left.cols();
    sol.z1 = recover(op_a, *left, matmul(ea.vectors, f.left));
    sol.z2 = recover(op_b, *right, matmul(eb.vectors, f.right));
  }

  if (opts.verify && std::max(op_a.dim(), op_b.dim()) <= kVerifyLimit) {
    sol.verified = true;
    sol.verified_res = explicit_residual(op_a, op_b, sol.z1, sol.z2, c1, c2);
    sol.verified_relative = sol.verified_res / sol.norm;
  }
  finish_timings(sol, t0);
  return sol;
}

LowRankSolution solve_sylvester_one_sided(const LinearOperator& op_a, const DenseMatrix& b, const DenseMatrix& c1,
                                          const DenseMatrix& c2, const SolveOptions& opts) {
  validate(opts);
  check_rhs(op_a, c1, "solve_sylvester_one_sided");
  if (b.rows() != b.cols()) throw DimensionError("solve_sylvester_one_sided: B must be square");
  if (c2.rows() != b.rows()) throw DimensionError("solve_sylvester_one_sided: C2 does not match B");
  if (c1.cols() != c2.cols()) throw DimensionError("solve_sylvester_one_sided: C1 and C2 differ in rank");
  if (!((b - b.transpose()).max_abs() <= 1e-14 * b.max_abs()))
    throw DimensionError("solve_sylvester_one_sided: B is not symmetric");
  const auto t0 = Clock::now();
  LowRankSolution sol;

  // B = P diag(upsilon) P^T, once.
  SymmetricEigen be;
  DenseMatrix c2_hat;
  {
    ScopedTimer timer(sol.timings.residual);
    be = sym_eig(b);
    c2_hat = matmul_tn(be.vectors, c2);
  }

  std::unique_ptr<Side> side;
  {
    ScopedTimer timer(sol.timings.basis);
    side = std::make_unique<Side>(init_basis(op_a, c1, opts.space, opts.storage));
  }
  const ProjectionState& st = side->state;
  sol.norm = st.beta * c2.frobenius_norm();
  sol.block_size = st.ell;

  while (st.m < opts.max_m) {
    {
      ScopedTimer timer(sol.timings.basis);
      advance(op_a, *side);
    }
    if (side->done()) {
      record(sol, st.m, st.t.dim(), 0.0);
      sol.converged = sol.invariant = true;
      break;
    }
    if (!is_check(st.m, opts)) continue;
    const ResidualValue r = timed(sol.timings.residual, [&] {
      return residual_one_sided(st.t, side->tau(), st.gamma, c2_hat, be.eigenvalues);
    });
    record(sol, st.m, st.t.dim(), r.res);
    if (r.relative <= opts.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.m = st.m;
  sol.peak_basis_vectors = side->window.peak_vectors();
  sol.stored_half_vectors = side->window.stored_half_vectors();
  sol.local_orthogonality = st.local_orthogonality;

  {
    ScopedTimer timer(sol.timings.recovery);
    const SymmetricEigen e = full_eig_blocktridiag(st.t);
    const DenseMatrix a = matmul_tn(e.vectors.rows_range(0, st.ell), st.gamma);
    const TruncatedSvdFactor f =
        truncated_svd_factor(diagonal_solution(a, e.eigenvalues, c2_hat, be.eigenvalues), opts.trunc_eps * sol.norm);
    sol.truncation_mass = f.discarded_mass;
    sol.rank = f.left.cols();
    sol.z1 = recover(op_a, *side, matmul(e.vectors, f.left));
    sol.z2 = matmul(be.vectors, f.right);
  }

  if (opts.verify && op_a.dim() <= kVerifyLimit) {
    sol.verified = true;
    sol.verified_res = explicit_residual(op_a, DenseOperator(b), sol.z1, sol.z2, c1, c2);
    sol.verified_relative = sol.verified_res / sol.norm;
  }
  finish_timings(sol, t0);
  return sol;
}

}  // namespace krylyap
