#pragma once

#include <vector>

#include "krylyap/core_la.hpp"
#include "krylyap/dense_matrix.hpp"
#include "krylyap/krylov_basis.hpp"
#include "krylyap/sparse.hpp"

// Galerkin projection drivers. Each iteration adds one block to the Krylov
// space, every check_period iterations the residual norm is evaluated from the
// projected matrices alone, and at convergence the reduced solution is
// truncated in the eigenbasis of T and mapped back to a low-rank factor.
namespace krylyap {

struct SolveOptions {
  double tol = 1e-6;
  index_t max_m = 500;
  index_t check_period = 1;
  Space space = Space::standard;
  Storage storage = Storage::windowed;
  // Absolute tail mass dropped from the reduced solution, for ||C||_F = 1.
  // It is scaled by the norm of the right-hand side (beta^2 for Lyapunov).
  double trunc_eps = kTruncationEps;
  // Recompute the residual from the returned factors at the end.
  bool verify = false;
};

// Throws DimensionError for tol <= 0, check_period < 1 or max_m < 1.
void validate(const SolveOptions& opts);

struct HistoryEntry {
  index_t m;
  index_t space_dim;     // ell m (of the left space for two-sided Sylvester)
  double res;
  double relative;
  double basis_secs;     // cumulative up to and including this check
  double residual_secs;
};

struct Timings {
  double basis = 0.0;     // Krylov steps, including operator applies and solves
  double residual = 0.0;  // residual checks
  double recovery = 0.0;  // reduced solve, truncation and factor assembly
  double total = 0.0;
};

struct LowRankSolution {
  // X ~= Z1 Z1^T (Lyapunov) or Z1 Z2^T (Sylvester).
  DenseMatrix z1;
  DenseMatrix z2;
  index_t rank = 0;
  index_t m = 0;
  bool converged = false;
  // Converged because a space became invariant (residual exactly zero).
  bool invariant = false;
  double final_res = 0.0;
  double final_relative = 0.0;
  double norm = 0.0;  // beta^2 or ||C1||_F ||C2||_F
  std::vector<HistoryEntry> history;
  Timings timings;

  // Basis storage in n-vectors, summed over both spaces for two-sided
  // Sylvester. peak counts everything held at once in the first pass.
  index_t peak_basis_vectors = 0;
  index_t stored_half_vectors = 0;
  index_t block_size = 0;
  double truncation_mass = 0.0;
  double local_orthogonality = 0.0;

  // Filled when SolveOptions::verify is set and n <= kVerifyLimit.
  bool verified = false;
  double verified_res = 0.0;
  double verified_relative = 0.0;

  const DenseMatrix& z() const noexcept { return z1; }
};

inline constexpr index_t kVerifyLimit = 20000;

// A X + X A + C C^T = 0 for symmetric negative definite A. A non-invariant
// breakdown propagates as BreakdownError (deflation is not supported). When
// max_m is reached the factor of the last Galerkin approximation is returned
// with converged = false.
LowRankSolution solve_lyapunov(const LinearOperator& op, const DenseMatrix& c, const SolveOptions& opts);

// A X E + E X A + C C^T = 0 with E SPD, through the operator L^{-1} A L^{-T}
// (E = L L^T) and Z = L^{-T} Z~. Extended mode factorizes A as well.
LowRankSolution solve_lyapunov_generalized(const SparseSymmetric& a, const SparseSymmetric& e,
                                           const DenseMatrix& c, const SolveOptions& opts);

// A X + X B + C1 C2^T = 0 with one Krylov space per side, grown in step.
// Normalized by ||C1||_F ||C2||_F. X ~= Z1 Z2^T.
LowRankSolution solve_sylvester_two_sided(const LinearOperator& op_a, const LinearOperator& op_b,
                                          const DenseMatrix& c1, const DenseMatrix& c2, const SolveOptions& opts);

// As above with B small and dense; only A is projected. B is diagonalized once
// at the start. Z2 = P Y2 where B = P diag(upsilon) P^T.
LowRankSolution solve_sylvester_one_sided(const LinearOperator& op_a, const DenseMatrix& b, const DenseMatrix& c1,
                                          const DenseMatrix& c2, const SolveOptions& opts);

// Z = sum_j V_j (QY)_j with V_j regenerated by a second pass over the stored
// recurrence coefficients. qy has ell m rows.
DenseMatrix two_pass_recover(const LinearOperator& op, const ProjectionState& state, const BasisWindow& window,
                             const DenseMatrix& qy);

// The same sum over blocks held in a stored-mode window, accumulated in the
// same order, so both recoveries agree bit for bit.
DenseMatrix stored_recover(const ProjectionState& state, const BasisWindow& window, const DenseMatrix& qy);

// ||A Z1 Z2^T + Z1 Z2^T B + C1 C2^T||_F without forming n x n matrices:
// the residual is U1 U2^T with U1 = [A Z1, Z1, C1], U2 = [Z2, B Z2, C2], whose
// norm is ||R1 R2^T||_F for the QR factors of U1 and U2.
double explicit_residual(const LinearOperator& op_a, const LinearOperator& op_b, const DenseMatrix& z1,
                         const DenseMatrix& z2, const DenseMatrix& c1, const DenseMatrix& c2);

}  // namespace krylyap
