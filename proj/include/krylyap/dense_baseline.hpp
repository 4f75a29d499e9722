#pragma once

#include "krylyap/core_la.hpp"
#include "krylyap/dense_matrix.hpp"
#include "krylyap/residual.hpp"

// The expensive reference path: form the reduced solution Y explicitly by
// diagonalization and evaluate the residual from it, plus a brute-force
// solver for the full matrix equation used as a test oracle.
namespace krylyap {

struct ReducedSolution {
  DenseMatrix y;
  // Y = left * Y~ * right^T in the eigenbases used to build it.
  DenseMatrix y_tilde;
  DenseMatrix left;
  DenseMatrix right;
};

// T Y + Y T + E_1 gamma gamma^T E_1^T = 0 via the dense eigendecomposition of
// T: Y~_ij = -(a a^T)_ij / (lambda_i + lambda_j), a = Q^T E_1 gamma.
// Y is symmetrized afterwards.
ReducedSolution solve_reduced_lyapunov(const BlockTridiagonal& t, const DenseMatrix& gamma);

// T Y + Y J + E_1 gamma1 gamma2^T E_1^T = 0.
ReducedSolution solve_reduced_sylvester(const BlockTridiagonal& t, const BlockTridiagonal& j,
                                        const DenseMatrix& gamma1, const DenseMatrix& gamma2);

// T Y + Y B + E_1 gamma1 C2^T = 0 with B given by its eigendecomposition;
// Y is dim(T) x n2.
ReducedSolution solve_reduced_one_sided(const BlockTridiagonal& t, const SymmetricEigen& b_eigen,
                                        const DenseMatrix& gamma1, const DenseMatrix& c2);

// sqrt(2) ||Y E_m tau^T||_F, normalized by ||gamma||_F^2. The last
// tau.cols() columns of Y form Y E_m.
ResidualValue naive_residual_lyapunov(const ReducedSolution& y, const DenseMatrix& tau, double beta);
// sqrt(||tau E_m^T Y||^2 + ||Y E_m iota^T||^2), normalized by `norm`.
ResidualValue naive_residual_sylvester(const ReducedSolution& y, const DenseMatrix& tau, const DenseMatrix& iota,
                                       double norm);
// ||tau E_m^T Y||_F, normalized by `norm`.
ResidualValue naive_residual_one_sided(const ReducedSolution& y, const DenseMatrix& tau, double norm);

// Dense solution of A X + X B + C1 C2^T = 0. Small problems go through an LU
// factorization of I (x) A + B^T (x) I; above kKroneckerDirectLimit unknowns
// a complex Schur form of B reduces it to n2 shifted solves with A
// (Bartels-Stewart). Throws IndefiniteError when the operator is singular.
inline constexpr index_t kKroneckerDirectLimit = 2500;
inline constexpr index_t kKroneckerLimit = 40000;
DenseMatrix kronecker_solve(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c1,
                            const DenseMatrix& c2);

// The two routes of kronecker_solve, exposed so they can check each other.
DenseMatrix kronecker_solve_direct(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c1,
                                   const DenseMatrix& c2);
DenseMatrix kronecker_solve_schur(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c1,
                                  const DenseMatrix& c2);

}  // namespace krylyap
