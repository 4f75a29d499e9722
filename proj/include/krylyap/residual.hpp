#pragma once

#include <span>

#include "krylyap/core_la.hpp"
#include "krylyap/dense_matrix.hpp"

// Residual norms of Galerkin approximations computed from the projected data
// alone, without forming the reduced solution Y.
//
// With T = Q Lambda Q^T, the reduced solution in eigen-coordinates is
// Y~_ij = -S_ij / (lambda_i + lambda_j), so every row of Y~ W is an
// elementwise scaled combination of the rows of W. The whole evaluation costs
// O(k^2 (s + r)) for k = dim(T) once the first and last block rows of Q are
// known.
namespace krylyap {

struct ResidualValue {
  double res = 0.0;       // ||R_m||_F
  double relative = 0.0;  // res / ||C||_F^2, or res / (||C1||_F ||C2||_F)
};

// Lyapunov: T Y + Y T + E_1 gamma gamma^T E_1^T = 0, and
// ||R|| = sqrt(2) ||Y E_m tau^T||_F. gamma is l x s (C = V_1 gamma), tau is
// r x l with r = l, or the s x 2s top of tau in extended mode.
ResidualValue ctri_lyapunov(const BlockTridiagonal& t, const DenseMatrix& gamma, const DenseMatrix& tau);

// Same, from the spectral data of T.
ResidualValue ctri_lyapunov(const PartialSpectral& spec, const DenseMatrix& gamma, const DenseMatrix& tau);

// Two-sided Sylvester: T Y + Y J + E_1 gamma1 gamma2^T E_1^T = 0 and
// ||R||^2 = ||tau E_m^T Y||^2 + ||Y E_m iota^T||^2.
ResidualValue ctri_sylvester(const BlockTridiagonal& t, const BlockTridiagonal& j, const DenseMatrix& gamma1,
                             const DenseMatrix& gamma2, const DenseMatrix& tau, const DenseMatrix& iota);
ResidualValue ctri_sylvester(const PartialSpectral& st, const PartialSpectral& sj, const DenseMatrix& gamma1,
                             const DenseMatrix& gamma2, const DenseMatrix& tau, const DenseMatrix& iota);

// One-sided Sylvester with B = P diag(upsilon) P^T small: T Y + Y B +
// E_1 gamma1 C2^T = 0 and ||R|| = ||tau E_m^T Y||_F. c2_hat = P^T C2 (n2 x s).
ResidualValue residual_one_sided(const BlockTridiagonal& t, const DenseMatrix& tau, const DenseMatrix& gamma1,
                                 const DenseMatrix& c2_hat, std::span<const double> upsilon);
ResidualValue residual_one_sided(const PartialSpectral& st, const DenseMatrix& tau, const DenseMatrix& gamma1,
                                 const DenseMatrix& c2_hat, std::span<const double> upsilon);

// Single-threaded twins of the spectral-data entry points; bit-identical
// results.
namespace serial {
ResidualValue ctri_lyapunov(const PartialSpectral& spec, const DenseMatrix& gamma, const DenseMatrix& tau);
ResidualValue ctri_sylvester(const PartialSpectral& st, const PartialSpectral& sj, const DenseMatrix& gamma1,
                             const DenseMatrix& gamma2, const DenseMatrix& tau, const DenseMatrix& iota);
ResidualValue residual_one_sided(const PartialSpectral& st, const DenseMatrix& tau, const DenseMatrix& gamma1,
                                 const DenseMatrix& c2_hat, std::span<const double> upsilon);
}  // namespace serial

}  // namespace krylyap
