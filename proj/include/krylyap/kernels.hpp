#pragma once

#include <span>

#include "krylyap/dense_matrix.hpp"

// Data-parallel inner loops. Every kernel in `kernels` has a plain loop twin
// in `kernels::serial`; the tests check they agree bit for bit and the
// benchmark target compares their speed.
//
// Determinism: each output entry is produced by the same sequence of floating
// point operations regardless of the thread count. Reductions over the long
// dimension are split into fixed-size row chunks whose partial results are
// summed in chunk order.
namespace krylyap::kernels {

// Row chunk used by the reductions over n.
inline constexpr index_t kReductionChunk = 4096;

// C = A * B.
void gemm_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
// C = A^T * B.
void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
// W -= V * alpha.
void sub_mul(DenseMatrix& w, const DenseMatrix& v, const DenseMatrix& alpha);
// Z += V * B.
void add_mul(DenseMatrix& z, const DenseMatrix& v, const DenseMatrix& b);
// Y = A * X for A in CSR form.
void csr_apply(std::span<const index_t> row_ptr, std::span<const index_t> col_idx,
               std::span<const double> values, const DenseMatrix& x, DenseMatrix& y);

namespace serial {
void gemm_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
void sub_mul(DenseMatrix& w, const DenseMatrix& v, const DenseMatrix& alpha);
void add_mul(DenseMatrix& z, const DenseMatrix& v, const DenseMatrix& b);
void csr_apply(std::span<const index_t> row_ptr, std::span<const index_t> col_idx,
               std::span<const double> values, const DenseMatrix& x, DenseMatrix& y);
}  // namespace serial

// Number of OpenMP threads in use (1 when built without OpenMP).
int max_threads();

}  // namespace krylyap::kernels
