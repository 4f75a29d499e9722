#include "krylyap/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "krylyap/errors.hpp"

namespace krylyap::kernels {

namespace {

constexpr index_t kRowTile = 256;

index_t ceil_div(index_t a, index_t b) { return (a + b - 1) / b; }

// Tile bodies for the OpenMP entry points. Each output entry sees the same
// operation sequence as the corresponding loop in `serial`.
inline void gemm_nn_tile(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c, index_t r0,
                         index_t r1) {
  for (index_t j = 0; j < c.cols(); ++j) {
    double* cj = c.col(j);
    std::fill(cj + r0, cj + r1, 0.0);
    for (index_t p = 0; p < a.cols(); ++p) {
      const double f = b(p, j);
      const double* ap = a.col(p);
      for (index_t r = r0; r < r1; ++r) cj[r] += ap[r] * f;
    }
  }
}

inline void sub_mul_tile(DenseMatrix& w, const DenseMatrix& v, const DenseMatrix& alpha, index_t r0,
                         index_t r1) {
  for (index_t j = 0; j < w.cols(); ++j) {
    double* wj = w.col(j);
    for (index_t p = 0; p < v.cols(); ++p) {
      const double f = alpha(p, j);
      const double* vp = v.col(p);
      for (index_t r = r0; r < r1; ++r) wj[r] -= vp[r] * f;
    }
  }
}

inline void add_mul_tile(DenseMatrix& z, const DenseMatrix& v, const DenseMatrix& b, index_t r0,
                         index_t r1) {
  for (index_t j = 0; j < z.cols(); ++j) {
    double* zj = z.col(j);
    for (index_t p = 0; p < v.cols(); ++p) {
      const double f = b(p, j);
      const double* vp = v.col(p);
      for (index_t r = r0; r < r1; ++r) zj[r] += vp[r] * f;
    }
  }
}

inline void gemm_tn_chunk(const DenseMatrix& a, const DenseMatrix& b, double* out, index_t r0,
                          index_t r1) {
  const index_t m = a.cols();
  for (index_t j = 0; j < b.cols(); ++j) {
    const double* bj = b.col(j);
    for (index_t i = 0; i < m; ++i) {
      const double* ai = a.col(i);
      double acc = 0.0;
      for (index_t r = r0; r < r1; ++r) acc += ai[r] * bj[r];
      out[i + j * m] = acc;
    }
  }
}

inline void csr_rows(std::span<const index_t> row_ptr, std::span<const index_t> col_idx,
                     std::span<const double> values, const DenseMatrix& x, DenseMatrix& y,
                     index_t r0, index_t r1) {
  for (index_t j = 0; j < x.cols(); ++j) {
    const double* xj = x.col(j);
    double* yj = y.col(j);
    for (index_t r = r0; r < r1; ++r) {
      double acc = 0.0;
      for (index_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc += values[p] * xj[col_idx[p]];
      yj[r] = acc;
    }
  }
}

void check_gemm_nn(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols())
    throw DimensionError("gemm_nn: shape mismatch");
}

void check_gemm_tn(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c) {
  if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols())
    throw DimensionError("gemm_tn: shape mismatch");
}

void check_update(const DenseMatrix& w, const DenseMatrix& v, const DenseMatrix& alpha) {
  if (w.rows() != v.rows() || v.cols() != alpha.rows() || w.cols() != alpha.cols())
    throw DimensionError("block update: shape mismatch");
}

void check_csr(std::span<const index_t> row_ptr, const DenseMatrix& x, const DenseMatrix& y) {
  const index_t n = row_ptr.size() - 1;
  if (x.rows() != n || y.rows() != n || x.cols() != y.cols())
    throw DimensionError("csr_apply: dimension mismatch");
}

// Sum chunk partials in chunk order.
void reduce_chunks(const std::vector<double>& partial, index_t nchunks, DenseMatrix& c) {
  const index_t sz = c.size();
  double* out = c.data();
  std::fill(out, out + sz, 0.0);
  for (index_t q = 0; q < nchunks; ++q)
    for (index_t e = 0; e < sz; ++e) out[e] += partial[q * sz + e];
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void gemm_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  check_gemm_nn(a, b, c);
  const auto tiles = static_cast<std::ptrdiff_t>(ceil_div(a.rows(), kRowTile));
#pragma omp parallel for schedule(static) if (tiles > 1)
  for (std::ptrdiff_t t = 0; t < tiles; ++t) {
    const index_t r0 = static_cast<index_t>(t) * kRowTile;
    gemm_nn_tile(a, b, c, r0, std::min(a.rows(), r0 + kRowTile));
  }
}

void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  check_gemm_tn(a, b, c);
  const index_t n = a.rows();
  const index_t nchunks = std::max<index_t>(1, ceil_div(n, kReductionChunk));
  if (nchunks == 1) {
    gemm_tn_chunk(a, b, c.data(), 0, n);
    return;
  }
  std::vector<double> partial(nchunks * c.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(nchunks); ++q) {
    const index_t r0 = static_cast<index_t>(q) * kReductionChunk;
    gemm_tn_chunk(a, b, partial.data() + static_cast<index_t>(q) * c.size(), r0,
                  std::min(n, r0 + kReductionChunk));
  }
  reduce_chunks(partial, nchunks, c);
}

void sub_mul(DenseMatrix& w, const DenseMatrix& v, const DenseMatrix& alpha) {
  check_update(w, v, alpha);
  const auto tiles = static_cast<std::ptrdiff_t>(ceil_div(w.rows(), kRowTile));
#pragma omp parallel for schedule(static) if (tiles > 1)
  for (std::ptrdiff_t t = 0; t < tiles; ++t) {
    const index_t r0 = static_cast<index_t>(t) * kRowTile;
    sub_mul_tile(w, v, alpha, r0, std::min(w.rows(), r0 + kRowTile));
  }
}

void add_mul(DenseMatrix& z, const DenseMatrix& v, const DenseMatrix& b) {
  check_update(z, v, b);
  const auto tiles = static_cast<std::ptrdiff_t>(ceil_div(z.rows(), kRowTile));
#pragma omp parallel for schedule(static) if (tiles > 1)
  for (std::ptrdiff_t t = 0; t < tiles; ++t) {
    const index_t r0 = static_cast<index_t>(t) * kRowTile;
    add_mul_tile(z, v, b, r0, std::min(z.rows(), r0 + kRowTile));
  }
}

void csr_apply(std::span<const index_t> row_ptr, std::span<const index_t> col_idx,
               std::span<const double> values, const DenseMatrix& x, DenseMatrix& y) {
  check_csr(row_ptr, x, y);
  const index_t n = x.rows();
  const auto tiles = static_cast<std::ptrdiff_t>(ceil_div(n, kRowTile));
#pragma omp parallel for schedule(static) if (tiles > 1)
  for (std::ptrdiff_t t = 0; t < tiles; ++t) {
    const index_t r0 = static_cast<index_t>(t) * kRowTile;
    csr_rows(row_ptr, col_idx, values, x, y, r0, std::min(n, r0 + kRowTile));
  }
}

namespace serial {

void gemm_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  check_gemm_nn(a, b, c);
  for (index_t j = 0; j < c.cols(); ++j)
    for (index_t r = 0; r < c.rows(); ++r) {
      double acc = 0.0;
      for (index_t p = 0; p < a.cols(); ++p) acc += a(r, p) * b(p, j);
      c(r, j) = acc;
    }
}

void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  check_gemm_tn(a, b, c);
  const index_t n = a.rows();
  const index_t nchunks = std::max<index_t>(1, ceil_div(n, kReductionChunk));
  for (index_t j = 0; j < c.cols(); ++j)
    for (index_t i = 0; i < c.rows(); ++i) {
      double total = 0.0;
      for (index_t q = 0; q < nchunks; ++q) {
        double acc = 0.0;
        for (index_t r = q * kReductionChunk; r < std::min(n, (q + 1) * kReductionChunk); ++r)
          acc += a(r, i) * b(r, j);
        total += acc;
      }
      c(i, j) = total;
    }
}

void sub_mul(DenseMatrix& w, const DenseMatrix& v, const DenseMatrix& alpha) {
  check_update(w, v, alpha);
  for (index_t j = 0; j < w.cols(); ++j)
    for (index_t r = 0; r < w.rows(); ++r) {
      double acc = w(r, j);
      for (index_t p = 0; p < v.cols(); ++p) acc -= v(r, p) * alpha(p, j);
      w(r, j) = acc;
    }
}

void add_mul(DenseMatrix& z, const DenseMatrix& v, const DenseMatrix& b) {
  check_update(z, v, b);
  for (index_t j = 0; j < z.cols(); ++j)
    for (index_t r = 0; r < z.rows(); ++r) {
      double acc = z(r, j);
      for (index_t p = 0; p < v.cols(); ++p) acc += v(r, p) * b(p, j);
      z(r, j) = acc;
    }
}

void csr_apply(std::span<const index_t> row_ptr, std::span<const index_t> col_idx,
               std::span<const double> values, const DenseMatrix& x, DenseMatrix& y) {
  check_csr(row_ptr, x, y);
  for (index_t r = 0; r + 1 < row_ptr.size(); ++r)
    for (index_t j = 0; j < x.cols(); ++j) {
      double acc = 0.0;
      for (index_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc += values[p] * x(col_idx[p], j);
      y(r, j) = acc;
    }
}

}  // namespace serial
}  // namespace krylyap::kernels
