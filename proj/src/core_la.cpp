#include "krylyap/core_la.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

#include "krylyap/errors.hpp"

namespace krylyap {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kQlMaxIterations = 30;

double norm2(const double* x, index_t len) {
  double scale = 0.0, ssq = 1.0;
  for (index_t i = 0; i < len; ++i) {
    if (x[i] == 0.0) continue;
    const double a = std::abs(x[i]);
    if (scale < a) {
      ssq = 1.0 + ssq * (scale / a) * (scale / a);
      scale = a;
    } else {
      ssq += (a / scale) * (a / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

// Make the largest-magnitude entry of every column positive.
void fix_column_signs(DenseMatrix& v) {
  for (index_t j = 0; j < v.cols(); ++j) {
    const double* c = v.col(j);
    index_t best = 0;
    for (index_t i = 1; i < v.rows(); ++i)
      if (std::abs(c[i]) > std::abs(c[best])) best = i;
    if (v.rows() > 0 && c[best] < 0.0)
      for (index_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
  }
}

// Lower symmetric band storage with half-bandwidth `w`: entry (i, j), i >= j,
// i - j <= w lives at data[(i - j) + j * (w + 1)].
class SymBand {
 public:
  SymBand(index_t n, index_t w) : n_(n), w_(w), data_((w + 1) * n, 0.0) {}

  double get(index_t i, index_t j) const {
    if (i < j) std::swap(i, j);
    const index_t d = i - j;
    return d <= w_ ? data_[d + j * (w_ + 1)] : 0.0;
  }
  void set(index_t i, index_t j, double v) {
    if (i < j) std::swap(i, j);
    const index_t d = i - j;
    if (d <= w_) {
      data_[d + j * (w_ + 1)] = v;
    } else {
      assert(v == 0.0 && "band reduction produced fill outside the bulge band");
    }
  }
  index_t n() const { return n_; }
  index_t w() const { return w_; }

 private:
  index_t n_, w_;
  std::vector<double> data_;
};

// Similarity A <- R A R^T with R = [c s; -s c] in plane (p, p + 1), chosen so
// that entry (p + 1, col) becomes zero. The tracked rows of P pick up R^T.
void rotate_zero(SymBand& a, index_t p, index_t col, DenseMatrix& tracked) {
  const index_t q = p + 1;
  const double x = a.get(p, col);
  const double y = a.get(q, col);
  if (y == 0.0) return;
  const double r = std::hypot(x, y);
  const double c = x / r;
  const double s = y / r;

  const index_t n = a.n();
  const index_t w = a.w();
  const index_t lo = p >= w ? p - w : 0;
  const index_t hi = std::min(n - 1, q + w);
  for (index_t t = lo; t <= hi; ++t) {
    if (t == p || t == q) continue;
    const double xp = a.get(t, p);
    const double yq = a.get(t, q);
    if (xp == 0.0 && yq == 0.0) continue;
    a.set(t, p, c * xp + s * yq);
    a.set(t, q, -s * xp + c * yq);
  }
  a.set(q, col, 0.0);

  const double app = a.get(p, p), aqq = a.get(q, q), apq = a.get(p, q);
  a.set(p, p, c * c * app + 2.0 * c * s * apq + s * s * aqq);
  a.set(q, q, s * s * app - 2.0 * c * s * apq + c * c * aqq);
  a.set(q, p, c * s * (aqq - app) + (c * c - s * s) * apq);

  double* tp = tracked.col(p);
  double* tq = tracked.col(q);
  for (index_t i = 0; i < tracked.rows(); ++i) {
    const double u = tp[i], v = tq[i];
    tp[i] = c * u + s * v;
    tq[i] = -s * u + c * v;
  }
}

void sort_ascending(std::vector<double>& d, DenseMatrix& z) {
  const index_t n = d.size();
  std::vector<index_t> order(n);
  std::iota(order.begin(), order.end(), index_t{0});
  std::stable_sort(order.begin(), order.end(), [&](index_t a, index_t b) { return d[a] < d[b]; });
  if (std::is_sorted(order.begin(), order.end())) return;
  std::vector<double> ds(n);
  DenseMatrix zs(z.rows(), z.cols());
  for (index_t j = 0; j < n; ++j) {
    ds[j] = d[order[j]];
    std::copy_n(z.col(order[j]), z.rows(), zs.col(j));
  }
  d = std::move(ds);
  z = std::move(zs);
}

}  // namespace

// ---------------------------------------------------------------------------
// BlockTridiagonal

BlockTridiagonal::BlockTridiagonal(std::vector<DenseMatrix> diag, std::vector<DenseMatrix> offdiag) {
  if (diag.empty()) throw DimensionError("BlockTridiagonal needs at least one block");
  if (offdiag.size() + 1 != diag.size())
    throw DimensionError("BlockTridiagonal: need exactly one off-diagonal block fewer than diagonal");
  block_size_ = diag.front().rows();
  append(std::move(diag.front()));
  for (index_t i = 1; i < diag.size(); ++i) append(std::move(offdiag[i - 1]), std::move(diag[i]));
}

void BlockTridiagonal::append(DenseMatrix diag) {
  if (!diag_.empty()) throw DimensionError("BlockTridiagonal::append: coupling block required");
  if (block_size_ == 0) block_size_ = diag.rows();
  if (diag.rows() != block_size_ || diag.cols() != block_size_)
    throw DimensionError("BlockTridiagonal: diagonal block has wrong size");
  diag_.push_back(std::move(diag));
}

void BlockTridiagonal::append(DenseMatrix below, DenseMatrix diag) {
  if (diag_.empty()) {
    append(std::move(diag));
    return;
  }
  if (diag.rows() != block_size_ || diag.cols() != block_size_ || below.rows() != block_size_ ||
      below.cols() != block_size_)
    throw DimensionError("BlockTridiagonal: block has wrong size");
  offdiag_.push_back(std::move(below));
  diag_.push_back(std::move(diag));
}

BlockTridiagonal BlockTridiagonal::leading(index_t blocks) const {
  if (blocks == 0 || blocks > diag_.size()) throw DimensionError("leading: bad block count");
  BlockTridiagonal t(block_size_);
  t.diag_.assign(diag_.begin(), diag_.begin() + static_cast<std::ptrdiff_t>(blocks));
  t.offdiag_.assign(offdiag_.begin(), offdiag_.begin() + static_cast<std::ptrdiff_t>(blocks - 1));
  return t;
}

double BlockTridiagonal::entry(index_t i, index_t j) const {
  const index_t b = block_size_;
  const index_t bi = i / b, bj = j / b;
  if (bi == bj) return diag_[bi](i % b, j % b);
  if (bi == bj + 1) return offdiag_[bj](i % b, j % b);
  if (bj == bi + 1) return offdiag_[bi](j % b, i % b);
  return 0.0;
}

DenseMatrix BlockTridiagonal::to_dense() const {
  const index_t n = dim();
  const index_t b = block_size_;
  DenseMatrix d(n, n);
  for (index_t k = 0; k < diag_.size(); ++k) {
    d.set_block(k * b, k * b, diag_[k]);
    if (k + 1 < diag_.size()) {
      d.set_block((k + 1) * b, k * b, offdiag_[k]);
      d.set_block(k * b, (k + 1) * b, offdiag_[k].transpose());
    }
  }
  return d;
}

double BlockTridiagonal::frobenius_norm() const {
  double s = 0.0;
  for (const auto& d : diag_) s += std::pow(d.frobenius_norm(), 2);
  for (const auto& o : offdiag_) s += 2.0 * std::pow(o.frobenius_norm(), 2);
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// QR

QrResult economy_qr(const DenseMatrix& w, double rank_tol) {
  const index_t n = w.rows(), k = w.cols();
  if (n < k) throw DimensionError("economy_qr: more columns than rows");
  if (!w.all_finite()) throw Error("economy_qr: non-finite input");

  DenseMatrix a = w;
  DenseMatrix vs(n, k);  // Householder vectors, v_j stored in rows j..n-1
  std::vector<double> betas(k, 0.0);

  for (index_t j = 0; j < k; ++j) {
    double* aj = a.col(j);
    const double norm = norm2(aj + j, n - j);
    if (norm == 0.0) continue;
    const double alpha = -std::copysign(norm, aj[j]);
    double* v = vs.col(j);
    std::copy(aj + j, aj + n, v + j);
    v[j] -= alpha;
    const double vtv = norm2(v + j, n - j);
    const double beta = 2.0 / (vtv * vtv);
    betas[j] = beta;
    for (index_t c = j + 1; c < k; ++c) {
      double* ac = a.col(c);
      double dot = 0.0;
      for (index_t i = j; i < n; ++i) dot += v[i] * ac[i];
      const double t = beta * dot;
      for (index_t i = j; i < n; ++i) ac[i] -= t * v[i];
    }
    aj[j] = alpha;
    std::fill(aj + j + 1, aj + n, 0.0);
  }

  QrResult out;
  out.r = DenseMatrix(k, k);
  for (index_t j = 0; j < k; ++j)
    for (index_t i = 0; i <= j; ++i) out.r(i, j) = a(i, j);

  out.q = DenseMatrix::identity(n, k);
  for (index_t jj = k; jj-- > 0;) {
    if (betas[jj] == 0.0) continue;
    const double* v = vs.col(jj);
    for (index_t c = jj; c < k; ++c) {
      double* qc = out.q.col(c);
      double dot = 0.0;
      for (index_t i = jj; i < n; ++i) dot += v[i] * qc[i];
      const double t = betas[jj] * dot;
      for (index_t i = jj; i < n; ++i) qc[i] -= t * v[i];
    }
  }

  for (index_t j = 0; j < k; ++j) {
    if (out.r(j, j) < 0.0) {
      for (index_t c = j; c < k; ++c) out.r(j, c) = -out.r(j, c);
      for (index_t i = 0; i < n; ++i) out.q(i, j) = -out.q(i, j);
    }
  }

  const double wnorm = w.frobenius_norm();
  double min_pivot = std::numeric_limits<double>::infinity();
  for (index_t j = 0; j < k; ++j) min_pivot = std::min(min_pivot, std::abs(out.r(j, j)));
  out.min_pivot_ratio = (wnorm > 0.0 && k > 0) ? min_pivot / wnorm : 0.0;
  out.rank_deficient = k > 0 && out.min_pivot_ratio < rank_tol;
  return out;
}

// ---------------------------------------------------------------------------
// Band reduction

BandReduction band_tridiagonalize_rows(const BlockTridiagonal& t, std::span<const index_t> rows) {
  const index_t k = t.dim();
  if (k == 0) throw DimensionError("band_tridiagonalize: empty matrix");
  for (index_t b = 0; b < t.num_blocks(); ++b) {
    if (!t.diag(b).all_finite() || (b + 1 < t.num_blocks() && !t.offdiag(b).all_finite()))
      throw Error("band_tridiagonalize: non-finite input");
  }

  BandReduction out;
  out.tracked = DenseMatrix(rows.size(), k);
  for (index_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= k) throw DimensionError("band_tridiagonalize: tracked row out of range");
    out.tracked(i, rows[i]) = 1.0;
  }

  // Lanczos off-diagonal blocks are upper triangular (half-bandwidth l), but
  // general coupling blocks reach 2l - 1; measure what is actually there.
  const index_t l = t.block_size();
  index_t band = 0;
  for (index_t b = 0; b < t.num_blocks(); ++b) {
    const DenseMatrix& d = t.diag(b);
    for (index_t j = 0; j < l; ++j)
      for (index_t i = j + 1; i < l; ++i)
        if (d(i, j) != 0.0) band = std::max(band, i - j);
    if (b + 1 == t.num_blocks()) continue;
    const DenseMatrix& o = t.offdiag(b);
    for (index_t j = 0; j < l; ++j)
      for (index_t i = 0; i < l; ++i)
        if (o(i, j) != 0.0) band = std::max(band, l + i - j);
  }
  const index_t bw = std::min(band, k - 1);
  SymBand a(k, bw + 1);
  for (index_t j = 0; j < k; ++j)
    for (index_t i = j; i <= std::min(k - 1, j + bw); ++i) a.set(i, j, t.entry(i, j));

  if (bw > 1) {
    for (index_t j = 0; j + 2 < k; ++j) {
      for (index_t i = std::min(j + bw, k - 1); i >= j + 2; --i) {
        if (a.get(i, j) == 0.0) continue;
        rotate_zero(a, i - 1, j, out.tracked);
        // Chase the bulge created at (i + bw, i - 1) off the end of the band.
        for (index_t r = i + bw; r < k; r += bw) {
          const index_t col = r - bw - 1;
          if (a.get(r, col) == 0.0) break;
          rotate_zero(a, r - 1, col, out.tracked);
        }
      }
    }
  }

  out.f.diag.resize(k);
  out.f.offdiag.resize(k - 1);
  for (index_t i = 0; i < k; ++i) out.f.diag[i] = a.get(i, i);
  for (index_t i = 0; i + 1 < k; ++i) out.f.offdiag[i] = a.get(i + 1, i);
  return out;
}

namespace {
std::vector<index_t> first_last_rows(const BlockTridiagonal& t) {
  const index_t l = t.block_size(), k = t.dim();
  std::vector<index_t> rows(2 * l);
  for (index_t i = 0; i < l; ++i) {
    rows[i] = i;
    rows[l + i] = k - l + i;
  }
  return rows;
}
}  // namespace

BandTridiagonalization band_tridiagonalize(const BlockTridiagonal& t) {
  const index_t l = t.block_size();
  const auto rows = first_last_rows(t);
  BandReduction red = band_tridiagonalize_rows(t, rows);
  return {std::move(red.f), red.tracked.rows_range(0, l), red.tracked.rows_range(l, l)};
}

// ---------------------------------------------------------------------------
// Tridiagonal QL

std::vector<double> tridiag_eig_apply(std::span<const double> diag, std::span<const double> offdiag,
                                      DenseMatrix& z) {
  const index_t n = diag.size();
  if (n == 0) throw DimensionError("tridiagonal eigensolver: empty input");
  if (offdiag.size() + 1 != n) throw DimensionError("tridiagonal eigensolver: inconsistent lengths");
  if (z.cols() != n) throw DimensionError("tridiagonal eigensolver: z has wrong column count");

  std::vector<double> d(diag.begin(), diag.end());
  std::vector<double> e(n, 0.0);
  std::copy(offdiag.begin(), offdiag.end(), e.begin());
  for (double v : d)
    if (!std::isfinite(v)) throw Error("tridiagonal eigensolver: non-finite input");
  for (double v : e)
    if (!std::isfinite(v)) throw Error("tridiagonal eigensolver: non-finite input");

  // QL converges from the top down and stalls on graded matrices whose large
  // entries sit at the top (as after tridiagonalizing a decaying reduced
  // solution). Flip such a matrix; the columns of z are flipped with it.
  const index_t zr = z.rows();
  if (std::abs(d[n - 1]) < std::abs(d[0])) {
    std::reverse(d.begin(), d.end());
    std::reverse(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(n - 1));
    for (index_t j = 0; j < n / 2; ++j) std::swap_ranges(z.col(j), z.col(j) + zr, z.col(n - 1 - j));
  }
  // Off-diagonals below eps ||T|| are dropped even when the neighbouring
  // diagonal entries are tiny too; otherwise a block of roundoff-sized
  // entries (the tail of a decaying reduced solution) may never split.
  double norm = 0.0;
  for (index_t i = 0; i < n; ++i) norm = std::max(norm, std::abs(d[i]) + std::abs(e[i]) + (i > 0 ? std::abs(e[i - 1]) : 0.0));
  const double floor = kEps * norm;
  for (index_t l = 0; l < n; ++l) {
    int iter = 0;
    for (;;) {
      index_t m = l;
      for (; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= kEps * dd || std::abs(e[m]) <= floor) break;
      }
      if (m == l) break;
      if (++iter > kQlMaxIterations)
        throw ConvergenceError("tridiagonal eigensolver: no convergence after 30 iterations");

      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool deflated = false;
      for (index_t i = m; i-- > l;) {
        const double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          deflated = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        double* zi = z.col(i);
        double* zi1 = z.col(i + 1);
        for (index_t t = 0; t < zr; ++t) {
          const double fz = zi1[t];
          zi1[t] = s * zi[t] + c * fz;
          zi[t] = c * zi[t] - s * fz;
        }
      }
      if (deflated) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    }
  }
  sort_ascending(d, z);
  return d;
}

TridiagonalEigen sym_tridiag_eig(std::span<const double> diag, std::span<const double> offdiag) {
  TridiagonalEigen out;
  out.vectors = DenseMatrix::identity(diag.size());
  out.eigenvalues = tridiag_eig_apply(diag, offdiag, out.vectors);
  fix_column_signs(out.vectors);
  return out;
}

PartialSpectral partial_eig_blocktridiag(const BlockTridiagonal& t) {
  const index_t l = t.block_size();
  const auto rows = first_last_rows(t);
  BandReduction red = band_tridiagonalize_rows(t, rows);
  PartialSpectral out;
  out.eigenvalues = tridiag_eig_apply(red.f.diag, red.f.offdiag, red.tracked);
  // Deterministic column signs: largest-magnitude tracked entry positive.
  fix_column_signs(red.tracked);
  out.first_rows = red.tracked.rows_range(0, l);
  out.last_rows = red.tracked.rows_range(l, l);
  return out;
}

SymmetricEigen full_eig_blocktridiag(const BlockTridiagonal& t) {
  std::vector<index_t> rows(t.dim());
  std::iota(rows.begin(), rows.end(), index_t{0});
  BandReduction red = band_tridiagonalize_rows(t, rows);
  SymmetricEigen out;
  out.eigenvalues = tridiag_eig_apply(red.f.diag, red.f.offdiag, red.tracked);
  fix_column_signs(red.tracked);
  out.vectors = std::move(red.tracked);
  return out;
}

// ---------------------------------------------------------------------------
// Dense symmetric eigensolver

SymmetricEigen sym_eig(const DenseMatrix& a_in) {
  const index_t n = a_in.rows();
  if (a_in.cols() != n || n == 0) throw DimensionError("sym_eig: square nonempty matrix required");
  if (!a_in.all_finite()) throw Error("sym_eig: non-finite input");

  // Work on the symmetrized copy.
  DenseMatrix a(n, n);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = 0; i < n; ++i) a(i, j) = 0.5 * (a_in(i, j) + a_in(j, i));

  DenseMatrix vs(n, n);
  std::vector<double> betas(n, 0.0);
  std::vector<double> p(n), wv(n);

  for (index_t k = 0; k + 2 < n; ++k) {
    const index_t s = k + 1;
    double* x = a.col(k);
    const double norm = norm2(x + s, n - s);
    if (norm == 0.0) continue;
    const double alpha = -std::copysign(norm, x[s]);
    double* v = vs.col(k);
    std::copy(x + s, x + n, v + s);
    v[s] -= alpha;
    const double vn = norm2(v + s, n - s);
    const double beta = 2.0 / (vn * vn);
    betas[k] = beta;

    // p = beta * A22 v, using the symmetric trailing block column by column.
    std::fill(p.begin() + static_cast<std::ptrdiff_t>(s), p.end(), 0.0);
    for (index_t j = s; j < n; ++j) {
      const double vj = v[j];
      const double* aj = a.col(j);
      for (index_t i = s; i < n; ++i) p[i] += aj[i] * vj;
    }
    double ptv = 0.0;
    for (index_t i = s; i < n; ++i) {
      p[i] *= beta;
      ptv += p[i] * v[i];
    }
    const double kk = 0.5 * beta * ptv;
    for (index_t i = s; i < n; ++i) wv[i] = p[i] - kk * v[i];
    for (index_t j = s; j < n; ++j) {
      double* aj = a.col(j);
      const double vj = v[j], wj = wv[j];
      for (index_t i = s; i < n; ++i) aj[i] -= v[i] * wj + wv[i] * vj;
    }
    a(s, k) = alpha;
    a(k, s) = alpha;
    for (index_t i = s + 1; i < n; ++i) {
      a(i, k) = 0.0;
      a(k, i) = 0.0;
    }
  }

  std::vector<double> d(n), e(n - 1);
  for (index_t i = 0; i < n; ++i) d[i] = a(i, i);
  for (index_t i = 0; i + 1 < n; ++i) e[i] = a(i + 1, i);

  DenseMatrix q = DenseMatrix::identity(n);
  for (index_t k = n >= 2 ? n - 2 : 0; k-- > 0;) {
    if (betas[k] == 0.0) continue;
    const index_t s = k + 1;
    const double* v = vs.col(k);
    for (index_t c = s; c < n; ++c) {
      double* qc = q.col(c);
      double dot = 0.0;
      for (index_t i = s; i < n; ++i) dot += v[i] * qc[i];
      const double t = betas[k] * dot;
      for (index_t i = s; i < n; ++i) qc[i] -= t * v[i];
    }
  }

  SymmetricEigen out;
  out.eigenvalues = tridiag_eig_apply(d, e, q);
  fix_column_signs(q);
  out.vectors = std::move(q);
  return out;
}

// ---------------------------------------------------------------------------
// Truncated factorizations

TruncatedFactor truncated_spd_factor(const DenseMatrix& y, double eps) {
  const index_t n = y.rows();
  if (y.cols() != n) throw DimensionError("truncated_spd_factor: square matrix required");
  if (n == 0) return {DenseMatrix(0, 0), 0.0};
  const SymmetricEigen eig = sym_eig(y);
  const double largest = std::max(std::abs(eig.eigenvalues.front()), std::abs(eig.eigenvalues.back()));
  if (eig.eigenvalues.front() < -1e-10 * largest)
    throw IndefiniteError("truncated_spd_factor: matrix is significantly indefinite");

  // Eigenvalues ascending: drop from the front while the dropped mass fits.
  index_t dropped = 0;
  double mass2 = 0.0;
  while (dropped < n) {
    const double lam = eig.eigenvalues[dropped];
    const double next = mass2 + lam * lam;
    if (lam > 0.0 && std::sqrt(next) > eps) break;
    mass2 = next;
    ++dropped;
  }

  const index_t t = n - dropped;
  TruncatedFactor out;
  out.factor = DenseMatrix(n, t);
  out.discarded_mass = std::sqrt(mass2);
  // Non-increasing order: column c holds eigenpair n - 1 - c.
  for (index_t c = 0; c < t; ++c) {
    const index_t src = n - 1 - c;
    const double f = std::sqrt(eig.eigenvalues[src]);
    for (index_t i = 0; i < n; ++i) out.factor(i, c) = eig.vectors(i, src) * f;
  }
  return out;
}

Svd jacobi_svd(const DenseMatrix& y) {
  if (y.rows() < y.cols()) {
    Svd t = jacobi_svd(y.transpose());
    std::swap(t.u, t.v);
    return t;
  }
  const index_t r = y.rows(), c = y.cols();
  DenseMatrix u = y;
  DenseMatrix v = DenseMatrix::identity(c);
  constexpr int kMaxSweeps = 80;
  constexpr double tol = 4.0 * kEps;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (index_t p = 0; p + 1 < c; ++p) {
      for (index_t q = p + 1; q < c; ++q) {
        double* up = u.col(p);
        double* uq = u.col(q);
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (index_t i = 0; i < r; ++i) {
          alpha += up[i] * up[i];
          beta += uq[i] * uq[i];
          gamma += up[i] * uq[i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (index_t i = 0; i < r; ++i) {
          const double a = up[i], b = uq[i];
          up[i] = cs * a - sn * b;
          uq[i] = sn * a + cs * b;
        }
        double* vp = v.col(p);
        double* vq = v.col(q);
        for (index_t i = 0; i < c; ++i) {
          const double a = vp[i], b = vq[i];
          vp[i] = cs * a - sn * b;
          vq[i] = sn * a + cs * b;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(c);
  for (index_t j = 0; j < c; ++j) sigma[j] = norm2(u.col(j), r);
  std::vector<index_t> order(c);
  std::iota(order.begin(), order.end(), index_t{0});
  std::stable_sort(order.begin(), order.end(), [&](index_t a, index_t b) { return sigma[a] > sigma[b]; });

  Svd out;
  out.u = DenseMatrix(r, c);
  out.v = DenseMatrix(c, c);
  out.singular.resize(c);
  for (index_t j = 0; j < c; ++j) {
    const index_t src = order[j];
    out.singular[j] = sigma[src];
    if (sigma[src] > 0.0)
      for (index_t i = 0; i < r; ++i) out.u(i, j) = u(i, src) / sigma[src];
    std::copy_n(v.col(src), c, out.v.col(j));
  }
  return out;
}

TruncatedSvdFactor truncated_svd_factor(const DenseMatrix& y, double eps) {
  TruncatedSvdFactor out;
  if (y.empty()) {
    out.left = DenseMatrix(y.rows(), 0);
    out.right = DenseMatrix(y.cols(), 0);
    return out;
  }
  const Svd svd = jacobi_svd(y);
  const index_t p = svd.singular.size();
  index_t t = p;
  double mass2 = 0.0;
  while (t > 0) {
    const double sv = svd.singular[t - 1];
    const double next = mass2 + sv * sv;
    if (sv > 0.0 && std::sqrt(next) > eps) break;
    mass2 = next;
    --t;
  }
  out.discarded_mass = std::sqrt(mass2);
  out.left = DenseMatrix(y.rows(), t);
  out.right = DenseMatrix(y.cols(), t);
  for (index_t j = 0; j < t; ++j) {
    const double f = std::sqrt(svd.singular[j]);
    for (index_t i = 0; i < y.rows(); ++i) out.left(i, j) = svd.u(i, j) * f;
    for (index_t i = 0; i < y.cols(); ++i) out.right(i, j) = svd.v(i, j) * f;
  }
  return out;
}

}  // namespace krylyap
