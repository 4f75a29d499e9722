#include "krylyap/problems.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "krylyap/errors.hpp"

namespace krylyap::problems {

namespace {

void check_grid(index_t n) {
  if (n < 2) throw DimensionError("grid size n must be at least 2");
}

}  // namespace

Kind parse_kind(std::string_view name) {
  if (name == "fd2d-exp") return Kind::fd2d_exp;
  if (name == "fd2d-trig") return Kind::fd2d_trig;
  if (name == "fd3d-split") return Kind::fd3d_split;
  if (name == "laplacian1d") return Kind::laplacian1d;
  if (name == "laplacian2d") return Kind::laplacian2d;
  throw Error("unknown problem kind '" + std::string(name) +
              "' (expected fd2d-exp, fd2d-trig, fd3d-split, laplacian1d or laplacian2d)");
}

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::fd2d_exp: return "fd2d-exp";
    case Kind::fd2d_trig: return "fd2d-trig";
    case Kind::fd3d_split: return "fd3d-split";
    case Kind::laplacian1d: return "laplacian1d";
    case Kind::laplacian2d: return "laplacian2d";
  }
  return "?";
}

SparseSymmetric fd2d(index_t n, const Coefficient& a, const Coefficient& b) {
  check_grid(n);
  const double h = 1.0 / static_cast<double>(n + 1);
  const double ih2 = 1.0 / (h * h);
  auto at = [&](double k) { return k * h; };

  std::vector<Triplet> t;
  t.reserve(5 * n * n);
  for (index_t j = 0; j < n; ++j) {
    const double y = at(double(j + 1));
    for (index_t i = 0; i < n; ++i) {
      const double x = at(double(i + 1));
      const index_t row = i + n * j;
      const double west = a(at(double(i) + 0.5), y) * ih2;
      const double east = a(at(double(i) + 1.5), y) * ih2;
      const double south = b(x, at(double(j) + 0.5)) * ih2;
      const double north = b(x, at(double(j) + 1.5)) * ih2;
      t.push_back({row, row, -(west + east + south + north)});
      if (i > 0) t.push_back({row, row - 1, west});
      if (i + 1 < n) t.push_back({row, row + 1, east});
      if (j > 0) t.push_back({row, row - n, south});
      if (j + 1 < n) t.push_back({row, row + n, north});
    }
  }
  return SparseSymmetric::from_triplets(n * n, t);
}

SparseSymmetric gen_fd2d(Kind kind, index_t n) {
  switch (kind) {
    case Kind::fd2d_exp:
      return fd2d(n, [](double x, double y) { return std::exp(-x * y); },
                  [](double x, double y) { return std::exp(x * y); });
    case Kind::fd2d_trig:
      return fd2d(n, [](double x, double y) { return std::sin(x * y); },
                  [](double x, double y) { return std::cos(x * y); });
    case Kind::laplacian2d:
      return fd2d(n, [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
    default:
      throw Error("gen_fd2d: not a 2D kind");
  }
}

SparseSymmetric laplacian1d(index_t n, double scale) {
  if (n < 1) throw DimensionError("laplacian1d: n must be positive");
  std::vector<Triplet> t;
  for (index_t i = 0; i < n; ++i) {
    t.push_back({i, i, -2.0 * scale});
    if (i > 0) t.push_back({i, i - 1, scale});
    if (i + 1 < n) t.push_back({i, i + 1, scale});
  }
  return SparseSymmetric::from_triplets(n, t);
}

std::pair<SparseSymmetric, SparseSymmetric> gen_fd3d_split(index_t n) {
  check_grid(n);
  const double h = 1.0 / static_cast<double>(n + 1);
  return {gen_fd2d(Kind::fd2d_exp, n), laplacian1d(n, 10.0 / (h * h))};
}

DenseMatrix gen_rhs(index_t n, index_t s, std::uint64_t seed, bool normalize) {
  std::mt19937_64 rng(seed);
  DenseMatrix c(n, s);
  // 53 random bits mapped to the open interval (0, 1).
  for (index_t j = 0; j < s; ++j)
    for (index_t i = 0; i < n; ++i)
      c(i, j) = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  if (normalize) c *= 1.0 / c.frobenius_norm();
  return c;
}

index_t operator_dim(Kind kind, index_t n) { return kind == Kind::laplacian1d ? n : n * n; }

SparseSymmetric gen_operator(const ProblemSpec& spec) {
  switch (spec.kind) {
    case Kind::laplacian1d: {
      check_grid(spec.n);
      const double h = 1.0 / static_cast<double>(spec.n + 1);
      return laplacian1d(spec.n, 1.0 / (h * h));
    }
    case Kind::fd3d_split:
      return gen_fd3d_split(spec.n).first;
    default:
      return gen_fd2d(spec.kind, spec.n);
  }
}

}  // namespace krylyap::problems
