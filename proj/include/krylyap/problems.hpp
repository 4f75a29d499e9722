#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>

#include "krylyap/dense_matrix.hpp"
#include "krylyap/sparse.hpp"

// Test operators and right-hand sides. Grids have n interior points per
// dimension on the unit square (cube), h = 1/(n+1), zero Dirichlet data.
// Node (i, j) maps to row i + n*j; in 3D the z index is outermost.
namespace krylyap::problems {

enum class Kind { fd2d_exp, fd2d_trig, fd3d_split, laplacian1d, laplacian2d };

Kind parse_kind(std::string_view name);
std::string_view kind_name(Kind k);

struct ProblemSpec {
  Kind kind = Kind::fd2d_exp;
  index_t n = 32;
  index_t s = 1;
  std::uint64_t seed = 1;
  bool normalize = true;
};

using Coefficient = std::function<double(double x, double y)>;

// (a(x,y) u_x)_x + (b(x,y) u_y)_y by the 5-point stencil with coefficients at
// the cell interfaces: the x coupling of nodes i and i+1 in row j uses
// a(x_{i+1/2}, y_j)/h^2.
SparseSymmetric fd2d(index_t n, const Coefficient& a, const Coefficient& b);

// fd2d_exp: a = exp(-xy), b = exp(xy). fd2d_trig: a = sin(xy), b = cos(xy).
// laplacian2d: a = b = 1.
SparseSymmetric gen_fd2d(Kind kind, index_t n);

// scale * tridiag(1, -2, 1).
SparseSymmetric laplacian1d(index_t n, double scale = 1.0);

// A: fd2d_exp on the (x, y) grid; B: 10 u_zz, i.e. 10/h^2 tridiag(1, -2, 1).
// The 3D operator is I (x) A + B (x) I.
std::pair<SparseSymmetric, SparseSymmetric> gen_fd3d_split(index_t n);

// n x s with entries uniform in (0, 1) from mt19937_64 seeded with `seed`,
// divided by the Frobenius norm when `normalize` is set.
DenseMatrix gen_rhs(index_t n, index_t s, std::uint64_t seed, bool normalize = true);

// Operator dimension of a problem with grid size n (n^2 for 2D and split).
index_t operator_dim(Kind kind, index_t n);

// The operator A described by spec (for fd3d_split: the 2D part).
SparseSymmetric gen_operator(const ProblemSpec& spec);

}  // namespace krylyap::problems
