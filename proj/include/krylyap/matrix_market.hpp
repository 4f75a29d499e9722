#pragma once

#include <filesystem>
#include <iosfwd>

#include "krylyap/dense_matrix.hpp"
#include "krylyap/sparse.hpp"

// Matrix Market I/O. Sparse symmetric matrices use the coordinate format
// (`symmetric` or `general`, real or integer field); dense blocks use the
// array format. Values are written with 17 significant digits so a write/read
// round trip is exact.
namespace krylyap::mm {

SparseSymmetric read_sparse(std::istream& in);
SparseSymmetric read_sparse(const std::filesystem::path& path);
void write_sparse(std::ostream& out, const SparseSymmetric& a);
void write_sparse(const std::filesystem::path& path, const SparseSymmetric& a);

// Accepts the array format, and coordinate `general` for convenience.
DenseMatrix read_dense(std::istream& in);
DenseMatrix read_dense(const std::filesystem::path& path);
void write_dense(std::ostream& out, const DenseMatrix& a);
void write_dense(const std::filesystem::path& path, const DenseMatrix& a);

}  // namespace krylyap::mm
