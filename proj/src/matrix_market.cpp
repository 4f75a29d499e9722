#include "krylyap/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "krylyap/errors.hpp"

namespace krylyap::mm {

namespace {

struct Header {
  bool coordinate = false;
  bool symmetric = false;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

Header read_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("Matrix Market: empty input");
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || lower(object) != "matrix")
    throw FormatError("Matrix Market: missing '%%MatrixMarket matrix' banner");
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  Header h;
  if (format == "coordinate") {
    h.coordinate = true;
  } else if (format != "array") {
    throw FormatError("Matrix Market: unknown format '" + format + "'");
  }
  if (field != "real" && field != "integer" && field != "double")
    throw FormatError("Matrix Market: unsupported field '" + field + "' (real or integer only)");
  if (symmetry == "symmetric") {
    h.symmetric = true;
  } else if (symmetry != "general") {
    throw FormatError("Matrix Market: unsupported symmetry '" + symmetry + "'");
  }
  return h;
}

// Next non-comment, non-blank line.
bool data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos || line[p] == '%') continue;
    return true;
  }
  return false;
}

class Fields {
 public:
  explicit Fields(const std::string& s) : s_(s) {}

  template <class T>
  T next(const char* what) {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    T v{};
    const char* b = s_.data() + pos_;
    const char* e = s_.data() + s_.size();
    // from_chars rejects a leading '+', which some writers emit.
    if (b < e && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || (ptr < e && !std::isspace(static_cast<unsigned char>(*ptr))))
      throw FormatError(std::string("Matrix Market: cannot parse ") + what + " in line '" + s_ + "'");
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  return out;
}

struct Coordinate {
  index_t rows = 0, cols = 0;
  std::vector<Triplet> entries;
};

Coordinate read_coordinate_body(std::istream& in) {
  std::string line;
  if (!data_line(in, line)) throw FormatError("Matrix Market: missing size line");
  Fields sz(line);
  Coordinate c;
  c.rows = sz.next<index_t>("row count");
  c.cols = sz.next<index_t>("column count");
  const auto nnz = sz.next<index_t>("entry count");
  c.entries.reserve(nnz);
  for (index_t k = 0; k < nnz; ++k) {
    if (!data_line(in, line)) throw FormatError("Matrix Market: fewer entries than announced");
    Fields f(line);
    const auto i = f.next<index_t>("row index");
    const auto j = f.next<index_t>("column index");
    const auto v = f.next<double>("value");
    if (i < 1 || j < 1 || i > c.rows || j > c.cols)
      throw FormatError("Matrix Market: index out of range in line '" + line + "'");
    c.entries.push_back({i - 1, j - 1, v});
  }
  return c;
}

}  // namespace

SparseSymmetric read_sparse(std::istream& in) {
  const Header h = read_header(in);
  if (!h.coordinate) throw FormatError("Matrix Market: sparse matrices must use the coordinate format");
  Coordinate c = read_coordinate_body(in);
  if (c.rows != c.cols) throw DimensionError("Matrix Market: symmetric matrix must be square");
  if (h.symmetric) {
    for (const Triplet& t : c.entries)
      if (t.row < t.col) throw FormatError("Matrix Market: symmetric file has an entry above the diagonal");
    return SparseSymmetric::from_triangle(c.rows, c.entries);
  }
  return SparseSymmetric::from_triplets(c.rows, c.entries);
}

SparseSymmetric read_sparse(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_sparse(in);
}

void write_sparse(std::ostream& out, const SparseSymmetric& a) {
  const auto lower = a.lower_triplets();
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << a.n() << ' ' << a.n() << ' ' << lower.size() << '\n';
  for (const Triplet& t : lower) out << t.row + 1 << ' ' << t.col + 1 << ' ' << format_double(t.value) << '\n';
}

void write_sparse(const std::filesystem::path& path, const SparseSymmetric& a) {
  auto out = open_out(path);
  write_sparse(out, a);
}

DenseMatrix read_dense(std::istream& in) {
  const Header h = read_header(in);
  if (h.coordinate) {
    const Coordinate c = read_coordinate_body(in);
    DenseMatrix m(c.rows, c.cols);
    for (const Triplet& t : c.entries) {
      m(t.row, t.col) += t.value;
      if (h.symmetric && t.row != t.col) m(t.col, t.row) += t.value;
    }
    return m;
  }
  std::string line;
  if (!data_line(in, line)) throw FormatError("Matrix Market: missing size line");
  Fields sz(line);
  const auto rows = sz.next<index_t>("row count");
  const auto cols = sz.next<index_t>("column count");
  DenseMatrix m(rows, cols);
  // Column-major; symmetric arrays list the lower triangle only.
  for (index_t j = 0; j < cols; ++j) {
    for (index_t i = h.symmetric ? j : 0; i < rows; ++i) {
      if (!data_line(in, line)) throw FormatError("Matrix Market: fewer array values than announced");
      Fields f(line);
      m(i, j) = f.next<double>("value");
      if (h.symmetric) m(j, i) = m(i, j);
    }
  }
  return m;
}

DenseMatrix read_dense(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dense(in);
}

void write_dense(std::ostream& out, const DenseMatrix& a) {
  out << "%%MatrixMarket matrix array real general\n";
  out << a.rows() << ' ' << a.cols() << '\n';
  for (index_t j = 0; j < a.cols(); ++j)
    for (index_t i = 0; i < a.rows(); ++i) out << format_double(a(i, j)) << '\n';
}

void write_dense(const std::filesystem::path& path, const DenseMatrix& a) {
  auto out = open_out(path);
  write_dense(out, a);
}

}  // namespace krylyap::mm
