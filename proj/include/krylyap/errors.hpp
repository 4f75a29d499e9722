#pragma once

#include <stdexcept>
#include <string>

namespace krylyap {

// Base of everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A block lost column rank (QR pivot below rank_tol). Deflation is not
// supported, so solvers abort on it.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

// Krylov breakdown: the new block W is rank deficient after orthogonalization.
// `invariant` is set when W vanished entirely, i.e. the space is A-invariant.
class BreakdownError : public RankDeficiencyError {
 public:
  BreakdownError(const std::string& what, bool invariant)
      : RankDeficiencyError(what), invariant_(invariant) {}
  bool invariant() const noexcept { return invariant_; }

 private:
  bool invariant_;
};

// lambda_i + lambda_j (or upsilon_j) numerically zero: data not definite.
class IndefiniteError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace krylyap
