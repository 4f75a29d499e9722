#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "krylyap/errors.hpp"
#include "krylyap/krylov_basis.hpp"
#include "krylyap/problems.hpp"
#include "krylyap/sparse.hpp"
#include "test_util.hpp"

using namespace krylyap;

namespace {

struct Built {
  BasisWindow window;
  ProjectionState state;
};

Built build(const LinearOperator& op, const DenseMatrix& c, Space space, Storage storage, index_t steps) {
  KrylovStart start = init_basis(op, c, space, storage);
  Built r{std::move(start.window), std::move(start.state)};
  for (index_t k = 0; k < steps; ++k) krylov_step(op, r.window, r.state);
  return r;
}

DenseMatrix explicit_projection(const LinearOperator& op, const DenseMatrix& v) {
  return matmul_tn(v, block_apply(op, v));
}

double orthogonality_error(const DenseMatrix& v) {
  return (matmul_tn(v, v) - DenseMatrix::identity(v.cols())).frobenius_norm();
}

double spectral_radius(const SparseSymmetric& a) {
  return testutil::eigen_eigenvalues(a.to_dense()).cwiseAbs().maxCoeff();
}

SparseOperator laplacian_2d(index_t grid, bool with_inverse) {
  problems::ProblemSpec spec;
  spec.kind = problems::Kind::laplacian2d;
  spec.n = grid;
  SparseOperator op(problems::gen_operator(spec));
  if (with_inverse) op.enable_inverse();
  return op;
}

}  // namespace

TEST(InitBasis, UnitVectorStart) {
  DenseMatrix c(5, 1);
  c(0, 0) = 1.0;
  const auto op = DiagonalOperator(std::vector<double>{-1, -2, -3, -4, -5});
  const KrylovStart st = init_basis(op, c, Space::standard, Storage::stored);
  EXPECT_EQ(st.window.block(1), c);
  EXPECT_EQ(st.state.gamma(0, 0), 1.0);
  EXPECT_EQ(st.state.ell, 1u);
  EXPECT_EQ(st.state.m, 0u);
}

TEST(InitBasis, NormalizedStartHasUnitGammaAndBeta) {
  const DenseMatrix c = problems::gen_rhs(30, 1, 7, true);
  const auto op = DiagonalOperator(std::vector<double>(30, -1.0));
  const KrylovStart st = init_basis(op, c, Space::standard, Storage::windowed);
  EXPECT_NEAR(std::abs(st.state.gamma(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(st.state.beta, 1.0, 1e-15);
  EXPECT_LE((matmul(st.window.block(1), st.state.gamma) - c).frobenius_norm(), 1e-15);
}

TEST(InitBasis, ExtendedReconstructsStartBlock) {
  auto op = laplacian_2d(6, true);
  const DenseMatrix c = problems::gen_rhs(36, 2, 3, false);
  const KrylovStart st = init_basis(op, c, Space::extended, Storage::stored);
  EXPECT_EQ(st.state.ell, 4u);
  EXPECT_LE((matmul(st.window.block(1), st.state.gamma) - c).frobenius_norm(), 1e-14 * c.frobenius_norm());
  // Lower half of gamma is zero: C lies in the first half of V_1.
  EXPECT_EQ(st.state.gamma.rows_range(2, 2).max_abs(), 0.0);
}

TEST(InitBasis, ExtendedCollinearDirectionsBreakDown) {
  DenseMatrix c(4, 1);
  c(0, 0) = 1.0;
  const auto op = DiagonalOperator(std::vector<double>(4, -1.0));
  EXPECT_THROW(init_basis(op, c, Space::extended, Storage::stored), BreakdownError);
}

TEST(InitBasis, RankDeficientStartRejected) {
  DenseMatrix c(6, 2);
  for (index_t i = 0; i < 6; ++i) c(i, 0) = c(i, 1) = double(i + 1);
  const auto op = DiagonalOperator(std::vector<double>(6, -1.0));
  EXPECT_THROW(init_basis(op, c, Space::standard, Storage::stored), RankDeficiencyError);
  EXPECT_THROW(init_basis(op, DenseMatrix(5, 1, 1.0), Space::standard, Storage::stored), DimensionError);
}

TEST(LanczosStep, TwoByTwoHandComputation) {
  DenseMatrix c(2, 1);
  c(0, 0) = c(1, 0) = 1.0 / std::sqrt(2.0);
  const auto op = DiagonalOperator(std::vector<double>{-1, -2});
  KrylovStart st = init_basis(op, c, Space::standard, Storage::stored);
  lanczos_step(op, st.window, st.state);
  EXPECT_NEAR(st.state.t.diag(0)(0, 0), -1.5, 1e-15);
  EXPECT_NEAR(std::abs(st.state.tau_next(0, 0)), 0.5, 1e-15);
}

TEST(LanczosStep, InvariantStartReportsBreakdownWithZeroCoupling) {
  DenseMatrix c(4, 1);
  c(0, 0) = 1.0;
  const auto op = DiagonalOperator(std::vector<double>(4, -1.0));
  KrylovStart st = init_basis(op, c, Space::standard, Storage::windowed);
  try {
    lanczos_step(op, st.window, st.state);
    FAIL() << "expected a breakdown";
  } catch (const BreakdownError& e) {
    EXPECT_TRUE(e.invariant());
  }
  EXPECT_TRUE(st.state.invariant);
  EXPECT_EQ(st.state.m, 1u);
  EXPECT_EQ(st.state.t.diag(0)(0, 0), -1.0);
  EXPECT_EQ(st.state.tau_next.max_abs(), 0.0);
  EXPECT_THROW(lanczos_step(op, st.window, st.state), Error);
}

TEST(LanczosStep, PartialRankLossIsAnError) {
  // span{C, AC} has dimension 3 < 4.
  DenseMatrix c(5, 2);
  c(0, 0) = c(2, 0) = 1.0;
  c(1, 1) = c(2, 1) = 1.0;
  const auto op = DiagonalOperator(std::vector<double>{-1, -2, -3, -4, -5});
  KrylovStart st = init_basis(op, c, Space::standard, Storage::stored);
  try {
    lanczos_step(op, st.window, st.state);
    FAIL() << "expected a breakdown";
  } catch (const BreakdownError& e) {
    EXPECT_FALSE(e.invariant());
  }
}

TEST(LanczosStep, LaplacianStoredModeOrthogonalityAndProjection) {
  const SparseOperator op(problems::laplacian1d(200, 1.0));
  const DenseMatrix c = problems::gen_rhs(200, 2, 11, true);
  const Built r = build(op, c, Space::standard, Storage::stored, 10);
  const DenseMatrix v = r.window.assemble(10);
  EXPECT_LE(orthogonality_error(v), 1e-10);
  EXPECT_LE((explicit_projection(op, v) - r.state.t.to_dense()).frobenius_norm(), 1e-10);
  EXPECT_EQ(r.state.t.to_dense(), r.state.t.to_dense().transpose());
  EXPECT_LE(r.state.local_orthogonality, 1e-12);
}

TEST(LanczosStep, ArnoldiRelationHolds) {
  // A V_m = V_m T_m + V_{m+1} tau E_m^T.
  const SparseOperator op(problems::laplacian1d(120, 1.0));
  const DenseMatrix c = problems::gen_rhs(120, 3, 5, true);
  const index_t m = 6, l = 3;
  const Built r = build(op, c, Space::standard, Storage::stored, m);
  const DenseMatrix v = r.window.assemble(m);
  DenseMatrix rel = block_apply(op, v) - matmul(v, r.state.t.to_dense());
  DenseMatrix corr = matmul(r.window.block(m + 1), r.state.tau_next);
  DenseMatrix last = rel.cols_range((m - 1) * l, l) - corr;
  EXPECT_LE(last.frobenius_norm(), 1e-12);
  EXPECT_LE(rel.cols_range(0, (m - 1) * l).frobenius_norm(), 1e-12);
}

TEST(LanczosStep, GlobalOrthogonalityOnWellConditionedOperator) {
  std::vector<double> d(1000);
  for (index_t i = 0; i < d.size(); ++i) d[i] = -1.0 - double(i) / double(d.size());
  const DiagonalOperator op(d);
  const DenseMatrix c = problems::gen_rhs(1000, 4, 17, true);
  const Built r = build(op, c, Space::standard, Storage::stored, 49);
  EXPECT_LE(orthogonality_error(r.window.assemble(50)), 1e-8);
}

TEST(ExtendedStep, GlobalOrthogonalityOnWellConditionedOperator) {
  std::vector<double> d(1000);
  for (index_t i = 0; i < d.size(); ++i) d[i] = -1.0 - double(i) / double(d.size());
  const DiagonalOperator op(d);
  const DenseMatrix c = problems::gen_rhs(1000, 2, 18, true);
  // The short extended recurrence amplifies roundoff along old V^(2)
  // directions by about ||A^{-1}|| / |H_{j+1,j}(2,2)| per step, so global
  // orthogonality is only kept for a few steps.
  const Built r = build(op, c, Space::extended, Storage::stored, 4);
  EXPECT_LE(orthogonality_error(r.window.assemble(5)), 1e-8);
}

TEST(LanczosStep, DeterministicAcrossRuns) {
  const SparseOperator op(problems::laplacian1d(300, 1.0));
  const DenseMatrix c = problems::gen_rhs(300, 2, 21, true);
  const Built a = build(op, c, Space::standard, Storage::stored, 12);
  const Built b = build(op, c, Space::standard, Storage::stored, 12);
  EXPECT_EQ(a.window.assemble(13), b.window.assemble(13));
  EXPECT_EQ(a.state.t.to_dense(), b.state.t.to_dense());
}

TEST(ExtendedStep, FirstStepMatchesExplicitProjection) {
  auto op = DiagonalOperator(std::vector<double>{-1, -2, -4, -8});
  const DenseMatrix c = problems::gen_rhs(4, 1, 2, false);
  KrylovStart st = init_basis(op, c, Space::extended, Storage::stored);
  extended_step(op, st.window, st.state);
  const DenseMatrix v1 = st.window.block(1);
  EXPECT_LE((explicit_projection(op, v1) - st.state.t.to_dense()).frobenius_norm(), 1e-13);
  // The coupling block agrees with V_2^T A V_1 as well.
  const DenseMatrix cross = matmul_tn(st.window.block(2), block_apply(op, v1));
  EXPECT_LE((cross - st.state.tau_next).frobenius_norm(), 1e-13);
}

TEST(ExtendedStep, LaplacianRecurrenceMatchesExplicitProjection) {
  auto op = laplacian_2d(20, true);
  const DenseMatrix c = problems::gen_rhs(400, 1, 4, true);
  const Built r = build(op, c, Space::extended, Storage::stored, 5);
  const DenseMatrix v = r.window.assemble(5);
  EXPECT_LE(orthogonality_error(v), 1e-10);
  EXPECT_LE((explicit_projection(op, v) - r.state.t.to_dense()).frobenius_norm(), 1e-9);
}

TEST(ExtendedStep, CouplingBlocksHaveZeroLowerHalf) {
  SparseOperator op(problems::gen_fd2d(problems::Kind::fd2d_exp, 16));
  op.enable_inverse();
  const DenseMatrix c = problems::gen_rhs(256, 2, 8, true);
  KrylovStart st = init_basis(op, c, Space::extended, Storage::windowed);
  for (int k = 0; k < 8; ++k) {
    extended_step(op, st.window, st.state);
    const DenseMatrix& tau = st.state.tau_next;
    EXPECT_LE(tau.rows_range(2, 2).frobenius_norm(), 1e-12 * tau.frobenius_norm());
  }
  for (index_t i = 0; i + 1 < st.state.t.num_blocks(); ++i)
    EXPECT_LE(st.state.t.offdiag(i).rows_range(2, 2).frobenius_norm(), 1e-12 * st.state.t.offdiag(i).frobenius_norm());
}

TEST(ExtendedStep, ProjectionIdentityVariableCoefficients) {
  const SparseSymmetric a = problems::gen_fd2d(problems::Kind::fd2d_trig, 16);
  SparseOperator op(a);
  op.enable_inverse();
  const DenseMatrix c = problems::gen_rhs(256, 2, 9, true);
  const index_t m = 8;
  const Built r = build(op, c, Space::extended, Storage::stored, m);
  const DenseMatrix v = r.window.assemble(m);
  const DenseMatrix full = r.window.assemble(m + 1);
  // sin(xy) vanishes at the boundary, so this operator is badly conditioned;
  // only local orthogonality is promised here.
  EXPECT_LE(r.state.local_orthogonality, 1e-12);
  EXPECT_LE(orthogonality_error(full.cols_range(full.cols() - 12, 12)), 1e-12);
  EXPECT_LE((explicit_projection(op, v) - r.state.t.to_dense()).frobenius_norm(), 1e-9 * spectral_radius(a));
  const DenseMatrix cross = matmul_tn(r.window.block(m + 1), block_apply(op, r.window.block(m)));
  EXPECT_LE((cross - r.state.tau_next).frobenius_norm(), 1e-9 * spectral_radius(a));
}

TEST(StandardProjection, IdentityRelativeToOperatorNorm) {
  const SparseSymmetric a = problems::gen_fd2d(problems::Kind::fd2d_exp, 14);
  const SparseOperator op(a);
  const DenseMatrix c = problems::gen_rhs(196, 3, 10, true);
  const index_t m = 12;
  const Built r = build(op, c, Space::standard, Storage::stored, m);
  const DenseMatrix v = r.window.assemble(m);
  EXPECT_LE((explicit_projection(op, v) - r.state.t.to_dense()).frobenius_norm(), 1e-9 * spectral_radius(a));
}

TEST(BasisWindow, WindowedStandardPeakIsThreeBlocks) {
  const SparseOperator op(problems::laplacian1d(100, 1.0));
  for (index_t s : {1, 3}) {
    const Built r = build(op, problems::gen_rhs(100, s, 1, true), Space::standard, Storage::windowed, 10);
    EXPECT_EQ(r.window.peak_vectors(), 3 * s);
    EXPECT_EQ(r.window.first(), 9u);
    EXPECT_THROW(r.window.block(8), Error);
    const Built st = build(op, problems::gen_rhs(100, s, 1, true), Space::standard, Storage::stored, 10);
    EXPECT_EQ(st.window.peak_vectors(), 11 * s);
  }
}

TEST(BasisWindow, WindowedExtendedKeepsSecondHalves) {
  auto op = laplacian_2d(8, true);
  const Built r = build(op, problems::gen_rhs(64, 1, 1, true), Space::extended, Storage::windowed, 5);
  EXPECT_EQ(r.window.stored_half_vectors(), 6u);
  EXPECT_EQ(r.window.peak_vectors(), 6u + 6u);
}

TEST(Regenerate, StandardReplayIsBitIdentical) {
  const SparseOperator op(problems::laplacian1d(400, 1.0));
  const DenseMatrix c = problems::gen_rhs(400, 2, 12, true);
  const index_t m = 20;
  const Built stored = build(op, c, Space::standard, Storage::stored, m);
  const Built windowed = build(op, c, Space::standard, Storage::windowed, m);
  index_t visited = 0;
  regenerate_basis(op, windowed.state, windowed.window, [&](index_t j, const DenseMatrix& v) {
    EXPECT_EQ(j, visited + 1);
    EXPECT_EQ(v, stored.window.block(j)) << "block " << j;
    ++visited;
  });
  EXPECT_EQ(visited, m);
}

TEST(Regenerate, ExtendedReplayNeedsNoSolves) {
  SparseOperator with_inv = laplacian_2d(12, true);
  const SparseOperator without_inv = laplacian_2d(12, false);
  const DenseMatrix c = problems::gen_rhs(144, 2, 13, true);
  const index_t m = 6;
  const Built stored = build(with_inv, c, Space::extended, Storage::stored, m);
  const Built windowed = build(with_inv, c, Space::extended, Storage::windowed, m);
  index_t visited = 0;
  regenerate_basis(without_inv, windowed.state, windowed.window, [&](index_t j, const DenseMatrix& v) {
    EXPECT_EQ(v, stored.window.block(j)) << "block " << j;
    ++visited;
  });
  EXPECT_EQ(visited, m);
}

TEST(Regenerate, DetectsDivergingCoefficients) {
  const SparseOperator op(problems::laplacian1d(100, 1.0));
  Built r = build(op, problems::gen_rhs(100, 1, 3, true), Space::standard, Storage::windowed, 6);
  r.state.h_below[2](0, 0) *= 1.0 + 1e-6;
  EXPECT_THROW(regenerate_basis(op, r.state, r.window, [](index_t, const DenseMatrix&) {}), Error);
}
