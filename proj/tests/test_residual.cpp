#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "krylyap/dense_baseline.hpp"
#include "krylyap/errors.hpp"
#include "krylyap/residual.hpp"
#include "test_util.hpp"

using namespace krylyap;
using testutil::rel_diff;
using testutil::to_eigen;

namespace {

BlockTridiagonal scalar_t(std::initializer_list<double> diag) {
  BlockTridiagonal t(1);
  bool first = true;
  for (double d : diag) {
    if (first)
      t.append(DenseMatrix{{d}});
    else
      t.append(DenseMatrix{{0.0}}, DenseMatrix{{d}});
    first = false;
  }
  return t;
}

// Y from Eigen's dense Sylvester-by-diagonalization, independent of the
// library's eigensolvers.
Eigen::MatrixXd oracle_sylvester(const Eigen::MatrixXd& t, const Eigen::MatrixXd& j, const Eigen::MatrixXd& rhs) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> et(t), ej(j);
  const Eigen::MatrixXd f = et.eigenvectors().transpose() * rhs * ej.eigenvectors();
  Eigen::MatrixXd yt(f.rows(), f.cols());
  for (Eigen::Index a = 0; a < f.rows(); ++a)
    for (Eigen::Index b = 0; b < f.cols(); ++b) yt(a, b) = -f(a, b) / (et.eigenvalues()(a) + ej.eigenvalues()(b));
  return et.eigenvectors() * yt * ej.eigenvectors().transpose();
}

Eigen::MatrixXd e1_rhs(index_t k1, index_t k2, const DenseMatrix& g1, const DenseMatrix& g2) {
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(k1, k2);
  rhs.topLeftCorner(g1.rows(), g2.rows()) = to_eigen(g1) * to_eigen(g2).transpose();
  return rhs;
}

double oracle_lyapunov(const BlockTridiagonal& t, const DenseMatrix& gamma, const DenseMatrix& tau) {
  const Eigen::MatrixXd et = to_eigen(t.to_dense());
  const Eigen::MatrixXd y = oracle_sylvester(et, et, e1_rhs(t.dim(), t.dim(), gamma, gamma));
  return std::sqrt(2.0) * (y.rightCols(tau.cols()) * to_eigen(tau).transpose()).norm();
}

double oracle_sylvester_res(const BlockTridiagonal& t, const BlockTridiagonal& j, const DenseMatrix& g1,
                            const DenseMatrix& g2, const DenseMatrix& tau, const DenseMatrix& iota) {
  const Eigen::MatrixXd y =
      oracle_sylvester(to_eigen(t.to_dense()), to_eigen(j.to_dense()), e1_rhs(t.dim(), j.dim(), g1, g2));
  const double a = (to_eigen(tau) * y.bottomRows(tau.cols())).norm();
  const double b = (y.rightCols(iota.cols()) * to_eigen(iota).transpose()).norm();
  return std::hypot(a, b);
}

}  // namespace

TEST(CtriLyapunov, ScalarEquation) {
  const double t = 0.7;
  const ResidualValue r = ctri_lyapunov(scalar_t({-1.0}), DenseMatrix{{1.0}}, DenseMatrix{{t}});
  EXPECT_NEAR(r.res, std::sqrt(2.0) * t / 2.0, 1e-15);
  EXPECT_NEAR(r.relative, r.res, 1e-15);
}

TEST(CtriLyapunov, RhsInFirstEigendirectionGivesZero) {
  const ResidualValue r = ctri_lyapunov(scalar_t({-1.0, -2.0}), DenseMatrix{{1.0}}, DenseMatrix{{0.9}});
  EXPECT_EQ(r.res, 0.0);
}

TEST(CtriLyapunov, RandomInstanceMatchesDenseOracle) {
  std::mt19937_64 rng(1);
  const BlockTridiagonal t = testutil::lanczos_block_tridiagonal(2, 10, rng, 100.0);
  const DenseMatrix gamma = testutil::random_matrix(2, 2, rng);
  const DenseMatrix tau = testutil::random_matrix(2, 2, rng);
  const double oracle = oracle_lyapunov(t, gamma, tau);
  EXPECT_LE(rel_diff(ctri_lyapunov(t, gamma, tau).res, oracle), 1e-11);
  const double beta = gamma.frobenius_norm();
  EXPECT_LE(rel_diff(ctri_lyapunov(t, gamma, tau).relative, oracle / (beta * beta)), 1e-11);
}

TEST(CtriLyapunov, AgreesWithNaivePathOverManySizes) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> pick_m(1, 40);
  for (int trial = 0; trial < 60; ++trial) {
    const index_t s = std::array<index_t, 3>{1, 2, 4}[trial % 3];
    index_t m = pick_m(rng);
    while (s * m > 300) --m;
    const BlockTridiagonal t = testutil::lanczos_block_tridiagonal(s, m, rng, testutil::kappa_for_steps(m));
    const DenseMatrix gamma = testutil::random_matrix(s, s, rng);
    const DenseMatrix tau = testutil::random_matrix(s, s, rng);
    const double fast = ctri_lyapunov(t, gamma, tau).res;
    const double naive = naive_residual_lyapunov(solve_reduced_lyapunov(t, gamma), tau, 1.0).res;
    EXPECT_LE(rel_diff(fast, naive), 1e-10) << "s=" << s << " m=" << m;
  }
}

TEST(CtriLyapunov, TruncatedCouplingGivesSameValue) {
  // Extended layout: l = 2s, coupling block with zero lower half.
  std::mt19937_64 rng(3);
  const index_t s = 2, l = 4;
  const BlockTridiagonal t = testutil::random_negdef_block_tridiagonal(l, 6, rng);
  DenseMatrix gamma(l, s);
  gamma.set_block(0, 0, testutil::random_matrix(s, s, rng));
  DenseMatrix tau(l, l);
  const DenseMatrix top = testutil::random_matrix(s, l, rng);
  tau.set_block(0, 0, top);
  EXPECT_LE(rel_diff(ctri_lyapunov(t, gamma, tau).res, ctri_lyapunov(t, gamma, top).res), 1e-13);
}

TEST(CtriLyapunov, ScalesQuadraticallyWithC) {
  std::mt19937_64 rng(4);
  const BlockTridiagonal t = testutil::random_negdef_block_tridiagonal(3, 7, rng);
  const DenseMatrix gamma = testutil::random_matrix(3, 3, rng);
  const DenseMatrix tau = testutil::random_matrix(3, 3, rng);
  const ResidualValue a = ctri_lyapunov(t, gamma, tau);
  // A power of two scales every intermediate exactly.
  const ResidualValue b4 = ctri_lyapunov(t, 4.0 * gamma, tau);
  EXPECT_EQ(b4.res, 16.0 * a.res);
  EXPECT_EQ(b4.relative, a.relative);
  const double alpha = 3.7;
  const ResidualValue b = ctri_lyapunov(t, alpha * gamma, tau);
  EXPECT_LE(rel_diff(b.res, alpha * alpha * a.res), 1e-12);
  EXPECT_LE(rel_diff(b.relative, a.relative), 1e-12);
}

TEST(CtriLyapunov, ZeroCouplingAndNonnegativity) {
  std::mt19937_64 rng(5);
  const BlockTridiagonal t = testutil::random_negdef_block_tridiagonal(2, 5, rng);
  const DenseMatrix gamma = testutil::random_matrix(2, 2, rng);
  EXPECT_EQ(ctri_lyapunov(t, gamma, DenseMatrix(2, 2)).res, 0.0);
  for (int k = 0; k < 10; ++k) EXPECT_GE(ctri_lyapunov(t, gamma, testutil::random_matrix(2, 2, rng)).res, 0.0);
}

TEST(CtriLyapunov, SerialAndParallelAreBitIdentical) {
  std::mt19937_64 rng(6);
  const BlockTridiagonal t = testutil::random_negdef_block_tridiagonal(4, 50, rng);
  const DenseMatrix gamma = testutil::random_matrix(4, 4, rng);
  const DenseMatrix tau = testutil::random_matrix(4, 4, rng);
  const PartialSpectral sp = partial_eig_blocktridiag(t);
  EXPECT_EQ(ctri_lyapunov(sp, gamma, tau).res, serial::ctri_lyapunov(sp, gamma, tau).res);
}

TEST(CtriLyapunov, IndefiniteProjectionRejected) {
  BlockTridiagonal t(1);
  t.append(DenseMatrix{{1.0}});
  t.append(DenseMatrix{{0.0}}, DenseMatrix{{-1.0}});
  EXPECT_THROW(ctri_lyapunov(t, DenseMatrix{{1.0}}, DenseMatrix{{1.0}}), IndefiniteError);
  EXPECT_THROW(ctri_lyapunov(t, DenseMatrix(2, 1), DenseMatrix{{1.0}}), DimensionError);
}

TEST(CtriSylvester, ScalarEquation) {
  const double a = 0.3, b = -1.1;
  const ResidualValue r =
      ctri_sylvester(scalar_t({-1.0}), scalar_t({-2.0}), DenseMatrix{{1.0}}, DenseMatrix{{1.0}}, DenseMatrix{{a}},
                     DenseMatrix{{b}});
  EXPECT_NEAR(r.res, std::hypot(a, b) / 3.0, 1e-15);
}

TEST(CtriSylvester, SymmetricInstanceReducesToLyapunov) {
  std::mt19937_64 rng(7);
  const BlockTridiagonal t = testutil::random_negdef_block_tridiagonal(2, 8, rng);
  const DenseMatrix gamma = testutil::random_matrix(2, 2, rng);
  const DenseMatrix tau = testutil::random_matrix(2, 2, rng);
  const double syl = ctri_sylvester(t, t, gamma, gamma, tau, tau).res;
  EXPECT_LE(rel_diff(syl, ctri_lyapunov(t, gamma, tau).res), 1e-12);
}

TEST(CtriSylvester, RandomInstanceMatchesDenseOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const BlockTridiagonal t = testutil::random_negdef_block_tridiagonal(2, 6, rng);
    const BlockTridiagonal j = testutil::random_negdef_block_tridiagonal(2, 4 + trial, rng);
    const DenseMatrix g1 = testutil::random_matrix(2, 2, rng), g2 = testutil::random_matrix(2, 2, rng);
    const DenseMatrix tau = testutil::random_matrix(2, 2, rng), iota = testutil::random_matrix(2, 2, rng);
    const double oracle = oracle_sylvester_res(t, j, g1, g2, tau, iota);
    EXPECT_LE(rel_diff(ctri_sylvester(t, j, g1, g2, tau, iota).res, oracle), 1e-11);
    const ReducedSolution y = solve_reduced_sylvester(t, j, g1, g2);
    EXPECT_LE(rel_diff(naive_residual_sylvester(y, tau, iota, 1.0).res, oracle), 1e-11);
  }
}

TEST(CtriSylvester, ScalesLinearlyWithC1AndSerialMatches) {
  std::mt19937_64 rng(9);
  const BlockTridiagonal t = testutil::random_negdef_block_tridiagonal(3, 5, rng);
  const BlockTridiagonal j = testutil::random_negdef_block_tridiagonal(3, 7, rng);
  const DenseMatrix g1 = testutil::random_matrix(3, 2, rng), g2 = testutil::random_matrix(3, 2, rng);
  const DenseMatrix tau = testutil::random_matrix(3, 3, rng), iota = testutil::random_matrix(3, 3, rng);
  const ResidualValue a = ctri_sylvester(t, j, g1, g2, tau, iota);
  const ResidualValue b = ctri_sylvester(t, j, 2.5 * g1, g2, tau, iota);
  EXPECT_LE(rel_diff(b.res, 2.5 * a.res), 1e-13);
  EXPECT_LE(rel_diff(b.relative, a.relative), 1e-13);
  const PartialSpectral st = partial_eig_blocktridiag(t), sj = partial_eig_blocktridiag(j);
  EXPECT_EQ(ctri_sylvester(st, sj, g1, g2, tau, iota).res, serial::ctri_sylvester(st, sj, g1, g2, tau, iota).res);
}

TEST(OneSided, ScalarEquation) {
  const double t = 0.45;
  const std::vector<double> ups{-2.0};
  const ResidualValue r = residual_one_sided(scalar_t({-1.0}), DenseMatrix{{t}}, DenseMatrix{{1.0}},
                                             DenseMatrix{{1.0}}, ups);
  EXPECT_NEAR(r.res, t / 3.0, 1e-15);
}

TEST(OneSided, SingleColumnMatchesSylvesterWithoutBSideTerm) {
  std::mt19937_64 rng(10);
  const BlockTridiagonal t = testutil::random_negdef_block_tridiagonal(1, 9, rng);
  const DenseMatrix g1 = testutil::random_matrix(1, 1, rng), c2 = testutil::random_matrix(1, 1, rng);
  const DenseMatrix tau = testutil::random_matrix(1, 1, rng);
  const std::vector<double> ups{-1.7};
  const double one = residual_one_sided(t, tau, g1, c2, ups).res;
  const double two = ctri_sylvester(t, scalar_t({-1.7}), g1, c2, tau, DenseMatrix{{0.0}}).res;
  EXPECT_LE(rel_diff(one, two), 1e-13);
}

TEST(OneSided, RandomInstanceMatchesDenseOracle) {
  std::mt19937_64 rng(11);
  const index_t s = 2, n2 = 7;
  const BlockTridiagonal t = testutil::random_negdef_block_tridiagonal(s, 5, rng);
  const Eigen::MatrixXd b = testutil::random_spectrum_matrix(n2, -3.0, -0.2, rng);
  const DenseMatrix g1 = testutil::random_matrix(s, s, rng), c2 = testutil::random_matrix(n2, s, rng);
  const DenseMatrix tau = testutil::random_matrix(s, s, rng);

  const Eigen::MatrixXd y = oracle_sylvester(to_eigen(t.to_dense()), b, [&] {
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(t.dim(), n2);
    rhs.topRows(s) = to_eigen(g1) * to_eigen(c2).transpose();
    return rhs;
  }());
  const double oracle = (to_eigen(tau) * y.bottomRows(s)).norm();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(b);
  const std::vector<double> ups(eb.eigenvalues().data(), eb.eigenvalues().data() + n2);
  const DenseMatrix c2_hat = testutil::from_eigen(eb.eigenvectors().transpose() * to_eigen(c2));
  const ResidualValue r = residual_one_sided(t, tau, g1, c2_hat, ups);
  EXPECT_LE(rel_diff(r.res, oracle), 1e-11);
  EXPECT_LE(rel_diff(r.relative, oracle / (g1.frobenius_norm() * c2.frobenius_norm())), 1e-11);
  const PartialSpectral st = partial_eig_blocktridiag(t);
  EXPECT_EQ(r.res, serial::residual_one_sided(st, tau, g1, c2_hat, ups).res);
}
