#include <gtest/gtest.h>

#include "krylyap/errors.hpp"
#include "krylyap/kernels.hpp"
#include "test_util.hpp"

using namespace krylyap;

// Row counts straddle the tile and chunk boundaries.
class KernelsAgree : public ::testing::TestWithParam<index_t> {};

TEST_P(KernelsAgree, GemmNn) {
  std::mt19937_64 rng(1);
  const index_t n = GetParam();
  const DenseMatrix a = testutil::random_matrix(n, 5, rng), b = testutil::random_matrix(5, 3, rng);
  DenseMatrix c1(n, 3), c2(n, 3);
  kernels::gemm_nn(a, b, c1);
  kernels::serial::gemm_nn(a, b, c2);
  EXPECT_EQ(c1, c2);
  EXPECT_LE((testutil::to_eigen(c1) - testutil::to_eigen(a) * testutil::to_eigen(b)).norm(),
            1e-13 * std::sqrt(double(n)));
}

TEST_P(KernelsAgree, GemmTn) {
  std::mt19937_64 rng(2);
  const index_t n = GetParam();
  const DenseMatrix a = testutil::random_matrix(n, 4, rng), b = testutil::random_matrix(n, 3, rng);
  DenseMatrix c1(4, 3), c2(4, 3);
  kernels::gemm_tn(a, b, c1);
  kernels::serial::gemm_tn(a, b, c2);
  EXPECT_EQ(c1, c2);
  EXPECT_LE((testutil::to_eigen(c1) - testutil::to_eigen(a).transpose() * testutil::to_eigen(b)).norm(),
            1e-12 * double(n));
}

TEST_P(KernelsAgree, SubMulAndAddMul) {
  std::mt19937_64 rng(3);
  const index_t n = GetParam();
  const DenseMatrix v = testutil::random_matrix(n, 4, rng), alpha = testutil::random_matrix(4, 2, rng);
  const DenseMatrix w0 = testutil::random_matrix(n, 2, rng);
  DenseMatrix w1 = w0, w2 = w0;
  kernels::sub_mul(w1, v, alpha);
  kernels::serial::sub_mul(w2, v, alpha);
  EXPECT_EQ(w1, w2);
  kernels::add_mul(w1, v, alpha);
  kernels::serial::add_mul(w2, v, alpha);
  EXPECT_EQ(w1, w2);
  EXPECT_LE((w1 - w0).frobenius_norm(), 1e-13 * std::sqrt(double(n)));
}

TEST_P(KernelsAgree, CsrApply) {
  const index_t n = GetParam();
  // Tridiagonal -2/1 stencil.
  std::vector<index_t> ptr{0}, idx;
  std::vector<double> val;
  for (index_t i = 0; i < n; ++i) {
    if (i > 0) idx.push_back(i - 1), val.push_back(1.0);
    idx.push_back(i), val.push_back(-2.0);
    if (i + 1 < n) idx.push_back(i + 1), val.push_back(1.0);
    ptr.push_back(idx.size());
  }
  std::mt19937_64 rng(4);
  const DenseMatrix x = testutil::random_matrix(n, 3, rng);
  DenseMatrix y1(n, 3), y2(n, 3);
  kernels::csr_apply(ptr, idx, val, x, y1);
  kernels::serial::csr_apply(ptr, idx, val, x, y2);
  EXPECT_EQ(y1, y2);
  EXPECT_DOUBLE_EQ(y1(1, 0), x(0, 0) - 2.0 * x(1, 0) + x(2, 0));
}

INSTANTIATE_TEST_SUITE_P(Sizes, KernelsAgree, ::testing::Values(3, 255, 257, 4096, 4097, 9000));

TEST(Kernels, ShapeMismatchThrows) {
  DenseMatrix c(2, 2);
  EXPECT_THROW(kernels::gemm_nn(DenseMatrix(2, 3), DenseMatrix(2, 2), c), DimensionError);
}
