// OpenMP kernels against their serial twins, and the fast residual against
// the naive path. Run with --benchmark_filter to pick a family.
#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "krylyap/dense_baseline.hpp"
#include "krylyap/kernels.hpp"
#include "krylyap/krylov_basis.hpp"
#include "krylyap/problems.hpp"
#include "krylyap/residual.hpp"

using namespace krylyap;

namespace {

DenseMatrix random_block(index_t rows, index_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  DenseMatrix m(rows, cols);
  for (index_t j = 0; j < cols; ++j)
    for (index_t i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

// Block width of a standard Krylov run with s = 4: the shape of one Lanczos
// orthogonalization on the larger test problems.
constexpr index_t kBlock = 4;

template <bool Parallel>
void BM_gemm_tn(benchmark::State& st) {
  const index_t n = st.range(0);
  const DenseMatrix v = random_block(n, kBlock, 1), w = random_block(n, kBlock, 2);
  DenseMatrix c(kBlock, kBlock);
  for (auto _ : st) {
    if constexpr (Parallel) kernels::gemm_tn(v, w, c);
    else kernels::serial::gemm_tn(v, w, c);
    benchmark::DoNotOptimize(c.data());
  }
  st.SetBytesProcessed(st.iterations() * 2 * n * kBlock * sizeof(double));
}

template <bool Parallel>
void BM_sub_mul(benchmark::State& st) {
  const index_t n = st.range(0);
  const DenseMatrix v = random_block(n, kBlock, 3), alpha = random_block(kBlock, kBlock, 4);
  DenseMatrix w = random_block(n, kBlock, 5);
  for (auto _ : st) {
    if constexpr (Parallel) kernels::sub_mul(w, v, alpha);
    else kernels::serial::sub_mul(w, v, alpha);
    benchmark::DoNotOptimize(w.data());
  }
  st.SetBytesProcessed(st.iterations() * 3 * n * kBlock * sizeof(double));
}

template <bool Parallel>
void BM_add_mul(benchmark::State& st) {
  const index_t n = st.range(0);
  const DenseMatrix v = random_block(n, kBlock, 6), b = random_block(kBlock, 16, 7);
  DenseMatrix z(n, 16);
  for (auto _ : st) {
    if constexpr (Parallel) kernels::add_mul(z, v, b);
    else kernels::serial::add_mul(z, v, b);
    benchmark::DoNotOptimize(z.data());
  }
}

template <bool Parallel>
void BM_csr_apply(benchmark::State& st) {
  const SparseSymmetric a = problems::gen_fd2d(problems::Kind::fd2d_exp, st.range(0));
  const DenseMatrix x = random_block(a.n(), kBlock, 8);
  DenseMatrix y(a.n(), kBlock);
  for (auto _ : st) {
    if constexpr (Parallel) kernels::csr_apply(a.row_ptr(), a.col_idx(), a.values(), x, y);
    else kernels::serial::csr_apply(a.row_ptr(), a.col_idx(), a.values(), x, y);
    benchmark::DoNotOptimize(y.data());
  }
  st.SetItemsProcessed(st.iterations() * a.nnz() * kBlock);
}

// Projected data of a real Lanczos run on fd2d-exp, cached per size so the
// setup is not repeated for every benchmark.
struct Projection {
  ProjectionState state;
  PartialSpectral spectral;
};

const Projection& projection(index_t ell_m) {
  static std::map<index_t, Projection> cache;
  auto it = cache.find(ell_m);
  if (it != cache.end()) return it->second;
  const index_t s = 4;
  SparseOperator op(problems::gen_fd2d(problems::Kind::fd2d_exp, 150));
  const DenseMatrix c = problems::gen_rhs(op.dim(), s, 1, true);
  KrylovStart k = init_basis(op, c, Space::standard, Storage::windowed);
  while (k.state.t.dim() < ell_m) krylov_step(op, k.window, k.state);
  Projection p{k.state, partial_eig_blocktridiag(k.state.t)};
  return cache.emplace(ell_m, std::move(p)).first->second;
}

void BM_residual_naive(benchmark::State& st) {
  const Projection& p = projection(st.range(0));
  for (auto _ : st) {
    const ResidualValue r =
        naive_residual_lyapunov(solve_reduced_lyapunov(p.state.t, p.state.gamma), p.state.tau_next, p.state.beta);
    benchmark::DoNotOptimize(r.res);
  }
}

void BM_residual_ctri(benchmark::State& st) {
  const Projection& p = projection(st.range(0));
  for (auto _ : st) {
    const ResidualValue r = ctri_lyapunov(p.state.t, p.state.gamma, p.state.tau_next);
    benchmark::DoNotOptimize(r.res);
  }
}

// The spectral data fixed, only the O(k^2) evaluation.
template <bool Parallel>
void BM_ctri_eval(benchmark::State& st) {
  const Projection& p = projection(st.range(0));
  for (auto _ : st) {
    const ResidualValue r = Parallel ? ctri_lyapunov(p.spectral, p.state.gamma, p.state.tau_next)
                                     : serial::ctri_lyapunov(p.spectral, p.state.gamma, p.state.tau_next);
    benchmark::DoNotOptimize(r.res);
  }
}

}  // namespace

BENCHMARK(BM_gemm_tn<false>)->Name("gemm_tn/serial")->Arg(1 << 14)->Arg(1 << 18);
BENCHMARK(BM_gemm_tn<true>)->Name("gemm_tn/omp")->Arg(1 << 14)->Arg(1 << 18);
BENCHMARK(BM_sub_mul<false>)->Name("sub_mul/serial")->Arg(1 << 14)->Arg(1 << 18);
BENCHMARK(BM_sub_mul<true>)->Name("sub_mul/omp")->Arg(1 << 14)->Arg(1 << 18);
BENCHMARK(BM_add_mul<false>)->Name("add_mul/serial")->Arg(1 << 14)->Arg(1 << 18);
BENCHMARK(BM_add_mul<true>)->Name("add_mul/omp")->Arg(1 << 14)->Arg(1 << 18);
BENCHMARK(BM_csr_apply<false>)->Name("csr_apply/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_csr_apply<true>)->Name("csr_apply/omp")->Arg(128)->Arg(512);
BENCHMARK(BM_ctri_eval<false>)->Name("ctri_eval/serial")->Arg(200)->Arg(800)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ctri_eval<true>)->Name("ctri_eval/omp")->Arg(200)->Arg(800)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_residual_naive)->Name("residual/naive")->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_residual_ctri)->Name("residual/ctri")->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
