#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "krylyap/matrix_market.hpp"
#include "krylyap/problems.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace krylyap;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "krylyap");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Scratch {
 public:
  Scratch() {
    static int counter = 0;
    dir_ = fs::temp_directory_path() /
           ("krylyap_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Scratch() { fs::remove_all(dir_); }
  std::string operator/(const std::string& name) const { return (dir_ / name).string(); }
  std::string str() const { return dir_.string(); }

 private:
  fs::path dir_;
};

std::map<std::string, std::string> read_summary(const std::string& path) {
  std::ifstream f(path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream f(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST(Cli, SolveLyapLaplacian2dConverges) {
  Scratch dir;
  const Outcome r = run({"solve-lyap", "--problem", "laplacian2d", "--n", "32", "--s", "1", "--tol", "1e-6", "--verify",
                     "--out", dir.str()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  auto kv = read_summary(dir / "summary.txt");
  EXPECT_EQ(kv["converged"], "true");
  EXPECT_LE(std::stod(kv["final_relative_residual"]), 1e-6);
  // The factor really is a solution, not just a small projected residual.
  EXPECT_LE(std::stod(kv["verified_relative_residual"]), 1e-6 * (1 + 1e-6));
  const DenseMatrix z = mm::read_dense(fs::path(dir / "Z.mtx"));
  EXPECT_EQ(z.rows(), 1024);
  EXPECT_EQ(z.cols(), std::stol(kv["rank"]));

  const auto rows = read_csv(dir / "history.csv");
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"m", "space_dim", "relative_residual", "cum_basis_secs",
                                               "cum_residual_secs"}));
  EXPECT_EQ(rows.back()[0], kv["iterations"]);
}

TEST(Cli, HistoryRowsOnlyAtCheckedIterations) {
  Scratch dir;
  const Outcome r = run({"solve-lyap", "--problem", "fd2d-exp", "--n", "24", "--s", "2", "--check-period", "3",
                     "--out", dir.str()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto rows = read_csv(dir / "history.csv");
  ASSERT_GE(rows.size(), 3u);
  double prev_basis = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const long m = std::stol(rows[i][0]);
    EXPECT_EQ(std::stol(rows[i][1]), 2 * m);
    // The last row may be an invariant stop; every other one is a check.
    if (i + 1 < rows.size()) EXPECT_EQ(m % 3, 0);
    EXPECT_GE(std::stod(rows[i][3]), prev_basis);
    prev_basis = std::stod(rows[i][3]);
  }
}

TEST(Cli, AsymmetricInputNamesEntryPair) {
  Scratch dir;
  {
    std::ofstream a(dir / "A.mtx");
    a << "%%MatrixMarket matrix coordinate real general\n3 3 5\n1 1 -2\n2 2 -2\n3 3 -2\n1 2 0.5\n2 1 0.25\n";
    std::ofstream c(dir / "C.mtx");
    c << "%%MatrixMarket matrix array real general\n3 1\n1\n0\n0\n";
  }
  const Outcome r = run({"solve-lyap", "--A", dir / "A.mtx", "--C", dir / "C.mtx", "--out", dir.str()});
  EXPECT_NE(r.code, cli::kOk);
  EXPECT_NE(r.err.find("(1, 2)"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("(2, 1)"), std::string::npos) << r.err;
}

TEST(Cli, DimensionMismatchAndExclusiveInputs) {
  Scratch dir;
  ASSERT_EQ(run({"gen", "--problem", "laplacian1d", "--n", "10", "--out", dir.str()}).code, cli::kOk);
  {
    std::ofstream c(dir / "C9.mtx");
    c << "%%MatrixMarket matrix array real general\n9 1\n";
    for (int i = 0; i < 9; ++i) c << "1\n";
  }
  Outcome r = run({"solve-lyap", "--A", dir / "A.mtx", "--C", dir / "C9.mtx", "--out", dir.str()});
  EXPECT_EQ(r.code, cli::kFailure);
  EXPECT_NE(r.err.find("rows"), std::string::npos) << r.err;

  r = run({"solve-lyap", "--A", dir / "A.mtx", "--C", dir / "C.mtx", "--problem", "laplacian1d", "--out", dir.str()});
  EXPECT_EQ(r.code, cli::kFailure);
  r = run({"solve-lyap", "--out", dir.str()});
  EXPECT_EQ(r.code, cli::kFailure);
  r = run({"solve-lyap", "--problem", "laplacian2d", "--space", "krylov", "--out", dir.str()});
  EXPECT_EQ(r.code, cli::kUsage);
  r = run({"solve-lyap", "--problem", "laplacian2d", "--tol", "0", "--out", dir.str()});
  EXPECT_NE(r.code, cli::kOk);
}

TEST(Cli, NonConvergenceExitsWithTwo) {
  Scratch dir;
  const Outcome r = run({"solve-lyap", "--problem", "fd2d-exp", "--n", "40", "--max-m", "5", "--out", dir.str()});
  EXPECT_EQ(r.code, cli::kNotConverged);
  EXPECT_NE(r.err.find("no convergence"), std::string::npos);
  auto kv = read_summary(dir / "summary.txt");
  EXPECT_EQ(kv["converged"], "false");
  EXPECT_EQ(kv["iterations"], "5");
  EXPECT_TRUE(fs::exists(dir / "Z.mtx"));
}

TEST(Cli, WindowedAndStoredGiveSameFactor) {
  for (const std::string s : {"1", "3"}) {
    Scratch win, sto;
    const std::vector<std::string> base{"solve-lyap", "--problem", "fd2d-trig", "--n", "20", "--s", s, "--tol", "1e-8"};
    auto w = base, st = base;
    w.insert(w.end(), {"--storage", "windowed", "--out", win.str()});
    st.insert(st.end(), {"--storage", "stored", "--out", sto.str()});
    ASSERT_EQ(run(w).code, cli::kOk);
    ASSERT_EQ(run(st).code, cli::kOk);
    const DenseMatrix zw = mm::read_dense(fs::path(win / "Z.mtx"));
    const DenseMatrix zs = mm::read_dense(fs::path(sto / "Z.mtx"));
    ASSERT_EQ(zw.rows(), zs.rows());
    ASSERT_EQ(zw.cols(), zs.cols());
    double worst = 0, scale = 0;
    for (index_t j = 0; j < zw.cols(); ++j)
      for (index_t i = 0; i < zw.rows(); ++i) {
        worst = std::max(worst, std::abs(zw(i, j) - zs(i, j)));
        scale = std::max(scale, std::abs(zs(i, j)));
      }
    EXPECT_LE(worst, 1e-12 * scale);

    auto kw = read_summary(win / "summary.txt");
    auto ks = read_summary(sto / "summary.txt");
    const long sv = std::stol(s);
    const long m = std::stol(ks["iterations"]);
    EXPECT_EQ(kw["iterations"], ks["iterations"]);
    EXPECT_EQ(std::stol(kw["peak_basis_vectors"]), 3 * sv);
    EXPECT_EQ(std::stol(ks["peak_basis_vectors"]), sv * (m + 1));
  }
}

TEST(Cli, ConfigFileWithFlagOverride) {
  Scratch dir;
  {
    std::ofstream cfg(dir / "run.conf");
    cfg << "# generated problem\nproblem = fd2d-exp\nn = 16\ns = 2\ntol = 1e-3\nspace = extended\n";
  }
  Outcome r = run({"solve-lyap", "--config", dir / "run.conf", "--out", dir.str()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  auto kv = read_summary(dir / "summary.txt");
  EXPECT_EQ(kv["space"], "extended");
  EXPECT_EQ(kv["block_size"], "4");
  EXPECT_LE(std::stod(kv["final_relative_residual"]), 1e-3);
  const double loose = std::stod(kv["final_relative_residual"]);

  r = run({"solve-lyap", "--config", dir / "run.conf", "--tol", "1e-9", "--out", dir.str()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  kv = read_summary(dir / "summary.txt");
  EXPECT_EQ(kv["tol"], "1.0000000000000001e-09");
  EXPECT_LE(std::stod(kv["final_relative_residual"]), 1e-9);
  EXPECT_LT(std::stod(kv["final_relative_residual"]), loose);
}

TEST(Cli, GeneratedFilesSolveLikeInlineProblem) {
  Scratch gen, a, b;
  ASSERT_EQ(run({"gen", "--problem", "fd2d-exp", "--n", "18", "--s", "2", "--seed", "7", "--out", gen.str()}).code,
            cli::kOk);
  ASSERT_EQ(run({"solve-lyap", "--A", gen / "A.mtx", "--C", gen / "C.mtx", "--out", a.str()}).code, cli::kOk);
  ASSERT_EQ(run({"solve-lyap", "--problem", "fd2d-exp", "--n", "18", "--s", "2", "--seed", "7", "--out", b.str()})
                .code,
            cli::kOk);
  // 17 significant digits make the files exact, so both runs are identical.
  const DenseMatrix za = mm::read_dense(fs::path(a / "Z.mtx"));
  const DenseMatrix zb = mm::read_dense(fs::path(b / "Z.mtx"));
  ASSERT_EQ(za.cols(), zb.cols());
  for (index_t j = 0; j < za.cols(); ++j)
    for (index_t i = 0; i < za.rows(); ++i) ASSERT_EQ(za(i, j), zb(i, j));
}

TEST(Cli, MatrixMarketRoundTripIsExact) {
  Scratch dir;
  std::mt19937_64 rng(3);
  const DenseMatrix m = testutil::random_matrix(13, 4, rng);
  DenseMatrix awk = m;
  awk(0, 0) = 0.1;
  awk(1, 0) = 1.0 / 3.0;
  awk(2, 0) = 5e-324;
  awk(3, 0) = -1.7976931348623157e308;
  mm::write_dense(fs::path(dir / "M.mtx"), awk);
  const DenseMatrix back = mm::read_dense(fs::path(dir / "M.mtx"));
  for (index_t j = 0; j < awk.cols(); ++j)
    for (index_t i = 0; i < awk.rows(); ++i) ASSERT_EQ(back(i, j), awk(i, j));

  const SparseSymmetric a = problems::gen_fd2d(problems::Kind::fd2d_exp, 9);
  mm::write_sparse(fs::path(dir / "A.mtx"), a);
  const SparseSymmetric a2 = mm::read_sparse(fs::path(dir / "A.mtx"));
  ASSERT_EQ(a2.nnz(), a.nnz());
  for (std::size_t p = 0; p < a.values().size(); ++p) {
    ASSERT_EQ(a2.values()[p], a.values()[p]);
    ASSERT_EQ(a2.col_idx()[p], a.col_idx()[p]);
  }
}

namespace {

std::vector<std::vector<std::string>> bench(const std::string& dir, const std::string& space, const std::string& tol,
                                            const std::string& max_m) {
  const Outcome r = run({"bench-residual", "--problem", "fd2d-exp", "--n", "12", "--s", "2", "--space", space, "--tol",
                         tol, "--max-m", max_m, "--out", dir});
  EXPECT_EQ(r.code, cli::kOk) << r.err;
  auto rows = read_csv(dir + "/bench_residual.csv");
  EXPECT_GE(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"m", "space_dim", "naive_secs", "fast_secs", "gain_percent",
                                               "naive_relative", "fast_relative", "rel_diff"}));
  EXPECT_EQ(rows.back()[0], "total");
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    const double naive = std::stod(rows[i][2]), fast = std::stod(rows[i][3]);
    EXPECT_NEAR(std::stod(rows[i][4]), 100.0 * (naive - fast) / naive, 0.051);
    EXPECT_EQ(rows[i][4].back(), '%');
  }
  return rows;
}

}  // namespace

TEST(Cli, BenchResidualPathsAgreeOnSmallProblem) {
  Scratch dir;
  // Runs to the default tolerance; l m stays within 50.
  const auto rows = bench(dir.str(), "standard", "1e-6", "25");
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    ASSERT_LE(std::stol(rows[i][1]), 50);
    EXPECT_LE(std::stod(rows[i][7]), 1e-10) << "check at m = " << rows[i][0];
  }
}

// Both paths obtain a residual of relative size r by cancellation among O(1)
// quantities, so each carries an absolute error near eps and their relative
// gap grows like eps / r. Pushed far below the default tolerance in extended
// mode the agreement is bounded by that, not by 1e-10.
TEST(Cli, BenchAgreementTracksResidualSize) {
  Scratch dir;
  const auto rows = bench(dir.str(), "extended", "1e-10", "12");
  bool below = false;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    ASSERT_LE(std::stol(rows[i][1]), 50);
    const double rel = std::stod(rows[i][6]);
    below = below || rel < 1e-9;
    EXPECT_LE(std::stod(rows[i][7]), std::max(1e-10, 1e-15 / rel)) << "check at m = " << rows[i][0];
  }
  EXPECT_TRUE(below);
}

TEST(Cli, BenchNeedsThreeRepeats) {
  Scratch dir;
  EXPECT_EQ(run({"bench-residual", "--problem", "laplacian1d", "--n", "20", "--repeats", "2", "--out", dir.str()})
                .code,
            cli::kFailure);
}

TEST(Cli, SylvesterModes) {
  Scratch two, one, split;
  Outcome r = run({"solve-sylv", "--problem", "fd2d-exp", "--problem-b", "fd2d-trig", "--n", "16", "--s", "2", "--tol",
               "1e-8", "--verify", "--out", two.str()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  auto kv = read_summary(two / "summary.txt");
  EXPECT_EQ(kv["equation"], "sylvester-two-sided");
  EXPECT_LE(std::stod(kv["verified_relative_residual"]), 1e-8 * (1 + 1e-6));
  EXPECT_TRUE(fs::exists(two / "Z1.mtx"));
  EXPECT_TRUE(fs::exists(two / "Z2.mtx"));

  r = run({"solve-sylv", "--problem", "fd2d-exp", "--problem-b", "laplacian1d", "--n", "16", "--s", "1", "--mode",
           "one-sided", "--verify", "--out", one.str()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  kv = read_summary(one / "summary.txt");
  EXPECT_EQ(kv["equation"], "sylvester-one-sided");
  EXPECT_LE(std::stod(kv["verified_relative_residual"]), 1e-6 * (1 + 1e-6));

  // The split 3D operator defaults to the one-sided solver with a dense B.
  r = run({"solve-sylv", "--problem", "fd3d-split", "--n", "10", "--s", "1", "--verify", "--out", split.str()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  kv = read_summary(split / "summary.txt");
  EXPECT_EQ(kv["equation"], "sylvester-one-sided");
  EXPECT_EQ(mm::read_dense(fs::path(split / "Z1.mtx")).rows(), 100);
  EXPECT_EQ(mm::read_dense(fs::path(split / "Z2.mtx")).rows(), 10);
  EXPECT_LE(std::stod(kv["verified_relative_residual"]), 1e-6 * (1 + 1e-6));
}

TEST(Cli, GeneralizedLyapunovFromFiles) {
  Scratch dir;
  ASSERT_EQ(run({"gen", "--problem", "laplacian2d", "--n", "12", "--out", dir.str()}).code, cli::kOk);
  {
    std::ofstream e(dir / "E.mtx");
    e << "%%MatrixMarket matrix coordinate real symmetric\n144 144 287\n";
    for (int i = 1; i <= 144; ++i) e << i << ' ' << i << " 1.5\n";
    for (int i = 1; i < 144; ++i) e << i + 1 << ' ' << i << " -0.25\n";
  }
  const Outcome r = run({"solve-lyap", "--A", dir / "A.mtx", "--C", dir / "C.mtx", "--E", dir / "E.mtx", "--tol", "1e-8",
                     "--verify", "--out", dir.str()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  auto kv = read_summary(dir / "summary.txt");
  EXPECT_EQ(kv["equation"], "generalized-lyapunov");
  EXPECT_EQ(kv["converged"], "true");
  EXPECT_TRUE(kv.count("verified_relative_residual"));
}
