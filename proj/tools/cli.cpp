#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "krylyap/dense_baseline.hpp"
#include "krylyap/errors.hpp"
#include "krylyap/matrix_market.hpp"
#include "krylyap/problems.hpp"
#include "krylyap/residual.hpp"
#include "krylyap/solvers.hpp"

namespace krylyap::cli {

namespace fs = std::filesystem;

namespace {

struct ProblemFlags {
  std::string problem;
  std::string problem_b = "fd2d-trig";
  index_t n = 32;
  index_t s = 1;
  std::uint64_t seed = 1;
  bool no_normalize = false;
};

struct SolverFlags {
  double tol = 1e-6;
  index_t max_m = 500;
  index_t check_period = 1;
  std::string space = "standard";
  std::string storage = "windowed";
  double trunc_eps = kTruncationEps;
  bool verify = false;
};

struct InputFlags {
  std::string a, b, c, c1, c2, e;
};

struct Config {
  ProblemFlags problem;
  SolverFlags solver;
  InputFlags input;
  std::string out = ".";
  std::string mode;  // solve-sylv: two-sided | one-sided
  int repeats = 3;
};

void add_problem_flags(CLI::App* app, ProblemFlags& p, bool with_b) {
  app->add_option("--problem", p.problem, "Generated problem: fd2d-exp, fd2d-trig, fd3d-split, laplacian1d, laplacian2d");
  if (with_b) app->add_option("--problem-b", p.problem_b, "Generated B operator for two-sided Sylvester")->capture_default_str();
  app->add_option("--n", p.n, "Grid points per dimension")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--s", p.s, "Right-hand side rank")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--seed", p.seed, "Seed of the random right-hand side")->capture_default_str();
  app->add_flag("--no-normalize", p.no_normalize, "Keep the right-hand side unnormalized");
}

void add_solver_flags(CLI::App* app, SolverFlags& f) {
  app->add_option("--tol", f.tol, "Relative residual tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--max-m", f.max_m, "Iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--check-period", f.check_period, "Residual check every d iterations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--space", f.space, "Krylov space")->capture_default_str()->check(CLI::IsMember({"standard", "extended"}));
  app->add_option("--storage", f.storage, "Basis storage")
      ->capture_default_str()
      ->check(CLI::IsMember({"windowed", "stored"}));
  app->add_option("--trunc-eps", f.trunc_eps, "Truncation threshold of the reduced solution")->capture_default_str();
  app->add_flag("--verify", f.verify, "Recompute the final residual from the factors (n <= 20000)");
}

SolveOptions to_options(const SolverFlags& f) {
  SolveOptions o;
  o.tol = f.tol;
  o.max_m = f.max_m;
  o.check_period = f.check_period;
  o.space = f.space == "extended" ? Space::extended : Space::standard;
  o.storage = f.storage == "stored" ? Storage::stored : Storage::windowed;
  o.trunc_eps = f.trunc_eps;
  o.verify = f.verify;
  return o;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::shared_ptr<const SparseSymmetric> share(SparseSymmetric a) {
  return std::make_shared<const SparseSymmetric>(std::move(a));
}

void require_exclusive(const Config& c, bool files_given) {
  if (files_given && !c.problem.problem.empty())
    throw DimensionError("give either input files or --problem, not both");
  if (!files_given && c.problem.problem.empty()) throw DimensionError("no problem: give input files or --problem");
}

DenseMatrix rhs(const ProblemFlags& p, index_t dim, std::uint64_t seed_offset = 0) {
  return problems::gen_rhs(dim, p.s, p.seed + seed_offset, !p.no_normalize);
}

void write_history(const fs::path& path, const LowRankSolution& sol) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << "m,space_dim,relative_residual,cum_basis_secs,cum_residual_secs\n";
  for (const HistoryEntry& h : sol.history)
    f << h.m << ',' << h.space_dim << ',' << fmt(h.relative) << ',' << fmt(h.basis_secs) << ','
      << fmt(h.residual_secs) << '\n';
}

void write_summary(const fs::path& path, const std::string& equation, const Config& c, const LowRankSolution& sol) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  const index_t s = sol.block_size == 0 ? 1 : sol.block_size / (c.solver.space == "extended" ? 2 : 1);
  f << "equation = " << equation << '\n'
    << "space = " << c.solver.space << '\n'
    << "storage = " << c.solver.storage << '\n'
    << "converged = " << (sol.converged ? "true" : "false") << '\n'
    << "invariant_subspace = " << (sol.invariant ? "true" : "false") << '\n'
    << "iterations = " << sol.m << '\n'
    << "block_size = " << sol.block_size << '\n'
    << "rank = " << sol.rank << '\n'
    << "final_residual = " << fmt(sol.final_res) << '\n'
    << "final_relative_residual = " << fmt(sol.final_relative) << '\n'
    << "tol = " << fmt(c.solver.tol) << '\n'
    << "residual_norm_scale = " << fmt(sol.norm) << '\n'
    << "truncation_mass = " << fmt(sol.truncation_mass) << '\n'
    << "peak_basis_vectors = " << sol.peak_basis_vectors << '\n'
    << "peak_basis_blocks = " << fmt(double(sol.peak_basis_vectors) / double(s)) << '\n'
    << "stored_half_vectors = " << sol.stored_half_vectors << '\n'
    << "local_orthogonality = " << fmt(sol.local_orthogonality) << '\n'
    << "time_basis_secs = " << fmt(sol.timings.basis) << '\n'
    << "time_residual_secs = " << fmt(sol.timings.residual) << '\n'
    << "time_recovery_secs = " << fmt(sol.timings.recovery) << '\n'
    << "time_total_secs = " << fmt(sol.timings.total) << '\n';
  if (sol.verified)
    f << "verified_residual = " << fmt(sol.verified_res) << '\n'
      << "verified_relative_residual = " << fmt(sol.verified_relative) << '\n';
}

int report(const Config& c, const std::string& equation, const LowRankSolution& sol, std::ostream& out,
           std::ostream& err) {
  const fs::path dir(c.out);
  write_history(dir / "history.csv", sol);
  write_summary(dir / "summary.txt", equation, c, sol);
  out << equation << ": m = " << sol.m << ", rank = " << sol.rank << ", relative residual = " << sol.final_relative
      << (sol.converged ? "" : " (not converged)") << '\n';
  if (!sol.converged) {
    err << "error: no convergence after " << sol.m << " iterations (relative residual " << sol.final_relative
        << " > tol " << c.solver.tol << "); see " << (dir / "history.csv").string() << '\n';
    return kNotConverged;
  }
  return kOk;
}

// ---- gen

int cmd_gen(const Config& c, std::ostream& out) {
  if (c.problem.problem.empty()) throw DimensionError("gen needs --problem");
  const problems::Kind kind = problems::parse_kind(c.problem.problem);
  const fs::path dir(c.out);
  if (kind == problems::Kind::fd3d_split) {
    auto [a, b] = problems::gen_fd3d_split(c.problem.n);
    mm::write_sparse(dir / "A.mtx", a);
    mm::write_sparse(dir / "B.mtx", b);
    mm::write_dense(dir / "C1.mtx", rhs(c.problem, a.n()));
    mm::write_dense(dir / "C2.mtx", rhs(c.problem, b.n(), 1));
    out << "wrote A.mtx (" << a.n() << "), B.mtx (" << b.n() << "), C1.mtx, C2.mtx to " << dir.string() << '\n';
    return kOk;
  }
  problems::ProblemSpec spec{kind, c.problem.n, c.problem.s, c.problem.seed, !c.problem.no_normalize};
  const SparseSymmetric a = problems::gen_operator(spec);
  mm::write_sparse(dir / "A.mtx", a);
  mm::write_dense(dir / "C.mtx", rhs(c.problem, a.n()));
  out << "wrote A.mtx (" << a.n() << ", " << a.nnz() << " nonzeros), C.mtx to " << dir.string() << '\n';
  return kOk;
}

// ---- solve-lyap

int cmd_solve_lyap(const Config& c, std::ostream& out, std::ostream& err) {
  const bool files = !c.input.a.empty() || !c.input.c.empty();
  require_exclusive(c, files);
  const SolveOptions opts = to_options(c.solver);
  std::shared_ptr<const SparseSymmetric> a;
  DenseMatrix cm;
  if (files) {
    if (c.input.a.empty() || c.input.c.empty()) throw DimensionError("solve-lyap needs both --A and --C");
    a = share(mm::read_sparse(fs::path(c.input.a)));
    cm = mm::read_dense(fs::path(c.input.c));
  } else {
    problems::ProblemSpec spec{problems::parse_kind(c.problem.problem), c.problem.n, c.problem.s, c.problem.seed,
                               !c.problem.no_normalize};
    a = share(problems::gen_operator(spec));
    cm = rhs(c.problem, a->n());
  }
  if (cm.rows() != a->n())
    throw DimensionError("C has " + std::to_string(cm.rows()) + " rows but A is " + std::to_string(a->n()) + " x " +
                         std::to_string(a->n()));

  LowRankSolution sol;
  if (!c.input.e.empty()) {
    const SparseSymmetric e = mm::read_sparse(fs::path(c.input.e));
    sol = solve_lyapunov_generalized(*a, e, cm, opts);
  } else {
    SparseOperator op(a);
    if (opts.space == Space::extended) op.enable_inverse();
    sol = solve_lyapunov(op, cm, opts);
  }
  mm::write_dense(fs::path(c.out) / "Z.mtx", sol.z1);
  return report(c, c.input.e.empty() ? "lyapunov" : "generalized-lyapunov", sol, out, err);
}

// ---- solve-sylv

int cmd_solve_sylv(const Config& c, std::ostream& out, std::ostream& err) {
  const bool files = !c.input.a.empty() || !c.input.b.empty() || !c.input.c1.empty() || !c.input.c2.empty();
  require_exclusive(c, files);
  const SolveOptions opts = to_options(c.solver);
  std::shared_ptr<const SparseSymmetric> a, b;
  DenseMatrix c1, c2;
  std::string mode = c.mode;
  if (files) {
    if (c.input.a.empty() || c.input.b.empty() || c.input.c1.empty() || c.input.c2.empty())
      throw DimensionError("solve-sylv needs --A, --B, --C1 and --C2");
    a = share(mm::read_sparse(fs::path(c.input.a)));
    b = share(mm::read_sparse(fs::path(c.input.b)));
    c1 = mm::read_dense(fs::path(c.input.c1));
    c2 = mm::read_dense(fs::path(c.input.c2));
    if (mode.empty()) mode = "two-sided";
  } else {
    const problems::Kind kind = problems::parse_kind(c.problem.problem);
    if (kind == problems::Kind::fd3d_split) {
      auto [pa, pb] = problems::gen_fd3d_split(c.problem.n);
      a = share(std::move(pa));
      b = share(std::move(pb));
      if (mode.empty()) mode = "one-sided";
    } else {
      const problems::Kind kind_b = problems::parse_kind(c.problem.problem_b);
      a = share(problems::gen_fd2d(kind, c.problem.n));
      b = share(problems::gen_operator({kind_b, c.problem.n, c.problem.s, c.problem.seed, true}));
      if (mode.empty()) mode = "two-sided";
    }
    c1 = rhs(c.problem, a->n());
    c2 = rhs(c.problem, b->n(), 1);
  }
  if (c1.rows() != a->n() || c2.rows() != b->n())
    throw DimensionError("right-hand side factors do not match A (" + std::to_string(a->n()) + ") and B (" +
                         std::to_string(b->n()) + ")");

  SparseOperator op_a(a);
  if (opts.space == Space::extended) op_a.enable_inverse();
  LowRankSolution sol;
  if (mode == "one-sided") {
    sol = solve_sylvester_one_sided(op_a, b->to_dense(), c1, c2, opts);
  } else if (mode == "two-sided") {
    SparseOperator op_b(b);
    if (opts.space == Space::extended) op_b.enable_inverse();
    sol = solve_sylvester_two_sided(op_a, op_b, c1, c2, opts);
  } else {
    throw DimensionError("unknown --mode '" + mode + "'");
  }
  mm::write_dense(fs::path(c.out) / "Z1.mtx", sol.z1);
  mm::write_dense(fs::path(c.out) / "Z2.mtx", sol.z2);
  return report(c, "sylvester-" + mode, sol, out, err);
}

// ---- bench-residual

template <class F>
double median_seconds(int repeats, F&& f) {
  std::vector<double> t;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

std::string percent(double naive, double fast) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << (naive > 0 ? 100.0 * (naive - fast) / naive : 0.0) << '%';
  return os.str();
}

int cmd_bench_residual(const Config& c, std::ostream& out) {
  const bool files = !c.input.a.empty() || !c.input.c.empty();
  require_exclusive(c, files);
  if (c.repeats < 3) throw DimensionError("--repeats must be at least 3");
  const SolveOptions opts = to_options(c.solver);
  validate(opts);
  std::shared_ptr<const SparseSymmetric> a;
  DenseMatrix cm;
  if (files) {
    a = share(mm::read_sparse(fs::path(c.input.a)));
    cm = mm::read_dense(fs::path(c.input.c));
  } else {
    problems::ProblemSpec spec{problems::parse_kind(c.problem.problem), c.problem.n, c.problem.s, c.problem.seed,
                               !c.problem.no_normalize};
    a = share(problems::gen_operator(spec));
    cm = rhs(c.problem, a->n());
  }
  SparseOperator op(a);
  if (opts.space == Space::extended) op.enable_inverse();

  KrylovStart k = init_basis(op, cm, opts.space, Storage::windowed);
  ProjectionState& st = k.state;
  std::ofstream csv(fs::path(c.out) / "bench_residual.csv");
  if (!csv) throw Error("cannot write bench_residual.csv");
  csv << "m,space_dim,naive_secs,fast_secs,gain_percent,naive_relative,fast_relative,rel_diff\n";
  double naive_total = 0.0, fast_total = 0.0, worst_diff = 0.0;
  index_t checks = 0;
  while (st.m < opts.max_m) {
    try {
      krylov_step(op, k.window, st);
    } catch (const BreakdownError& e) {
      if (!e.invariant()) throw;
      break;
    }
    if (st.m % opts.check_period != 0) continue;
    const DenseMatrix tau = st.space == Space::extended ? st.tau_bar() : st.tau_next;
    ResidualValue naive{}, fast{};
    const double tn = median_seconds(c.repeats, [&] {
      naive = naive_residual_lyapunov(solve_reduced_lyapunov(st.t, st.gamma), tau, st.beta);
    });
    const double tf = median_seconds(c.repeats, [&] { fast = ctri_lyapunov(st.t, st.gamma, tau); });
    const double big = std::max(naive.res, fast.res);
    const double diff = big > 0.0 ? std::abs(naive.res - fast.res) / big : 0.0;
    csv << st.m << ',' << st.t.dim() << ',' << fmt(tn) << ',' << fmt(tf) << ',' << percent(tn, tf) << ','
        << fmt(naive.relative) << ',' << fmt(fast.relative) << ',' << fmt(diff) << '\n';
    naive_total += tn;
    fast_total += tf;
    worst_diff = std::max(worst_diff, diff);
    ++checks;
    if (fast.relative <= opts.tol) break;
  }
  csv << "total," << st.t.dim() << ',' << fmt(naive_total) << ',' << fmt(fast_total) << ','
      << percent(naive_total, fast_total) << ",,," << fmt(worst_diff) << '\n';
  out << "bench-residual: " << checks << " checks up to dim " << st.t.dim() << ", naive " << naive_total
      << " s, fast " << fast_total << " s, gain " << percent(naive_total, fast_total) << ", max rel diff "
      << worst_diff << '\n';
  return kOk;
}

// Splices the entries of a --config file into the argument list as flags.
// A key already given on the command line is skipped, so flags override the
// file. Boolean keys take true/false.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream f(path);
  if (!f) throw Error("cannot read config file " + path);

  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin() + 1, args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  auto trim = [](std::string v) {
    const auto b = v.find_first_not_of(" \t\r");
    const auto e = v.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
  };
  std::vector<std::string> out = args;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty() || key == "config") throw Error(path + ":" + std::to_string(lineno) + ": bad key");
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (key == "verify" || key == "no-normalize") {
      if (value == "true") out.push_back(flag);
      else if (value != "false") throw Error(path + ":" + std::to_string(lineno) + ": " + key + " takes true or false");
      continue;
    }
    out.push_back(flag);
    out.push_back(value);
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank Lyapunov and Sylvester solvers by Krylov projection"};
  app.require_subcommand(1);
  Config c;

  CLI::App* gen = app.add_subcommand("gen", "Write a generated problem as Matrix Market files");
  add_problem_flags(gen, c.problem, false);
  gen->add_option("--out", c.out, "Output directory")->capture_default_str();

  CLI::App* lyap = app.add_subcommand("solve-lyap", "Solve A X + X A + C C^T = 0 (or A X E + E X A + C C^T = 0)");
  add_problem_flags(lyap, c.problem, false);
  add_solver_flags(lyap, c.solver);
  lyap->add_option("--A", c.input.a, "Matrix Market file of A");
  lyap->add_option("--C", c.input.c, "Matrix Market file of C");
  lyap->add_option("--E", c.input.e, "Matrix Market file of an SPD E (generalized equation)");
  lyap->add_option("--out", c.out, "Output directory")->capture_default_str();

  CLI::App* sylv = app.add_subcommand("solve-sylv", "Solve A X + X B + C1 C2^T = 0");
  add_problem_flags(sylv, c.problem, true);
  add_solver_flags(sylv, c.solver);
  sylv->add_option("--A", c.input.a, "Matrix Market file of A");
  sylv->add_option("--B", c.input.b, "Matrix Market file of B");
  sylv->add_option("--C1", c.input.c1, "Matrix Market file of C1");
  sylv->add_option("--C2", c.input.c2, "Matrix Market file of C2");
  sylv->add_option("--mode", c.mode, "two-sided or one-sided (B small and dense)")
      ->check(CLI::IsMember({"two-sided", "one-sided"}));
  sylv->add_option("--out", c.out, "Output directory")->capture_default_str();

  CLI::App* bench = app.add_subcommand("bench-residual", "Time the naive and the fast residual at every check");
  add_problem_flags(bench, c.problem, false);
  add_solver_flags(bench, c.solver);
  bench->add_option("--A", c.input.a, "Matrix Market file of A");
  bench->add_option("--C", c.input.c, "Matrix Market file of C");
  bench->add_option("--repeats", c.repeats, "Timed repetitions per check (median reported)")->capture_default_str();
  bench->add_option("--out", c.out, "Output directory")->capture_default_str();

  std::string config_path;
  for (CLI::App* sub : {gen, lyap, sylv, bench})
    sub->add_option("--config", config_path, "Read flags from a flat key = value file; flags given on the command line win");

  std::vector<std::string> merged;
  try {
    merged = merge_config(args);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  std::vector<std::string> rev(merged.rbegin(), merged.rend() - 1);
  try {
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    fs::create_directories(fs::path(c.out));
    if (gen->parsed()) return cmd_gen(c, out);
    if (lyap->parsed()) return cmd_solve_lyap(c, out, err);
    if (sylv->parsed()) return cmd_solve_sylv(c, out, err);
    return cmd_bench_residual(c, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace krylyap::cli
