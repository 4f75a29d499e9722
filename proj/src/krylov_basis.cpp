#include "krylyap/krylov_basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "krylyap/errors.hpp"
#include "krylyap/kernels.hpp"

namespace krylyap {

namespace {

constexpr index_t kWindowBlocks = 3;
constexpr double kReplayTol = 1e-8;

double column_norm(const DenseMatrix& a, index_t j) {
  double s = 0.0;
  const double* c = a.col(j);
  for (index_t i = 0; i < a.rows(); ++i) s += c[i] * c[i];
  return std::sqrt(s);
}

// Smallest |R_jj| / ||W0(:, j)||, with W0 the block before orthogonalization.
// Per column, because the A and A^{-1} halves of an extended block live on
// very different scales.
double min_relative_pivot(const DenseMatrix& r, const std::vector<double>& scale) {
  double worst = INFINITY;
  for (index_t j = 0; j < r.cols(); ++j) {
    const double ref = scale[j];
    worst = std::min(worst, ref > 0.0 ? std::abs(r(j, j)) / ref : 0.0);
  }
  return worst;
}

std::vector<double> column_norms(const DenseMatrix& w) {
  std::vector<double> out(w.cols());
  for (index_t j = 0; j < w.cols(); ++j) out[j] = column_norm(w, j);
  return out;
}

bool vanished(const DenseMatrix& w, const std::vector<double>& scale) {
  for (index_t j = 0; j < w.cols(); ++j)
    if (column_norm(w, j) > kRankTol * scale[j]) return false;
  return true;
}

// Two block MGS sweeps of W against V_{j-1} (when present) and V_j, in that
// order, accumulating the coefficients of each block.
void orthogonalize(DenseMatrix& w, const DenseMatrix* prev, const DenseMatrix& cur, index_t j,
                   std::vector<Sweep>& sweeps, DenseMatrix& acc_prev, DenseMatrix& acc_cur) {
  const index_t l = cur.cols();
  acc_prev = DenseMatrix(l, w.cols());
  acc_cur = DenseMatrix(l, w.cols());
  for (int pass = 0; pass < 2; ++pass) {
    if (prev != nullptr) {
      DenseMatrix alpha(l, w.cols());
      kernels::gemm_tn(*prev, w, alpha);
      kernels::sub_mul(w, *prev, alpha);
      acc_prev += alpha;
      sweeps.push_back({j - 1, std::move(alpha)});
    }
    DenseMatrix alpha(l, w.cols());
    kernels::gemm_tn(cur, w, alpha);
    kernels::sub_mul(w, cur, alpha);
    acc_cur += alpha;
    sweeps.push_back({j, std::move(alpha)});
  }
}

double local_orthogonality(const DenseMatrix& next, const DenseMatrix* prev, const DenseMatrix& cur) {
  DenseMatrix g(next.cols(), cur.cols());
  kernels::gemm_tn(next, cur, g);
  double s = g.frobenius_norm();
  if (prev != nullptr) {
    kernels::gemm_tn(next, *prev, g);
    s = std::hypot(s, g.frobenius_norm());
  }
  return s;
}

DenseMatrix symmetrized(const DenseMatrix& a) {
  DenseMatrix out = a;
  for (index_t j = 0; j < a.cols(); ++j)
    for (index_t i = j + 1; i < a.rows(); ++i) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

struct StepCore {
  DenseMatrix next;       // V_{j+1}, empty on an invariant breakdown
  DenseMatrix r;          // H_{j+1,j}
  DenseMatrix acc_prev;   // H_{j-1,j}
  DenseMatrix acc_cur;    // H_{j,j}
  std::vector<Sweep> sweeps;
  bool invariant = false;
};

StepCore orthogonalize_and_factor(DenseMatrix w, const BasisWindow& window, index_t j) {
  const DenseMatrix* prev = j >= 2 ? &window.block(j - 1) : nullptr;
  const DenseMatrix& cur = window.block(j);
  const std::vector<double> scale = column_norms(w);

  StepCore out;
  orthogonalize(w, prev, cur, j, out.sweeps, out.acc_prev, out.acc_cur);
  if (vanished(w, scale)) {
    out.invariant = true;
    out.r = DenseMatrix(w.cols(), w.cols());
    return out;
  }
  QrResult qr = economy_qr(w, 0.0);
  if (min_relative_pivot(qr.r, scale) < kRankTol)
    throw BreakdownError("Krylov breakdown at step " + std::to_string(j) +
                             ": new block is rank deficient and deflation is not supported",
                         false);
  out.next = std::move(qr.q);
  out.r = std::move(qr.r);
  return out;
}

void record(ProjectionState& state, StepCore& core, index_t j) {
  state.h_diag.push_back(core.acc_cur);
  state.h_below.push_back(core.r);
  if (j >= 2) state.h_above.push_back(core.acc_prev);
  state.sweeps.push_back(std::move(core.sweeps));
}

void finish_step(BasisWindow& window, ProjectionState& state, StepCore& core, index_t j) {
  state.m = j;
  if (core.invariant) {
    state.invariant = true;
    throw BreakdownError("Krylov breakdown at step " + std::to_string(j + 1) +
                             ": the space is invariant under A (residual is zero)",
                         true);
  }
  const DenseMatrix* prev = j >= 2 ? &window.block(j - 1) : nullptr;
  state.local_orthogonality =
      std::max(state.local_orthogonality, local_orthogonality(core.next, prev, window.block(j)));
  window.push(std::move(core.next));
}

void check_step_pre(const BasisWindow& window, const ProjectionState& state, Space space) {
  if (state.space != space) throw Error("Krylov step called for the wrong space");
  if (state.invariant) throw Error("Krylov step called after an invariant breakdown");
  if (window.last() != state.m + 1) throw Error("basis window and projection state are out of sync");
}

}  // namespace

BasisWindow::BasisWindow(Space space, Storage storage, index_t s) : space_(space), storage_(storage), s_(s) {}

const DenseMatrix& BasisWindow::block(index_t j) const {
  if (j < first() || j > last() || j == 0)
    throw Error("basis block " + std::to_string(j) + " is not retained");
  return blocks_[j - first()];
}

DenseMatrix BasisWindow::second_half(index_t j) const {
  if (space_ != Space::extended) throw Error("second halves exist only for extended bases");
  if (storage_ == Storage::stored) return block(j).cols_range(s_, s_);
  if (j == 0 || j > halves_.size()) throw Error("basis half block " + std::to_string(j) + " is not retained");
  return halves_[j - 1];
}

void BasisWindow::push(DenseMatrix v) {
  if (v.cols() != block_size()) throw DimensionError("basis block has the wrong number of columns");
  if (space_ == Space::extended && storage_ == Storage::windowed) halves_.push_back(v.cols_range(s_, s_));
  blocks_.push_back(std::move(v));
  ++last_;
  if (storage_ == Storage::windowed && blocks_.size() > kWindowBlocks) blocks_.pop_front();
  peak_ = std::max(peak_, held_vectors());
}

index_t BasisWindow::held_vectors() const noexcept {
  index_t v = blocks_.size() * block_size();
  v += stored_half_vectors();
  return v;
}

DenseMatrix BasisWindow::assemble(index_t k) const {
  if (k > last() || (k > 0 && first() != 1)) throw Error("assemble needs the stored basis");
  if (k == 0) return {};
  const index_t n = blocks_.front().rows(), l = block_size();
  DenseMatrix v(n, k * l);
  for (index_t j = 0; j < k; ++j) v.set_block(0, j * l, blocks_[j]);
  return v;
}

KrylovStart init_basis(const LinearOperator& op, const DenseMatrix& c, Space space, Storage storage) {
  const index_t n = op.dim(), s = c.cols();
  if (c.rows() != n) throw DimensionError("C has " + std::to_string(c.rows()) + " rows, operator has dimension " +
                                          std::to_string(n));
  if (s == 0) throw DimensionError("C has no columns");
  const index_t l = space == Space::standard ? s : 2 * s;
  if (l > n) throw DimensionError("block size exceeds the problem dimension");
  if (!c.all_finite()) throw Error("C contains non-finite values");

  DenseMatrix w = c;
  if (space == Space::extended) {
    if (!op.has_inverse()) throw Error("extended Krylov needs an operator with an inverse");
    w = hcat(c, block_apply_inverse(op, c));
  }
  const std::vector<double> scale = column_norms(w);
  QrResult qr = economy_qr(w, 0.0);
  if (min_relative_pivot(qr.r, scale) < kRankTol) {
    if (space == Space::extended && min_relative_pivot(qr.r.block(0, 0, s, s), scale) >= kRankTol)
      throw BreakdownError("extended Krylov breakdown: [C, A^{-1}C] is rank deficient", false);
    throw RankDeficiencyError("C is rank deficient; deflation is not supported");
  }

  KrylovStart out;
  out.window = BasisWindow(space, storage, s);
  ProjectionState& st = out.state;
  st.space = space;
  st.s = s;
  st.ell = l;
  st.t = BlockTridiagonal(l);
  st.init_r = qr.r;
  st.gamma = DenseMatrix(l, s);
  st.gamma.set_block(0, 0, qr.r.block(0, 0, s, s));
  st.start = c;
  st.beta = c.frobenius_norm();
  out.window.push(std::move(qr.q));
  return out;
}

void lanczos_step(const LinearOperator& op, BasisWindow& window, ProjectionState& state) {
  check_step_pre(window, state, Space::standard);
  const index_t j = state.m + 1;
  StepCore core = orthogonalize_and_factor(block_apply(op, window.block(j)), window, j);

  DenseMatrix diag = symmetrized(core.acc_cur);
  if (j == 1)
    state.t.append(std::move(diag));
  else
    state.t.append(state.tau_next, std::move(diag));
  state.tau_next = core.r;
  record(state, core, j);
  finish_step(window, state, core, j);
}

void extended_step(const LinearOperator& op, BasisWindow& window, ProjectionState& state) {
  check_step_pre(window, state, Space::extended);
  const index_t j = state.m + 1, s = state.s;
  const DenseMatrix& v = window.block(j);
  DenseMatrix w = hcat(block_apply(op, v.cols_range(0, s)), block_apply_inverse(op, v.cols_range(s, s)));
  StepCore core = orthogonalize_and_factor(std::move(w), window, j);

  // T agrees with H on the columns coming from A V^(1). The columns of
  // V_j^(2) follow from the step that created it, which expresses V_j^(2)
  // through A^{-1} V_{j-1}^(2) and known blocks (or, for j = 1, through the
  // QR of [C, A^{-1}C]); multiplying that relation by A gives them.
  const DenseMatrix h_odd = core.acc_cur.cols_range(0, s);
  const DenseMatrix r_odd = core.r.cols_range(0, s);
  DenseMatrix x_cur, x_next, pivot;
  if (j == 1) {
    const DenseMatrix r11 = state.init_r.block(0, 0, s, s);
    const DenseMatrix r12 = state.init_r.block(0, s, s, s);
    pivot = state.init_r.block(s, s, s, s);
    x_cur = DenseMatrix(2 * s, s);
    x_cur.set_block(0, 0, r11);
    x_cur -= matmul(h_odd, r12);
    x_next = -1.0 * matmul(r_odd, r12);
  } else {
    const DenseMatrix& h = state.h_below[j - 2];
    const DenseMatrix h12 = h.block(0, s, s, s);
    pivot = h.block(s, s, s, s);
    x_cur = -1.0 * matmul(state.tau_next, state.h_diag[j - 2].cols_range(s, s));
    x_cur -= matmul(h_odd, h12);
    x_next = -1.0 * matmul(r_odd, h12);
  }
  DenseMatrix t_cur = hcat(h_odd, solve_upper_right(x_cur, pivot));
  DenseMatrix t_next = hcat(r_odd, solve_upper_right(x_next, pivot));

  if (j == 1)
    state.t.append(symmetrized(t_cur));
  else
    state.t.append(state.tau_next, symmetrized(t_cur));
  state.tau_next = std::move(t_next);
  record(state, core, j);
  finish_step(window, state, core, j);
}

void krylov_step(const LinearOperator& op, BasisWindow& window, ProjectionState& state) {
  if (state.space == Space::standard)
    lanczos_step(op, window, state);
  else
    extended_step(op, window, state);
}

void regenerate_basis(const LinearOperator& op, const ProjectionState& state, const BasisWindow& window,
                      const std::function<void(index_t, const DenseMatrix&)>& visit) {
  if (state.m == 0) return;
  const bool ext = state.space == Space::extended;
  const index_t s = state.s;

  // V_1^(1) is the QR of C alone: leading columns of a Householder QR do not
  // depend on the columns after them.
  DenseMatrix cur = economy_qr(state.start, 0.0).q;
  if (ext) cur = hcat(cur, window.second_half(1));
  DenseMatrix prev;
  visit(1, cur);

  for (index_t j = 1; j < state.m; ++j) {
    DenseMatrix w = block_apply(op, ext ? cur.cols_range(0, s) : cur);
    for (const Sweep& sw : state.sweeps[j - 1]) {
      const DenseMatrix& v = sw.block == j ? cur : prev;
      kernels::sub_mul(w, v, ext ? sw.alpha.cols_range(0, s) : sw.alpha);
    }
    QrResult qr = economy_qr(w, 0.0);
    const DenseMatrix& stored = state.h_below[j - 1];
    const DenseMatrix expect = ext ? stored.block(0, 0, s, s) : stored;
    const double diff = (qr.r - expect).frobenius_norm();
    if (!(diff <= kReplayTol * expect.frobenius_norm()))
      throw Error("second pass diverged at step " + std::to_string(j) + " (relative difference " +
                  std::to_string(diff / expect.frobenius_norm()) + "); the operator is not deterministic");
    prev = std::move(cur);
    cur = ext ? hcat(qr.q, window.second_half(j + 1)) : std::move(qr.q);
    visit(j + 1, cur);
  }
}

}  // namespace krylyap
