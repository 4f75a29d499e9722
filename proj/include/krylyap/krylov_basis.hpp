#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "krylyap/core_la.hpp"
#include "krylyap/dense_matrix.hpp"
#include "krylyap/sparse.hpp"

// Block Lanczos bases of the standard space K_m(A, C) = range[C, AC, ...] and
// the extended space EK_m(A, C) = range[C, A^{-1}C, AC, A^{-2}C, ...].
//
// Block j (1-based) is V_j, n x l with l = s (standard) or l = 2s (extended,
// V_j = [V_j^(1), V_j^(2)]). A step takes V_j, forms W from it, orthogonalizes
// W twice against V_{j-1} and V_j with block MGS and factors W = V_{j+1} R.
namespace krylyap {

enum class Space { standard, extended };
enum class Storage { windowed, stored };

// The most recent blocks of the basis. Windowed mode keeps three consecutive
// blocks; stored mode keeps all of them. In windowed extended mode the
// V^(2) halves of every block are kept too, so a second pass needs no solves.
class BasisWindow {
 public:
  BasisWindow() = default;
  BasisWindow(Space space, Storage storage, index_t s);

  Space space() const noexcept { return space_; }
  Storage storage() const noexcept { return storage_; }
  index_t s() const noexcept { return s_; }
  index_t block_size() const noexcept { return space_ == Space::standard ? s_ : 2 * s_; }

  // Global index of the oldest retained block and of the newest one.
  index_t first() const noexcept { return last_ + 1 - blocks_.size(); }
  index_t last() const noexcept { return last_; }
  const DenseMatrix& block(index_t j) const;
  // V_j^(2) (extended mode).
  DenseMatrix second_half(index_t j) const;

  void push(DenseMatrix v);

  // Basis vectors held right now and the maximum ever held. Both count the
  // window and, in windowed extended mode, the retained V^(2) halves.
  index_t held_vectors() const noexcept;
  index_t peak_vectors() const noexcept { return peak_; }
  index_t stored_half_vectors() const noexcept { return halves_.size() * s_; }

  // [V_1, ..., V_k] for k <= last(); stored mode only.
  DenseMatrix assemble(index_t k) const;

 private:
  Space space_ = Space::standard;
  Storage storage_ = Storage::windowed;
  index_t s_ = 0;
  index_t last_ = 0;
  std::deque<DenseMatrix> blocks_;
  std::vector<DenseMatrix> halves_;
  index_t peak_ = 0;
};

// One W -= V_i alpha update of the orthogonalization, in application order.
struct Sweep {
  index_t block;
  DenseMatrix alpha;
};

// Everything the projection needs besides the basis itself.
struct ProjectionState {
  Space space = Space::standard;
  index_t s = 0;
  index_t ell = 0;
  // Completed steps: T is (ell m) x (ell m).
  index_t m = 0;

  BlockTridiagonal t;               // T_m = V^T A V
  DenseMatrix tau_next;             // T_{m+1,m}
  // Orthogonalization coefficients (extended mode; equal to T in standard).
  std::vector<DenseMatrix> h_diag;  // H_{j,j}
  std::vector<DenseMatrix> h_below; // H_{j+1,j}, upper triangular
  std::vector<DenseMatrix> h_above; // H_{j-1,j}, j >= 2

  DenseMatrix gamma;   // ell x s with C = V_1 gamma
  DenseMatrix init_r;  // R of the first QR: s x s, or 2s x 2s for [C, A^{-1}C]
  DenseMatrix start;   // C, to regenerate V_1 in a second pass
  double beta = 0.0;   // ||C||_F

  // Per step, the MGS updates in the order they were applied.
  std::vector<std::vector<Sweep>> sweeps;

  // Set when the last step found an A-invariant space (W vanished); then
  // tau_next = 0 and the Galerkin residual is exactly zero.
  bool invariant = false;
  // Largest ||V_{j+1}^T [V_{j-1}, V_j]||_F seen; local orthogonality monitor.
  double local_orthogonality = 0.0;

  // s x 2s nonzero top of tau_next (extended mode).
  DenseMatrix tau_bar() const { return tau_next.rows_range(0, s); }
};

struct KrylovStart {
  BasisWindow window;
  ProjectionState state;
};

// QR of C (standard) or of [C, A^{-1}C] (extended). Rank-deficient input
// throws RankDeficiencyError; deflation is not supported.
KrylovStart init_basis(const LinearOperator& op, const DenseMatrix& c, Space space, Storage storage);

// One block Lanczos step. On a breakdown throws BreakdownError. When
// invariant() is true on that error the step itself completed: T has its new
// diagonal block, tau_next is zero and state.invariant is set. Otherwise the
// new block lost rank only partially and the state must not be used further.
void lanczos_step(const LinearOperator& op, BasisWindow& window, ProjectionState& state);

// One extended Krylov step; W = [A V_j^(1), A^{-1} V_j^(2)]. T is recovered
// from the orthogonalization coefficients. Breakdowns as for lanczos_step.
void extended_step(const LinearOperator& op, BasisWindow& window, ProjectionState& state);

// Dispatches on state.space.
void krylov_step(const LinearOperator& op, BasisWindow& window, ProjectionState& state);

// Second pass: regenerates V_1, ..., V_m from C and the stored MGS
// coefficients (and, in extended mode, the V^(2) halves kept by `window`),
// calling visit(j, V_j) in order. Keeps at most three blocks alive. Throws
// Error if a regenerated coupling block differs from the stored one by more
// than 1e-8 relative, which means the operator is not deterministic.
void regenerate_basis(const LinearOperator& op, const ProjectionState& state, const BasisWindow& window,
                      const std::function<void(index_t, const DenseMatrix&)>& visit);

}  // namespace krylyap
