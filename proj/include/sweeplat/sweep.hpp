#pragma once

#include "sweeplat/lattice.hpp"
#include "sweeplat/polyproj.hpp"

#include <memory>
#include <vector>

namespace sweeplat {

// State of the reduced sweeping process: stress-like coordinate y_hat in the
// self-stress basis plus the per-spring damage vector.
struct SweepState {
  Vector y_hat;  // dim_v
  Vector a;      // m

  Vector stacked() const;
  static SweepState from_stacked(const Vector& z, Index dim_v);
};

struct ConstraintEval {
  Vector g_minus;  // m
  Vector g_plus;   // m
  std::vector<int> active_minus;
  std::vector<int> active_plus;
  double tol_used = 0.0;
};

struct TMapResult {
  Vector a_new;
  SweepState full;
  std::vector<int> active;  // projection working set (row indices)
  double kkt_residual = 0.0;
};

namespace sweep {

inline constexpr double kActiveTol = 1e-9;
inline constexpr double kFailureTol = 1e-8;

// Largest |h_i|; fixed points of the per-step map are only guaranteed below 1.
double contraction_diagnostic(const AssembledOperators& ops);

}  // namespace sweep

// The moving set and its projection machinery.  Normals are fixed for the
// lifetime of the process (the set only translates with time and state), so
// the projector's Gram matrix is precomputed once.  Springs can be frozen
// after complete failure: their constraint pair is replaced by equality pairs
// pinning the stress to zero and the damage to its failure value.
class SweepProcess {
 public:
  explicit SweepProcess(const AssembledOperators& ops);

  const AssembledOperators& ops() const { return *ops_; }
  Index state_dim() const { return ops_->dim_v + ops_->m; }

  // Row layout: 2i = lower side of spring i, 2i+1 = upper side; frozen springs
  // append their pinning rows at the end.
  const Matrix& normals() const { return projector_->normals(); }
  Vector offsets(double t, const Vector& a_tilde) const;
  polyproj::HalfspaceSet moving_set(double t, const Vector& a_tilde) const;

  Vector stress(double t, const SweepState& state) const;       // sigma = V y_hat - G r + F f
  Vector stress_from_y(double t, const Vector& y_full) const;   // full-space variant

  ConstraintEval constraint_values(double t, const Vector& a_tilde, const SweepState& state,
                                   double tol = sweep::kActiveTol) const;

  TMapResult t_map(const SweepState& prev, double t_next, const Vector& a_tilde,
                   polyproj::Projector::Workspace* ws = nullptr) const;

  std::vector<int> detect_failure(const SweepState& state, const ConstraintEval& eval) const;

  // Freeze the given springs at their failure state; returns a new process.
  SweepProcess frozen(const std::vector<int>& springs) const;
  const std::vector<int>& frozen_springs() const { return frozen_; }
  bool is_frozen(int i) const;

 private:
  void build_projector();

  const AssembledOperators* ops_;
  std::vector<int> frozen_;        // sorted spring indices
  Vector frozen_damage_;           // m, failure damage for frozen entries
  std::unique_ptr<polyproj::Projector> projector_;
};

}  // namespace sweeplat
