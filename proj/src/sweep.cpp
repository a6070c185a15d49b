#include "sweeplat/sweep.hpp"

#include "sweeplat/spring.hpp"

#include <algorithm>
#include <cmath>

namespace sweeplat {

Vector SweepState::stacked() const {
  Vector z(y_hat.size() + a.size());
  z.head(y_hat.size()) = y_hat;
  z.tail(a.size()) = a;
  return z;
}

SweepState SweepState::from_stacked(const Vector& z, Index dim_v) {
  SweepState st;
  st.y_hat = z.head(dim_v);
  st.a = z.tail(z.size() - dim_v);
  return st;
}

namespace sweep {

double contraction_diagnostic(const AssembledOperators& ops) {
  return ops.h.cwiseAbs().maxCoeff();
}

}  // namespace sweep

SweepProcess::SweepProcess(const AssembledOperators& ops) : ops_(&ops) {
  frozen_damage_ = Vector::Zero(ops.m);
  build_projector();
}

bool SweepProcess::is_frozen(int i) const {
  return std::binary_search(frozen_.begin(), frozen_.end(), i);
}

void SweepProcess::build_projector() {
  const int m = ops_->m;
  const Index dim = ops_->dim_v + m;
  const Index rows = 2 * m + 2 * static_cast<Index>(frozen_.size());
  Matrix normals = Matrix::Zero(rows, dim);
  for (int i = 0; i < m; ++i) {
    // n_{-i} = (-k_i P_V e_i; -s_i e_i), n_{+i} = (k_i P_V e_i; -s_i e_i).
    const Vector col = ops_->k(i) * ops_->proj_v.col(i);
    normals.row(2 * i).head(ops_->dim_v) = -col.transpose();
    normals.row(2 * i + 1).head(ops_->dim_v) = col.transpose();
    normals(2 * i, ops_->dim_v + i) = -ops_->s(i);
    normals(2 * i + 1, ops_->dim_v + i) = -ops_->s(i);
  }
  // Frozen springs: the inequality pair above is replaced by two equality
  // pairs, sigma_i = 0 and a_i = a*_i, written as opposing half-spaces.
  for (size_t fk = 0; fk < frozen_.size(); ++fk) {
    const int i = frozen_[fk];
    normals.row(2 * i).setZero();
    normals.row(2 * i + 1).setZero();
    normals.row(2 * i).head(ops_->dim_v) = ops_->v_basis.row(i);   // y_i <= b(t)
    normals.row(2 * i + 1).head(ops_->dim_v) = -ops_->v_basis.row(i);
    const Index extra = 2 * m + 2 * static_cast<Index>(fk);
    normals(extra, ops_->dim_v + i) = 1.0;    // a_i <= a*_i
    normals(extra + 1, ops_->dim_v + i) = -1.0;
  }
  projector_ = std::make_unique<polyproj::Projector>(std::move(normals),
                                                     Matrix::Identity(dim, dim));
}

Vector SweepProcess::offsets(double t, const Vector& a_tilde) const {
  const int m = ops_->m;
  if (a_tilde.size() != m) throw InvalidParams("SweepProcess::offsets: a_tilde dimension mismatch");
  const Vector gvr = ops_->g_v * ops_->r_at(t);       // reduced displacement-load shift
  const Vector pvw = ops_->proj_v.transpose() * gvr;  // (P_V e_i) . gvr per spring
  const Vector ff = ops_->f * ops_->f_at(t);
  Vector b(projector_->constraint_count());
  for (int i = 0; i < m; ++i) {
    const double state_shift = ops_->s(i) * ops_->h(i) * a_tilde(i);
    b(2 * i) = ops_->c0(i) + ff(i) - ops_->k(i) * pvw(i) - state_shift;
    b(2 * i + 1) = ops_->c0(i) - ff(i) + ops_->k(i) * pvw(i) - state_shift;
  }
  const Vector gr = ops_->v_basis * gvr;
  for (size_t fk = 0; fk < frozen_.size(); ++fk) {
    const int i = frozen_[fk];
    const double pinned_y = gr(i) - ff(i);  // sigma_i = 0
    b(2 * i) = pinned_y;
    b(2 * i + 1) = -pinned_y;
    const Index extra = 2 * ops_->m + 2 * static_cast<Index>(fk);
    b(extra) = frozen_damage_(i);
    b(extra + 1) = -frozen_damage_(i);
  }
  return b;
}

polyproj::HalfspaceSet SweepProcess::moving_set(double t, const Vector& a_tilde) const {
  return {projector_->normals(), offsets(t, a_tilde)};
}

Vector SweepProcess::stress(double t, const SweepState& state) const {
  return stress_from_y(t, ops_->v_basis * state.y_hat);
}

Vector SweepProcess::stress_from_y(double t, const Vector& y_full) const {
  return y_full - ops_->g * ops_->r_at(t) + ops_->f * ops_->f_at(t);
}

ConstraintEval SweepProcess::constraint_values(double t, const Vector& a_tilde,
                                               const SweepState& state, double tol) const {
  const int m = ops_->m;
  const Vector sigma = stress(t, state);
  ConstraintEval eval;
  eval.tol_used = tol;
  eval.g_minus.resize(m);
  eval.g_plus.resize(m);
  for (int i = 0; i < m; ++i) {
    const double translated = ops_->s(i) * (state.a(i) - ops_->h(i) * a_tilde(i));
    eval.g_minus(i) = -sigma(i) - translated - ops_->c0(i);
    eval.g_plus(i) = sigma(i) - translated - ops_->c0(i);
    if (std::abs(eval.g_minus(i)) <= tol) eval.active_minus.push_back(i);
    if (std::abs(eval.g_plus(i)) <= tol) eval.active_plus.push_back(i);
  }
  return eval;
}

TMapResult SweepProcess::t_map(const SweepState& prev, double t_next, const Vector& a_tilde,
                               polyproj::Projector::Workspace* ws) const {
  const polyproj::ProjectionResult proj =
      projector_->project(prev.stacked(), offsets(t_next, a_tilde), ws);
  TMapResult out;
  out.full = SweepState::from_stacked(proj.point, ops_->dim_v);
  out.a_new = out.full.a;
  out.active = proj.active;
  out.kkt_residual = proj.kkt_residual;
  return out;
}

std::vector<int> SweepProcess::detect_failure(const SweepState& state,
                                              const ConstraintEval& eval) const {
  std::vector<int> failed;
  for (int i = 0; i < ops_->m; ++i) {
    if (ops_->h(i) <= 1.0 || is_frozen(i)) continue;
    if (eval.g_minus(i) >= -sweep::kFailureTol && eval.g_plus(i) >= -sweep::kFailureTol) {
      failed.push_back(i);
    }
  }
  return failed;
}

SweepProcess SweepProcess::frozen(const std::vector<int>& springs) const {
  SweepProcess next(*ops_);
  next.frozen_ = frozen_;
  next.frozen_damage_ = frozen_damage_;
  for (int i : springs) {
    if (i < 0 || i >= ops_->m) throw InvalidParams("SweepProcess::frozen: spring index out of range");
    if (next.is_frozen(i)) continue;
    SpringParams p{ops_->k(i), ops_->h(i), ops_->s(i), ops_->c0(i)};
    const auto a_star = spring::failure_damage(p);
    if (!a_star) throw InvalidParams("SweepProcess::frozen: spring cannot fail (h <= 1 or s = 0)");
    next.frozen_.push_back(i);
    next.frozen_damage_(i) = *a_star;
  }
  std::sort(next.frozen_.begin(), next.frozen_.end());
  next.build_projector();
  return next;
}

}  // namespace sweeplat
