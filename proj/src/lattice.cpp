#include "sweeplat/lattice.hpp"

#include "sweeplat/numlin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace sweeplat {

Vector LoadProgram::at(double t) const {
  if (times.empty()) throw InvalidParams("LoadProgram::at: empty program");
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  // Breakpoint lists are short; linear scan keeps evaluation branch-simple.
  size_t hi = 1;
  while (times[hi] < t) ++hi;
  const double t0 = times[hi - 1];
  const double t1 = times[hi];
  const double w = (t - t0) / (t1 - t0);
  return (1.0 - w) * values[hi - 1] + w * values[hi];
}

LoadProgram LoadProgram::constant(Vector value) {
  LoadProgram p;
  p.times = {0.0};
  p.values = {std::move(value)};
  return p;
}

void LoadProgram::validate() const {
  if (times.size() != values.size()) throw InvalidParams("LoadProgram: times/values size mismatch");
  for (size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw InvalidParams("LoadProgram: breakpoints must increase");
    if (values[i].size() != values[0].size()) throw InvalidParams("LoadProgram: value dimension varies");
  }
  for (const Vector& v : values) {
    if (!v.allFinite()) throw InvalidParams("LoadProgram: non-finite value");
  }
}

Vector LatticeSpec::flat_positions() const {
  const int n = node_count();
  Vector xi0(n * dim);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < dim; ++k) xi0(dim * j + k) = positions(j, k);
  return xi0;
}

void LatticeSpec::validate() const {
  const int n = node_count();
  if (dim < 1) throw InvalidParams("lattice: dimension must be >= 1");
  if (n < 2) throw InvalidParams("lattice: at least two nodes required");
  if (positions.cols() != dim) throw InvalidParams("lattice: positions/dim mismatch");
  if (!positions.allFinite()) throw InvalidParams("lattice: non-finite node position");
  if (springs.empty()) throw InvalidParams("lattice: no springs");
  std::set<std::pair<int, int>> seen;
  for (const Edge& e : springs) {
    if (e.origin < 0 || e.origin >= n || e.terminus < 0 || e.terminus >= n) {
      throw InvalidParams("lattice: spring endpoint out of range");
    }
    if (e.origin == e.terminus) throw InvalidParams("lattice: spring with coincident endpoints");
    auto key = std::minmax(e.origin, e.terminus);
    if (!seen.insert(key).second) throw InvalidParams("lattice: duplicate spring");
    spring::validate(e.params);
  }
  if (constraint_matrix.cols() != n * dim) throw InvalidParams("lattice: constraint matrix width mismatch");
  if (constraint_matrix.rows() < 1) throw InvalidParams("lattice: no displacement constraints");
  displacement_load.validate();
  if (displacement_load.dim() != constraint_matrix.rows()) {
    throw InvalidParams("lattice: displacement load dimension mismatch");
  }
  if (!force_load.empty()) {
    force_load.validate();
    if (force_load.dim() != n * dim) throw InvalidParams("lattice: force load dimension mismatch");
  }
}

Vector AssembledOperators::f_at(double t) const {
  if (f_load.empty()) return Vector::Zero(n * d);
  return f_load.at(t);
}

namespace lattice {

Matrix incidence_matrix(const LatticeSpec& spec) {
  spec.validate();
  Matrix q = Matrix::Zero(spec.node_count(), spec.spring_count());
  for (int i = 0; i < spec.spring_count(); ++i) {
    q(spec.springs[i].origin, i) = 1.0;
    q(spec.springs[i].terminus, i) = -1.0;
  }
  return q;
}

Vector rest_lengths(const LatticeSpec& spec) {
  spec.validate();
  Vector lengths(spec.spring_count());
  for (int i = 0; i < spec.spring_count(); ++i) {
    const auto& e = spec.springs[i];
    lengths(i) = (spec.positions.row(e.origin) - spec.positions.row(e.terminus)).norm();
    if (lengths(i) < 1e-12) {
      throw DegenerateSpring("lattice: spring " + std::to_string(i) + " has zero rest length");
    }
  }
  return lengths;
}

std::pair<Matrix, Matrix> compatibility_matrix(const LatticeSpec& spec) {
  const Vector lengths = rest_lengths(spec);
  const int m = spec.spring_count();
  const int d = spec.dim;
  Matrix directions(m, d);
  Matrix compat = Matrix::Zero(m, spec.node_count() * d);
  for (int i = 0; i < m; ++i) {
    const auto& e = spec.springs[i];
    // Unit vector from the terminus toward the origin.
    for (int k = 0; k < d; ++k) {
      directions(i, k) = (spec.positions(e.origin, k) - spec.positions(e.terminus, k)) / lengths(i);
    }
    for (int k = 0; k < d; ++k) {
      compat(i, d * e.origin + k) = directions(i, k);
      compat(i, d * e.terminus + k) = -directions(i, k);
    }
  }
  return {compat, directions};
}

AssumptionReport verify_assumptions(const LatticeSpec& spec) {
  auto [compat, directions] = compatibility_matrix(spec);
  (void)directions;
  const int n = spec.node_count();
  const int m = spec.spring_count();
  const int q = spec.constraint_count();
  const int nd = n * spec.dim;

  AssumptionReport report;
  report.n = n;
  report.m = m;
  report.q = q;
  report.rank_r_ok = numlin::rank_with_tolerance(spec.constraint_matrix).numerical_rank == q;

  Matrix stacked(m + q, nd);
  stacked.topRows(m) = compat;
  stacked.bottomRows(q) = spec.constraint_matrix;
  const auto stacked_rank = numlin::rank_with_tolerance(stacked);
  report.kinematic_determinacy_ok = stacked_rank.numerical_rank == nd;
  if (!stacked_rank.singular_values.empty() && stacked_rank.singular_values.back() > 0.0 &&
      report.kinematic_determinacy_ok) {
    report.condition_stacked =
        stacked_rank.singular_values.front() / stacked_rank.singular_values.back();
  } else {
    report.condition_stacked = std::numeric_limits<double>::infinity();
  }

  report.self_stress_nondegenerate = nd - q < m;
  report.dim_u = nd - q;
  report.dim_v = m - nd + q;
  return report;
}

AssembledOperators assemble(const LatticeSpec& spec) {
  const AssumptionReport report = verify_assumptions(spec);
  if (!report.all_ok()) {
    throw RankDeficient("assemble: well-posedness assumptions fail (run verify_assumptions)");
  }

  AssembledOperators ops;
  ops.n = report.n;
  ops.m = report.m;
  ops.q = report.q;
  ops.d = spec.dim;
  ops.dim_u = report.dim_u;
  ops.dim_v = report.dim_v;
  ops.xi0 = spec.flat_positions();
  std::tie(ops.compat, ops.directions) = compatibility_matrix(spec);
  ops.rest_lengths = rest_lengths(spec);
  ops.constraint = spec.constraint_matrix;
  ops.r_load = spec.displacement_load;
  ops.f_load = spec.force_load;
  ops.reference_area = spec.reference_area;

  const int m = ops.m;
  const int nd = ops.n * ops.d;
  ops.k.resize(m);
  ops.h.resize(m);
  ops.s.resize(m);
  ops.c0.resize(m);
  for (int i = 0; i < m; ++i) {
    ops.k(i) = spec.springs[i].params.k;
    ops.h(i) = spec.springs[i].params.h;
    ops.s(i) = spec.springs[i].params.s;
    ops.c0(i) = spec.springs[i].params.c0;
  }
  const Vector kinv = ops.k.cwiseInverse();

  // Enhanced equilibrium matrix (compat^T R^T), right-inverted.
  Matrix enhanced_eq(nd, m + ops.q);
  enhanced_eq.leftCols(m) = ops.compat.transpose();
  enhanced_eq.rightCols(ops.q) = ops.constraint.transpose();
  const Matrix enhanced_pinv = numlin::pinv_full_row_rank(enhanced_eq);
  ops.f1 = enhanced_pinv.topRows(m);

  Matrix stacked(m + ops.q, nd);
  stacked.topRows(m) = ops.compat;
  stacked.bottomRows(ops.q) = ops.constraint;
  ops.zeta_pinv = numlin::pinv_full_col_rank(stacked);

  const Matrix r_pinv = numlin::pinv_full_row_rank(ops.constraint);
  ops.ker_r_projector = Matrix::Identity(nd, nd) - r_pinv * ops.constraint;

  // Self-stress space: sigma with compat^T sigma in Im R^T, i.e. the kernel of
  // the Ker-R component of compat^T.
  const Matrix v_raw = numlin::kernel_basis(ops.ker_r_projector * ops.compat.transpose());
  if (v_raw.cols() != ops.dim_v) {
    throw RankDeficient("assemble: self-stress dimension mismatch");
  }
  const Matrix kinv_diag = kinv.asDiagonal();
  ops.v_basis = numlin::metric_orthonormal_columns(v_raw, kinv_diag);
  ops.proj_v = ops.v_basis.transpose() * kinv_diag;  // V^T K^{-1} V = I makes this the projector

  if (ops.dim_u > 0) {
    const Matrix ker_r = numlin::kernel_basis(ops.constraint);
    const Matrix u_raw = ops.k.asDiagonal() * (ops.compat * ker_r);
    ops.u_basis = numlin::metric_orthonormal_columns(u_raw, kinv_diag);
    ops.proj_u = ops.u_basis.transpose() * kinv_diag;
  } else {
    ops.u_basis = Matrix::Zero(m, 0);
    ops.proj_u = Matrix::Zero(0, m);
  }

  ops.g_v = ops.proj_v * (ops.k.asDiagonal() * (ops.compat * r_pinv));
  ops.g = ops.v_basis * ops.g_v;
  ops.f = ops.u_basis * (ops.proj_u * ops.f1);
  return ops;
}

DisplacementRecovery recover_displacements(const AssembledOperators& ops, const Vector& x,
                                           const Vector& r_t) {
  if (x.size() != ops.m || r_t.size() != ops.q) {
    throw InvalidParams("recover_displacements: dimension mismatch");
  }
  Vector rhs(ops.m + ops.q);
  rhs.head(ops.m) = x;
  rhs.tail(ops.q) = -(ops.constraint * ops.xi0) - r_t;
  DisplacementRecovery rec;
  rec.zeta = ops.zeta_pinv * rhs;
  rec.elongation_residual = (ops.compat * rec.zeta - x).cwiseAbs().maxCoeff();
  rec.constraint_residual =
      (ops.constraint * (rec.zeta + ops.xi0) + r_t).cwiseAbs().maxCoeff();
  return rec;
}

}  // namespace lattice
}  // namespace sweeplat
