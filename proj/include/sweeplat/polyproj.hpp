#pragma once

#include "sweeplat/common.hpp"

#include <vector>

namespace sweeplat::polyproj {

// Convex polyhedron {x : normals.row(i) * x <= offsets(i) for all i}.
struct HalfspaceSet {
  Matrix normals;
  Vector offsets;
};

struct ProjectionResult {
  Vector point;
  std::vector<int> active;  // constraint indices, ascending
  Vector multipliers;       // one per active entry
  double kkt_residual = 0.0;
};

struct Tolerances {
  double feasibility = 1e-11;  // absolute, on n_i^T x - b_i
  double multiplier = 1e-12;   // dual sign threshold
  int pivot_factor = 100;      // pivot cap = pivot_factor * #constraints
};

// Metric projection onto a fixed set of half-space normals.  The normals and
// the SPD metric are set once; only the offsets change between calls, which is
// what the catch-up iteration needs: the moving set translates but never
// rotates.  Pivot rule: most violated constraint, ties broken by lowest index;
// negative multipliers are resolved with a Lawson-Hanson style step so the
// dual iterate stays sign-feasible.  Degenerate working sets fall back to
// minimum-norm multipliers.
class Projector {
 public:
  Projector(Matrix normals, const Matrix& metric, Tolerances tol = {});

  // Scratch state reusable across calls.  Keeping it warm preserves the
  // working set and its factorization between consecutive projections.
  struct Workspace {
    std::vector<int> working;
    Eigen::LDLT<Matrix> factor;
    bool factored = false;
    bool singular = false;  // degenerate working set: minimum-norm multipliers
  };

  ProjectionResult project(const Vector& point, const Vector& offsets, Workspace* ws = nullptr) const;

  const Matrix& normals() const { return normals_; }
  Index dimension() const { return normals_.cols(); }
  Index constraint_count() const { return normals_.rows(); }
  const Matrix& metric() const { return metric_; }

 private:
  Matrix normals_;    // c x n
  Matrix metric_;     // n x n SPD
  Matrix sinv_nt_;    // n x c, S^{-1} N^T
  Matrix gram_;       // c x c, N S^{-1} N^T
  Tolerances tol_;
};

ProjectionResult project(const Vector& point, const HalfspaceSet& set, const Matrix& metric,
                         Tolerances tol = {});

// Same KKT contract with additional linear equalities eq_normals * x = eq_offsets
// (multipliers on equality rows unrestricted in sign).  Result reports the
// inequality active set only.
ProjectionResult project_with_equalities(const Vector& point, const HalfspaceSet& set,
                                         const Matrix& eq_normals, const Vector& eq_offsets,
                                         const Matrix& metric, Tolerances tol = {});

}  // namespace sweeplat::polyproj
