#pragma once

#include "sweeplat/common.hpp"
#include "sweeplat/spring.hpp"

#include <utility>
#include <vector>

namespace sweeplat {

// Piecewise-linear vector-valued program of time.  Evaluation clamps outside
// the breakpoint range.
struct LoadProgram {
  std::vector<double> times;    // strictly increasing
  std::vector<Vector> values;   // one vector per breakpoint, equal dimensions

  Index dim() const { return values.empty() ? 0 : values.front().size(); }
  bool empty() const { return times.empty(); }
  Vector at(double t) const;
  static LoadProgram constant(Vector value);
  void validate() const;
};

struct Edge {
  int origin = 0;    // always the lower node index
  int terminus = 0;
  SpringParams params;
};

// The full problem statement: graph, geometry, constraints, loading programs.
struct LatticeSpec {
  int dim = 1;               // spatial dimension d
  Matrix positions;          // n x d reference configuration
  std::vector<Edge> springs;
  Matrix constraint_matrix;  // R, q x (n d)
  LoadProgram displacement_load;  // r(t), q components
  LoadProgram force_load;         // f(t), n d components (may be empty = zero)
  double reference_area = 0.0;    // for the total-stress observable, d = 2

  int node_count() const { return static_cast<int>(positions.rows()); }
  int spring_count() const { return static_cast<int>(springs.size()); }
  int constraint_count() const { return static_cast<int>(constraint_matrix.rows()); }
  Vector flat_positions() const;  // xi0 with coordinate d*j + k
  void validate() const;
};

struct AssumptionReport {
  bool rank_r_ok = false;                // R has full row rank
  bool kinematic_determinacy_ok = false; // stacked (compat; R) has trivial kernel
  bool self_stress_nondegenerate = false;// n d - q < m
  int n = 0, m = 0, q = 0, dim_u = 0, dim_v = 0;
  double condition_stacked = 0.0;        // condition number of (compat; R)
  bool all_ok() const { return rank_r_ok && kinematic_determinacy_ok && self_stress_nondegenerate; }
};

// Everything the sweeping process needs, precomputed once per problem.
struct AssembledOperators {
  int n = 0, m = 0, q = 0, d = 0, dim_u = 0, dim_v = 0;
  Vector xi0;
  Matrix compat;        // m x (n d) linearized elongation map
  Matrix directions;    // m x d unit vectors, terminus to origin
  Vector rest_lengths;  // m
  Matrix constraint;    // R
  Vector k, h, s, c0;   // per-spring parameters
  Matrix f1;            // m x (n d), top block of the enhanced equilibrium right inverse
  Matrix u_basis;       // m x dim_u, K^{-1}-orthonormal
  Matrix v_basis;       // m x dim_v, K^{-1}-orthonormal self-stress basis
  Matrix proj_u;        // dim_u x m
  Matrix proj_v;        // dim_v x m (= V^T K^{-1})
  Matrix g;             // m x q
  Matrix f;             // m x (n d)
  Matrix g_v;           // dim_v x q
  Matrix zeta_pinv;     // (n d) x (m + q) displacement recovery
  Matrix ker_r_projector;  // (n d) x (n d) orthogonal projector onto Ker R
  LoadProgram r_load;
  LoadProgram f_load;
  double reference_area = 0.0;

  Vector r_at(double t) const { return r_load.at(t); }
  Vector f_at(double t) const;  // zero vector when no force program was given
};

struct DisplacementRecovery {
  Vector zeta;
  double elongation_residual = 0.0;  // ||compat * zeta - x||_inf
  double constraint_residual = 0.0;  // ||R (zeta + xi0) + r||_inf
};

namespace lattice {

// n x m signed incidence matrix: +1 at the origin row, -1 at the terminus row.
Matrix incidence_matrix(const LatticeSpec& spec);

Vector rest_lengths(const LatticeSpec& spec);

// Linearized elongation map and the m x d matrix of unit direction vectors.
std::pair<Matrix, Matrix> compatibility_matrix(const LatticeSpec& spec);

AssumptionReport verify_assumptions(const LatticeSpec& spec);

AssembledOperators assemble(const LatticeSpec& spec);

DisplacementRecovery recover_displacements(const AssembledOperators& ops, const Vector& x,
                                           const Vector& r_t);

}  // namespace lattice
}  // namespace sweeplat
