#pragma once

#include "sweeplat/catchup.hpp"
#include "sweeplat/lattice.hpp"

#include <optional>
#include <vector>

namespace sweeplat {

// Scalar piecewise-linear program, used for the driving displacement l(t).
struct ScalarProgram {
  std::vector<double> times;
  std::vector<double> values;

  double at(double t) const;
  static ScalarProgram ramp(double t0, double v0, double t1, double v1);
  void validate() const;
};

// Nodes and/or springs removed from a generated lattice.
struct LatticeDefect {
  std::vector<std::pair<int, int>> removed_nodes;             // (col, row)
  std::vector<std::pair<std::pair<int, int>, std::pair<int, int>>> removed_springs;  // endpoints
};

enum class BranchKind { Localized1, Localized2, Distributed, PerfectFamily };

struct BranchSolution {
  BranchKind kind = BranchKind::Distributed;
  double dy_hat_dl = 0.0;
  double da1_dl = 0.0;
  double da2_dl = 0.0;
  bool exists = false;
  double existence_margin = 0.0;  // distance from the existence threshold
  double dsigma1_dl = 0.0;
  double dsigma2_dl = 0.0;
  double theta = 0.0;  // PerfectFamily member parameter
};

enum class FixedPointClass { Stable, Saddle, Unstable };

struct StabilityChart {
  struct Sample {
    Eigen::Vector2d a_tilde;
    Eigen::Vector2d image;
  };
  struct FixedPoint {
    Eigen::Vector2d location;
    FixedPointClass classification = FixedPointClass::Stable;
    double residual = 0.0;
  };
  std::vector<Sample> samples;
  std::vector<FixedPoint> fixed_points;
  Eigen::Vector2d region_lo;
  Eigen::Vector2d region_hi;
};

struct SingleSpringOracle {
  double y = 0.0;
  double a = 0.0;
  double sigma = 0.0;
};

namespace scenarios {

// Two springs in series on a line, nodes at 0, 1, 2, ends position-driven:
// r(t) = (0, -l(t)), so l is the prescribed position of the right end.
LatticeSpec make_two_spring(const SpringParams& p1, const SpringParams& p2,
                            const ScalarProgram& l, const ScalarProgram* middle_force = nullptr);

// One spring with both ends constrained; l is the prescribed right-end position.
LatticeSpec make_single_spring(const SpringParams& p, const ScalarProgram& l);

// cols x rows grid with axis springs plus both diagonals of every cell.
// Bottom-row vertical coordinates are pinned, top-row vertical coordinates are
// driven upward by l(t), and one bottom corner is pinned horizontally.
LatticeSpec make_rectangular(int cols, int rows, double spacing, const SpringParams& params,
                             const ScalarProgram& l,
                             const std::optional<LatticeDefect>& defect = std::nullopt);

// Alternating rows of cols and cols+1 nodes with row-internal and inter-row
// springs; same boundary-condition style as the rectangular generator.
LatticeSpec make_triangular(int cols, int rows, double spacing, const SpringParams& params,
                            const ScalarProgram& l,
                            const std::optional<LatticeDefect>& defect = std::nullopt);

// Closed-form plastic-regime trajectory of a single spring while one
// constraint stays active; `upper` selects the facet, l must be monotone in
// the matching direction.
SingleSpringOracle oracle_single_spring(const SpringParams& p, double sigma0, double a0, double t0,
                                        const ScalarProgram& l, double t, bool upper = true);

// Branch solutions of the symmetric two-spring system started on both upper
// facets.  Covers both hardening, both perfectly plastic, both softening.
std::vector<BranchSolution> oracle_two_spring_branches(const SpringParams& p1,
                                                       const SpringParams& p2);

StabilityChart stability_chart(const SweepProcess& process, const SweepState& prev, double t_next,
                               const Eigen::Vector2d& region_lo, const Eigen::Vector2d& region_hi,
                               int grid_n, int threads = 0);

}  // namespace scenarios
}  // namespace sweeplat
