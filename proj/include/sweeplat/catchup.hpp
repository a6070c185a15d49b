#pragma once

#include "sweeplat/sweep.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace sweeplat {

enum class GuessStrategy { Previous, Extrapolated, Perturbed, Explicit };
enum class FailurePolicy { Halt, FreezeSpring };
enum class RunOutcome { Completed, Diverged, FailureHalt };

struct CatchUpConfig {
  double t0 = 0.0;
  double t_end = 1.0;
  int steps = 100;                  // uniform partition
  std::vector<double> breakpoints;  // optional explicit partition, overrides steps
  double eps = 1e-10;               // fixed-point stopping tolerance, inf norm on a
  int max_inner = 10000;
  double divergence_radius = 1e6;
  GuessStrategy strategy = GuessStrategy::Previous;
  std::uint64_t seed = 0;
  double perturbation = 0.0;  // signed magnitude for Perturbed
  std::vector<std::pair<int, Vector>> guess_overrides;  // Explicit: (step index, guess)
  FailurePolicy failure_policy = FailurePolicy::Halt;

  void validate(int m) const;
  std::vector<double> partition() const;  // t_1 .. t_k
};

struct StepResult {
  SweepState state;
  int inner_iterations = 0;
  bool converged = false;
  bool diverged = false;
  ConstraintEval active;
  std::vector<int> failed_springs;
};

struct TrajectoryRecord {
  double t = 0.0;
  int step_index = 0;  // 0 is the initial record
  SweepState state;
  Vector sigma;
  Vector strain;
  Vector plastic;     // NaN when some spring has s = 0 (not recoverable)
  Vector elongation;  // strain + plastic
  Vector zeta;
  double elongation_residual = 0.0;
  double constraint_residual = 0.0;
  int inner_iterations = 0;
  double total_stress = 0.0;  // NaN unless d == 2
  std::vector<int> new_failures;
  ConstraintEval active;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  RunOutcome outcome = RunOutcome::Completed;
  std::vector<int> failed_springs;  // cumulative, sorted

  const TrajectoryRecord& back() const { return records.back(); }
};

namespace catchup {

// y0 = sigma0 + G r(t0) - F f(t0) must lie in the self-stress span (the
// initial stress has to be in equilibrium) and the constraints must hold.
SweepState initial_state(const AssembledOperators& ops, const Vector& sigma0, const Vector& a0,
                         double t0);

Vector initial_guess(const CatchUpConfig& config, int step_index, const Vector& a_prev,
                     const Vector* a_prev_prev);

// One implicit catch-up step: iterate a -> T(a) from the given guess until the
// update is below eps.  Softening iterates that cross a spring's failure
// damage are clamped there; if the clamped map settles, the step lands exactly
// on the complete-failure state and the caller sees it in failed_springs.
StepResult step(const SweepProcess& process, const SweepState& prev, double t_next,
                const CatchUpConfig& config, const Vector& guess,
                polyproj::Projector::Workspace* ws = nullptr);

Trajectory run(const AssembledOperators& ops, const SweepState& initial,
               const CatchUpConfig& config);

// Same scheme without the dimension reduction: states live in R^{2m}, the
// self-stress subspace is enforced with equality constraints.  Slow; kept as
// an independent cross-check of the reduced path.
Trajectory run_full_space(const AssembledOperators& ops, const SweepState& initial,
                          const CatchUpConfig& config);

// Vertical virial stress of a two-dimensional lattice.
double total_stress(const Vector& sigma, const Matrix& directions, const Vector& rest_lengths,
                    double area);

}  // namespace catchup
}  // namespace sweeplat
