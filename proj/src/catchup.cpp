#include "sweeplat/catchup.hpp"

#include "sweeplat/numlin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace sweeplat {

void CatchUpConfig::validate(int m) const {
  if (!(t0 < t_end)) throw InvalidParams("catchup: t0 must be below t_end");
  if (!(eps > 0.0)) throw InvalidParams("catchup: eps must be positive");
  if (max_inner < 1) throw InvalidParams("catchup: max_inner must be >= 1");
  if (!(divergence_radius > 0.0)) throw InvalidParams("catchup: divergence radius must be positive");
  if (breakpoints.empty() && steps < 1) throw InvalidParams("catchup: steps must be >= 1");
  for (size_t i = 0; i < breakpoints.size(); ++i) {
    const double prev = i == 0 ? t0 : breakpoints[i - 1];
    if (!(breakpoints[i] > prev)) throw InvalidParams("catchup: breakpoints must increase from t0");
  }
  if (!breakpoints.empty() && std::abs(breakpoints.back() - t_end) > 1e-12) {
    throw InvalidParams("catchup: last breakpoint must equal t_end");
  }
  for (const auto& [j, guess] : guess_overrides) {
    if (j < 1) throw InvalidParams("catchup: guess override step must be >= 1");
    if (guess.size() != m) throw InvalidParams("catchup: guess override dimension mismatch");
  }
}

std::vector<double> CatchUpConfig::partition() const {
  if (!breakpoints.empty()) return breakpoints;
  std::vector<double> ts(static_cast<size_t>(steps));
  const double dt = (t_end - t0) / steps;
  for (int j = 1; j <= steps; ++j) ts[static_cast<size_t>(j - 1)] = t0 + j * dt;
  ts.back() = t_end;
  return ts;
}

namespace catchup {

namespace {

constexpr double kSpanTol = 1e-8;
constexpr double kInitialFeasTol = 1e-8;

double uniform01(std::uint64_t raw) { return static_cast<double>(raw >> 11) * 0x1.0p-53; }

Vector perturbation_pattern(std::uint64_t seed, int step_index, Index m) {
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(step_index + 1)));
  Vector u(m);
  for (Index i = 0; i < m; ++i) u(i) = uniform01(rng());
  return u;
}

struct FieldState {
  Vector plastic;  // running integral
  bool recoverable = true;
};

TrajectoryRecord make_record(const SweepProcess& process, double t, int step_index,
                             const SweepState& state, int inner, FieldState& fields,
                             const Vector* a_prev) {
  const AssembledOperators& ops = process.ops();
  TrajectoryRecord rec;
  rec.t = t;
  rec.step_index = step_index;
  rec.state = state;
  rec.inner_iterations = inner;
  rec.sigma = process.stress(t, state);
  rec.strain = rec.sigma.cwiseQuotient(ops.k);
  if (fields.recoverable && a_prev != nullptr) {
    // One increment of p(t) = p(0) + integral of sign(sigma_i)/s_i da_i.
    for (int i = 0; i < ops.m; ++i) {
      const double da = state.a(i) - (*a_prev)(i);
      if (da != 0.0 && rec.sigma(i) != 0.0) {
        fields.plastic(i) += (rec.sigma(i) > 0.0 ? 1.0 : -1.0) * da / ops.s(i);
      }
    }
  }
  if (fields.recoverable) {
    rec.plastic = fields.plastic;
    rec.elongation = rec.strain + rec.plastic;
    const auto recovery = lattice::recover_displacements(ops, rec.elongation, ops.r_at(t));
    rec.zeta = recovery.zeta;
    rec.elongation_residual = recovery.elongation_residual;
    rec.constraint_residual = recovery.constraint_residual;
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.plastic = Vector::Constant(ops.m, nan);
    rec.elongation = Vector::Constant(ops.m, nan);
    rec.zeta = Vector::Constant(ops.n * ops.d, nan);
    rec.elongation_residual = nan;
    rec.constraint_residual = nan;
  }
  rec.total_stress = ops.d == 2
                         ? total_stress(rec.sigma, ops.directions, ops.rest_lengths, ops.reference_area)
                         : std::numeric_limits<double>::quiet_NaN();
  rec.active = process.constraint_values(t, state.a, state);
  return rec;
}

}  // namespace

SweepState initial_state(const AssembledOperators& ops, const Vector& sigma0, const Vector& a0,
                         double t0) {
  if (sigma0.size() != ops.m || a0.size() != ops.m) {
    throw InvalidParams("initial_state: dimension mismatch");
  }
  const Vector y0 = sigma0 + ops.g * ops.r_at(t0) - ops.f * ops.f_at(t0);
  const Vector y_hat = ops.proj_v * y0;
  const double span_residual = (y0 - ops.v_basis * y_hat).cwiseAbs().maxCoeff();
  if (span_residual > kSpanTol) {
    throw NotSelfStressed("initial_state: sigma0 violates equilibrium (residual " +
                          std::to_string(span_residual) + ")");
  }
  SweepState state{y_hat, a0};
  SweepProcess process(ops);
  const ConstraintEval eval = process.constraint_values(t0, a0, state);
  const double worst = std::max(eval.g_minus.maxCoeff(), eval.g_plus.maxCoeff());
  if (worst > kInitialFeasTol) {
    throw Infeasible("initial_state: initial state violates the admissible set by " +
                     std::to_string(worst));
  }
  return state;
}

Vector initial_guess(const CatchUpConfig& config, int step_index, const Vector& a_prev,
                     const Vector* a_prev_prev) {
  switch (config.strategy) {
    case GuessStrategy::Previous:
      return a_prev;
    case GuessStrategy::Extrapolated: {
      if (a_prev_prev == nullptr) return a_prev;
      return (2.0 * a_prev - *a_prev_prev).cwiseMax(a_prev);
    }
    case GuessStrategy::Perturbed: {
      const Vector u = perturbation_pattern(config.seed, step_index, a_prev.size());
      return (a_prev + config.perturbation * u).cwiseMax(0.0);
    }
    case GuessStrategy::Explicit: {
      for (const auto& [j, guess] : config.guess_overrides) {
        if (j == step_index) return guess;
      }
      return a_prev;
    }
  }
  return a_prev;
}

StepResult step(const SweepProcess& process, const SweepState& prev, double t_next,
                const CatchUpConfig& config, const Vector& guess,
                polyproj::Projector::Workspace* ws) {
  const AssembledOperators& ops = process.ops();
  // Failure damage per spring, +inf when the spring cannot fail.
  Vector a_star = Vector::Constant(ops.m, std::numeric_limits<double>::infinity());
  for (int i = 0; i < ops.m; ++i) {
    if (ops.h(i) > 1.0 && ops.s(i) > 0.0 && !process.is_frozen(i)) {
      a_star(i) = ops.c0(i) / (ops.s(i) * (ops.h(i) - 1.0));
    }
  }

  StepResult result;
  Vector a_tilde = guess.cwiseMin(a_star);
  Vector a_raw_prev;
  TMapResult last;
  for (int iter = 1; iter <= config.max_inner; ++iter) {
    last = process.t_map(prev, t_next, a_tilde, ws);
    result.inner_iterations = iter;
    const Vector& a_raw = last.a_new;
    if ((a_raw - a_tilde).cwiseAbs().maxCoeff() < config.eps) {
      result.converged = true;
      break;
    }
    if (last.full.stacked().cwiseAbs().maxCoeff() > config.divergence_radius) break;
    // Iterates stuck above a failure level mean the only candidate fixed
    // point there is repelling; the clamped retry below decides the step.
    if (a_raw_prev.size() > 0 && (a_raw - a_raw_prev).cwiseAbs().maxCoeff() < config.eps &&
        (a_raw.array() > a_star.array() + 1e-12).any()) {
      break;
    }
    a_raw_prev = a_raw;
    a_tilde = a_raw.cwiseMin(a_star);
  }

  if (!result.converged) {
    result.diverged = true;
    return result;
  }

  result.state = last.full;
  result.active = process.constraint_values(t_next, a_tilde, result.state);
  result.failed_springs = process.detect_failure(result.state, result.active);
  return result;
}

Trajectory run(const AssembledOperators& ops, const SweepState& initial,
               const CatchUpConfig& config) {
  config.validate(ops.m);
  SweepProcess process(ops);

  Trajectory traj;
  FieldState fields;
  fields.recoverable = (ops.s.array() > 0.0).all();
  fields.plastic = Vector::Zero(ops.m);

  traj.records.push_back(make_record(process, config.t0, 0, initial, 0, fields, nullptr));

  const std::vector<double> ts = config.partition();
  polyproj::Projector::Workspace ws;
  SweepState prev = initial;
  Vector a_prev_prev;
  for (size_t j = 1; j <= ts.size(); ++j) {
    const double t_j = ts[j - 1];
    const Vector guess =
        initial_guess(config, static_cast<int>(j), prev.a, a_prev_prev.size() ? &a_prev_prev : nullptr);
    StepResult res = step(process, prev, t_j, config, guess, &ws);
    if (res.diverged) {
      traj.outcome = RunOutcome::Diverged;
      return traj;
    }
    TrajectoryRecord rec =
        make_record(process, t_j, static_cast<int>(j), res.state, res.inner_iterations, fields, &prev.a);
    rec.new_failures = res.failed_springs;
    traj.records.push_back(std::move(rec));

    if (!res.failed_springs.empty()) {
      traj.failed_springs.insert(traj.failed_springs.end(), res.failed_springs.begin(),
                                 res.failed_springs.end());
      std::sort(traj.failed_springs.begin(), traj.failed_springs.end());
      if (config.failure_policy == FailurePolicy::Halt) {
        traj.outcome = RunOutcome::FailureHalt;
        return traj;
      }
      process = process.frozen(res.failed_springs);
      ws = polyproj::Projector::Workspace{};  // constraint rows changed
    }
    a_prev_prev = prev.a;
    prev = res.state;
  }
  traj.outcome = RunOutcome::Completed;
  return traj;
}

Trajectory run_full_space(const AssembledOperators& ops, const SweepState& initial,
                          const CatchUpConfig& config) {
  config.validate(ops.m);
  SweepProcess process(ops);  // reused for records and constraint evaluation

  const int m = ops.m;
  const Index dim = 2 * m;
  Matrix metric = Matrix::Identity(dim, dim);
  metric.topLeftCorner(m, m) = ops.k.cwiseInverse().asDiagonal();

  Matrix normals = Matrix::Zero(2 * m, dim);
  for (int i = 0; i < m; ++i) {
    normals(2 * i, i) = -1.0;
    normals(2 * i + 1, i) = 1.0;
    normals(2 * i, m + i) = -ops.s(i);
    normals(2 * i + 1, m + i) = -ops.s(i);
  }
  // y must stay inside the self-stress subspace.
  const Matrix v_perp = numlin::kernel_basis(Matrix(ops.v_basis.transpose()));
  Matrix eq = Matrix::Zero(v_perp.cols(), dim);
  eq.leftCols(m) = v_perp.transpose();
  const Vector eq_rhs = Vector::Zero(v_perp.cols());

  auto offsets_at = [&](double t, const Vector& a_tilde) {
    const Vector shift = ops.g * ops.r_at(t) - ops.f * ops.f_at(t);
    Vector b(2 * m);
    for (int i = 0; i < m; ++i) {
      const double state_shift = ops.s(i) * ops.h(i) * a_tilde(i);
      b(2 * i) = ops.c0(i) - shift(i) - state_shift;
      b(2 * i + 1) = ops.c0(i) + shift(i) - state_shift;
    }
    return b;
  };

  Trajectory traj;
  FieldState fields;
  fields.recoverable = (ops.s.array() > 0.0).all();
  fields.plastic = Vector::Zero(m);
  traj.records.push_back(make_record(process, config.t0, 0, initial, 0, fields, nullptr));

  Vector y = ops.v_basis * initial.y_hat;
  Vector a = initial.a;
  Vector a_prev_prev;
  const std::vector<double> ts = config.partition();
  for (size_t j = 1; j <= ts.size(); ++j) {
    const double t_j = ts[j - 1];
    Vector stacked(dim);
    stacked.head(m) = y;
    stacked.tail(m) = a;
    Vector a_tilde =
        initial_guess(config, static_cast<int>(j), a, a_prev_prev.size() ? &a_prev_prev : nullptr);
    bool converged = false;
    Vector point;
    int iter = 1;
    for (; iter <= config.max_inner; ++iter) {
      const auto proj = polyproj::project_with_equalities(
          stacked, {normals, offsets_at(t_j, a_tilde)}, eq, eq_rhs, metric);
      point = proj.point;
      const Vector a_new = point.tail(m);
      if ((a_new - a_tilde).cwiseAbs().maxCoeff() < config.eps) {
        converged = true;
        a_tilde = a_new;
        break;
      }
      if (point.cwiseAbs().maxCoeff() > config.divergence_radius) break;
      a_tilde = a_new;
    }
    if (!converged) {
      traj.outcome = RunOutcome::Diverged;
      return traj;
    }
    y = point.head(m);
    a = point.tail(m);
    SweepState state{ops.proj_v * y, a};
    Vector prev_a = traj.records.back().state.a;
    TrajectoryRecord rec = make_record(process, t_j, static_cast<int>(j), state, iter, fields, &prev_a);
    rec.new_failures = process.detect_failure(state, rec.active);
    traj.records.push_back(rec);
    if (!rec.new_failures.empty()) {
      traj.failed_springs = rec.new_failures;
      traj.outcome = RunOutcome::FailureHalt;
      return traj;
    }
    a_prev_prev = traj.records[traj.records.size() - 2].state.a;
  }
  traj.outcome = RunOutcome::Completed;
  return traj;
}

double total_stress(const Vector& sigma, const Matrix& directions, const Vector& rest_lengths,
                    double area) {
  if (directions.cols() != 2) throw WrongDimension("total_stress: defined for d = 2 only");
  if (!(area > 0.0)) throw InvalidParams("total_stress: area must be positive");
  double sum = 0.0;
  for (Index i = 0; i < sigma.size(); ++i) {
    const double d2 = directions(i, 1);
    sum += (sigma(i) * d2) * (rest_lengths(i) * d2);
  }
  return sum / area;
}

}  // namespace catchup
}  // namespace sweeplat
