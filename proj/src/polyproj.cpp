#include "sweeplat/polyproj.hpp"

#include "sweeplat/numlin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sweeplat::polyproj {

namespace {

// Textbook nonnegative least squares, used by the Phase-1 feasibility check.
Vector nnls(const Matrix& e, const Vector& f, int max_pivots) {
  const Index cols = e.cols();
  Vector lambda = Vector::Zero(cols);
  std::vector<int> passive;
  std::vector<char> in_passive(static_cast<size_t>(cols), 0);
  int pivots = 0;
  while (true) {
    const Vector grad = e.transpose() * (f - e * lambda);
    int add = -1;
    double best = 1e-12;
    for (Index i = 0; i < cols; ++i) {
      if (!in_passive[static_cast<size_t>(i)] && grad(i) > best) {
        best = grad(i);
        add = static_cast<int>(i);
      }
    }
    if (add < 0 || ++pivots > max_pivots) return lambda;
    passive.push_back(add);
    in_passive[static_cast<size_t>(add)] = 1;
    while (true) {
      Matrix ep(e.rows(), static_cast<Index>(passive.size()));
      for (size_t k = 0; k < passive.size(); ++k) ep.col(static_cast<Index>(k)) = e.col(passive[k]);
      const Vector z = ep.completeOrthogonalDecomposition().solve(f);
      bool all_positive = true;
      double alpha = 1.0;
      for (Index k = 0; k < z.size(); ++k) {
        if (z(k) <= 1e-14) {
          all_positive = false;
          const double lk = lambda(passive[static_cast<size_t>(k)]);
          const double denom = lk - z(k);
          if (denom > 0.0) alpha = std::min(alpha, lk / denom);
        }
      }
      if (all_positive) {
        for (size_t k = 0; k < passive.size(); ++k) lambda(passive[k]) = z(static_cast<Index>(k));
        break;
      }
      for (size_t k = 0; k < passive.size(); ++k) {
        const double lk = lambda(passive[k]);
        lambda(passive[k]) = lk + alpha * (z(static_cast<Index>(k)) - lk);
      }
      for (size_t k = 0; k < passive.size();) {
        if (lambda(passive[k]) <= 1e-14 && z(static_cast<Index>(k)) <= 1e-14) {
          lambda(passive[k]) = 0.0;
          in_passive[static_cast<size_t>(passive[k])] = 0;
          passive.erase(passive.begin() + static_cast<std::ptrdiff_t>(k));
          break;  // the solve is stale after an erase
        } else {
          ++k;
        }
      }
      if (++pivots > max_pivots) return lambda;
    }
  }
}

// Least-distance feasibility test: {x : normals x <= offsets} is empty iff the
// augmented nonnegative least-squares residual vanishes.
bool halfspaces_feasible(const Matrix& normals, const Vector& offsets) {
  const Index dim = normals.cols();
  const Index nc = normals.rows();
  Matrix e(dim + 1, nc);
  e.topRows(dim) = -normals.transpose();
  e.bottomRows(1) = -offsets.transpose();
  Vector f = Vector::Zero(dim + 1);
  f(dim) = 1.0;
  const Vector lambda = nnls(e, f, 50 * static_cast<int>(nc) + 200);
  const double residual = (e * lambda - f).norm();
  return residual > 1e-9;
}

}  // namespace

Projector::Projector(Matrix normals, const Matrix& metric, Tolerances tol)
    : normals_(std::move(normals)), metric_(metric), tol_(tol) {
  if (normals_.rows() == 0) throw InvalidParams("Projector: constraint list is empty");
  if (metric_.rows() != metric_.cols() || metric_.cols() != normals_.cols()) {
    throw InvalidParams("Projector: metric/normal dimension mismatch");
  }
  for (Index i = 0; i < normals_.rows(); ++i) {
    if (normals_.row(i).norm() == 0.0) throw InvalidParams("Projector: zero constraint normal");
  }
  Eigen::LLT<Matrix> llt(metric_);
  if (llt.info() != Eigen::Success) throw InvalidParams("Projector: metric is not SPD");
  sinv_nt_ = llt.solve(normals_.transpose());
  gram_ = normals_ * sinv_nt_;
  gram_ = 0.5 * (gram_ + gram_.transpose().eval());
}

// The dual is solved in the least-distance form of Lawson and Hanson: with
// slacks h = b - N y, minimize || [N S^{-1/2}; h^T]^T lambda + e_last || over
// lambda >= 0.  Passive-set normal equations (Gram_WW + h_W h_W^T) z = -h_W
// are consistent by construction, the selection rule argmax of the gradient
// is exactly the most-violated-constraint rule at the tentative point, and
// the line search keeps the dual iterate sign-feasible.  The primal point is
// x = y - S^{-1} N^T lambda / tau with tau = 1 + h . lambda.
ProjectionResult Projector::project(const Vector& point, const Vector& offsets, Workspace* ws) const {
  const Index nc = normals_.rows();
  if (point.size() != normals_.cols() || offsets.size() != nc) {
    throw InvalidParams("Projector::project: dimension mismatch");
  }

  Workspace local;
  Workspace& state = ws ? *ws : local;
  std::vector<int>& working = state.working;
  {
    // Sanitize a caller-provided warm start; the cached factorization only
    // survives if the working set comes back unchanged.
    const std::vector<int> before = working;
    std::sort(working.begin(), working.end());
    working.erase(std::unique(working.begin(), working.end()), working.end());
    if (!working.empty() && (working.front() < 0 || working.back() >= nc)) working.clear();
    if (working != before) state.factored = false;
  }

  const Vector slack = offsets - normals_ * point;  // h, fixed for the call

  std::vector<char> in_working(static_cast<size_t>(nc), 0);
  for (int idx : working) in_working[static_cast<size_t>(idx)] = 1;

  // Minimum-norm solve of (Gram_WW + h_W h_W^T) z = -h_W.  The Cholesky-like
  // factor of Gram_WW is cached across calls; the rank-one slack term is
  // applied by the Sherman-Morrison identity, so repeat projections with the
  // same working set and different offsets cost two triangular solves.
  auto solve_working = [&]() -> Vector {
    const Index w = static_cast<Index>(working.size());
    if (w == 0) return Vector();
    Vector h_w(w);
    for (Index a = 0; a < w; ++a) h_w(a) = slack(working[static_cast<size_t>(a)]);
    Matrix sub(w, w);
    for (Index a = 0; a < w; ++a)
      for (Index c = 0; c < w; ++c) sub(a, c) = gram_(working[static_cast<size_t>(a)], working[static_cast<size_t>(c)]);
    if (!state.factored) {
      state.factor.compute(sub);
      state.factored = true;
      const Vector dvec = state.factor.vectorD().cwiseAbs();
      state.singular =
          !(dvec.size() > 0 && dvec.minCoeff() > 1e-12 * std::max(1e-300, dvec.maxCoeff()));
    }
    if (!state.singular) {
      const Vector p = state.factor.solve(-h_w);
      const Vector q = state.factor.solve(h_w);
      const double denom = 1.0 + h_w.dot(q);
      Vector z = p - q * (h_w.dot(p) / denom);
      const Vector resid = sub * z + h_w * (h_w.dot(z)) + h_w;
      if (resid.cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, h_w.cwiseAbs().maxCoeff()) &&
          z.allFinite()) {
        return z;
      }
    }
    Matrix m = sub + h_w * h_w.transpose();
    return m.completeOrthogonalDecomposition().solve(Vector(-h_w));
  };

  auto drop_position = [&](Index pos, Vector& lambda) {
    in_working[static_cast<size_t>(working[static_cast<size_t>(pos)])] = 0;
    working.erase(working.begin() + pos);
    Vector shrunk(lambda.size() - 1);
    shrunk.head(pos) = lambda.head(pos);
    shrunk.tail(lambda.size() - pos - 1) = lambda.tail(lambda.size() - pos - 1);
    lambda = shrunk;
    state.factored = false;
  };

  const int pivot_cap = tol_.pivot_factor * static_cast<int>(nc);
  int pivots = 0;
  bool restarted = working.empty();

  auto phase1_or_cycle = [&]() -> bool {
    // Returns true when the caller should restart cold.
    if (!restarted) {
      restarted = true;
      working.clear();
      std::fill(in_working.begin(), in_working.end(), 0);
      state.factored = false;
      pivots = 0;
      return true;
    }
    if (!halfspaces_feasible(normals_, offsets)) {
      throw Infeasible("project: constraint set is empty (Phase-1)");
    }
    throw MaxIterations("project: pivot safeguard tripped");
  };

  Vector lambda = solve_working();
  // Warm-start cleanup: discard sign-infeasible rows before the main loop.
  while (lambda.size() > 0) {
    Index worst = 0;
    const double lmin = lambda.minCoeff(&worst);
    if (lmin >= -tol_.multiplier) break;
    drop_position(worst, lambda);
    lambda = solve_working();
    if (++pivots > pivot_cap) {
      if (phase1_or_cycle()) lambda = solve_working();
    }
  }

  while (true) {
    double tau = 1.0;
    for (Index a = 0; a < lambda.size(); ++a) tau += slack(working[static_cast<size_t>(a)]) * lambda(a);
    if (tau < 1e-12) {
      if (!halfspaces_feasible(normals_, offsets)) {
        throw Infeasible("project: constraint set is empty");
      }
      if (phase1_or_cycle()) {
        lambda = solve_working();
        continue;
      }
    }
    Vector x = point;
    for (Index a = 0; a < lambda.size(); ++a) {
      x -= (lambda(a) / tau) * sinv_nt_.col(working[static_cast<size_t>(a)]);
    }

    // Most violated constraint outside the working set; lowest index on ties.
    int add = -1;
    double worst = tol_.feasibility;
    const Vector nx = normals_ * x;
    for (Index i = 0; i < nc; ++i) {
      if (in_working[static_cast<size_t>(i)]) continue;
      const double v = nx(i) - offsets(i);
      if (v > worst) {
        worst = v;
        add = static_cast<int>(i);
      }
    }

    if (add < 0) {
      ProjectionResult result;
      result.point = x;
      std::vector<size_t> order(working.size());
      std::iota(order.begin(), order.end(), size_t{0});
      std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return working[a] < working[b]; });
      result.active.reserve(working.size());
      result.multipliers.resize(static_cast<Index>(working.size()));
      for (size_t k = 0; k < order.size(); ++k) {
        result.active.push_back(working[order[k]]);
        result.multipliers(static_cast<Index>(k)) =
            std::max(0.0, lambda(static_cast<Index>(order[k]))) / tau;
      }
      Vector stationarity = metric_ * (point - x);
      double comp = 0.0;
      for (size_t k = 0; k < result.active.size(); ++k) {
        const int idx = result.active[k];
        stationarity -= result.multipliers(static_cast<Index>(k)) * normals_.row(idx).transpose();
        comp = std::max(comp, std::abs(result.multipliers(static_cast<Index>(k)) * (offsets(idx) - nx(idx))));
      }
      result.kkt_residual = std::max(stationarity.cwiseAbs().maxCoeff(), comp);
      return result;
    }

    if (++pivots > pivot_cap) {
      if (phase1_or_cycle()) {
        lambda = solve_working();
        continue;
      }
    }

    working.push_back(add);
    in_working[static_cast<size_t>(add)] = 1;
    {
      Vector ext(lambda.size() + 1);
      ext.head(lambda.size()) = lambda;
      ext(lambda.size()) = 0.0;
      lambda = ext;
    }
    state.factored = false;

    // Absorb the new row while keeping the dual iterate sign-feasible.
    while (true) {
      const Vector lnew = solve_working();
      if (lnew.size() == 0) break;
      if (lnew.minCoeff() >= -tol_.multiplier) {
        lambda = lnew;
        break;
      }
      double alpha = 1.0;
      for (Index a = 0; a < lnew.size(); ++a) {
        if (lnew(a) < -tol_.multiplier) {
          const double denom = lambda(a) - lnew(a);
          if (denom > 0.0) alpha = std::min(alpha, lambda(a) / denom);
        }
      }
      alpha = std::clamp(alpha, 0.0, 1.0);
      lambda += alpha * (lnew - lambda);
      Index blocked = -1;
      for (Index a = 0; a < lambda.size(); ++a) {
        if (lnew(a) < -tol_.multiplier && lambda(a) <= tol_.multiplier) {
          blocked = a;
          break;
        }
      }
      if (blocked < 0) lnew.minCoeff(&blocked);  // numerical stall: drop the worst row
      drop_position(blocked, lambda);
      if (++pivots > pivot_cap) {
        if (phase1_or_cycle()) {
          lambda = solve_working();
          break;
        }
      }
    }
  }
}

ProjectionResult project(const Vector& point, const HalfspaceSet& set, const Matrix& metric,
                         Tolerances tol) {
  Projector projector(set.normals, metric, tol);
  return projector.project(point, set.offsets);
}

ProjectionResult project_with_equalities(const Vector& point, const HalfspaceSet& set,
                                         const Matrix& eq_normals, const Vector& eq_offsets,
                                         const Matrix& metric, Tolerances tol) {
  if (eq_normals.rows() == 0) return project(point, set, metric, tol);
  if (eq_normals.cols() != point.size() || eq_offsets.size() != eq_normals.rows()) {
    throw InvalidParams("project_with_equalities: dimension mismatch");
  }

  // Particular solution and null-space parametrization of the equalities.
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(eq_normals);
  Vector x_particular = cod.solve(eq_offsets);
  if ((eq_normals * x_particular - eq_offsets).cwiseAbs().maxCoeff() > 1e-9) {
    throw InconsistentEqualities("project_with_equalities: equalities have no solution");
  }
  Matrix null_space = numlin::kernel_basis(eq_normals);

  ProjectionResult result;
  if (null_space.cols() == 0) {
    result.point = x_particular;
    if ((set.normals * x_particular - set.offsets).maxCoeff() > 1e-9) {
      throw Infeasible("project_with_equalities: equalities pin an infeasible point");
    }
    result.multipliers.resize(0);
  } else {
    Matrix reduced_metric = null_space.transpose() * metric * null_space;
    reduced_metric = 0.5 * (reduced_metric + reduced_metric.transpose().eval());
    Eigen::LLT<Matrix> llt(reduced_metric);
    if (llt.info() != Eigen::Success) {
      throw InvalidParams("project_with_equalities: reduced metric is not SPD");
    }
    const Vector w_center = llt.solve(null_space.transpose() * (metric * (point - x_particular)));
    Matrix reduced_normals = set.normals * null_space;
    Vector reduced_offsets = set.offsets - set.normals * x_particular;
    // Rows that vanish on the equality plane are dropped (or certify emptiness).
    std::vector<int> kept;
    for (Index i = 0; i < reduced_normals.rows(); ++i) {
      if (reduced_normals.row(i).norm() > 1e-14) {
        kept.push_back(static_cast<int>(i));
      } else if (reduced_offsets(i) < -1e-11) {
        throw Infeasible("project_with_equalities: constraint unsatisfiable on the equality plane");
      }
    }
    if (kept.empty()) {
      result.point = x_particular + null_space * w_center;
      result.multipliers.resize(0);
    } else {
      Matrix kept_normals(static_cast<Index>(kept.size()), reduced_normals.cols());
      Vector kept_offsets(static_cast<Index>(kept.size()));
      for (size_t k = 0; k < kept.size(); ++k) {
        kept_normals.row(static_cast<Index>(k)) = reduced_normals.row(kept[k]);
        kept_offsets(static_cast<Index>(k)) = reduced_offsets(kept[k]);
      }
      ProjectionResult inner =
          project(w_center, HalfspaceSet{kept_normals, kept_offsets}, reduced_metric, tol);
      result.point = x_particular + null_space * inner.point;
      result.active.reserve(inner.active.size());
      for (int idx : inner.active) result.active.push_back(kept[static_cast<size_t>(idx)]);
      result.multipliers = inner.multipliers;
    }
  }

  // Equality multipliers from stationarity, by least squares.
  Vector gradient = metric * (point - result.point);
  for (size_t k = 0; k < result.active.size(); ++k) {
    gradient -= result.multipliers(static_cast<Index>(k)) *
                set.normals.row(result.active[k]).transpose();
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> codt(Matrix(eq_normals.transpose()));
  const Vector eq_multipliers = codt.solve(gradient);
  const Vector stationarity = gradient - eq_normals.transpose() * eq_multipliers;

  double comp = 0.0;
  const Vector nx = set.normals * result.point;
  for (size_t k = 0; k < result.active.size(); ++k) {
    comp = std::max(comp, std::abs(result.multipliers(static_cast<Index>(k)) *
                                   (set.offsets(result.active[k]) - nx(result.active[k]))));
  }
  result.kkt_residual = std::max(stationarity.cwiseAbs().maxCoeff(), comp);
  return result;
}

}  // namespace sweeplat::polyproj
