#include "sweeplat/scenarios.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

namespace sweeplat {

double ScalarProgram::at(double t) const {
  if (times.empty()) throw InvalidParams("ScalarProgram::at: empty program");
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  size_t hi = 1;
  while (times[hi] < t) ++hi;
  const double w = (t - times[hi - 1]) / (times[hi] - times[hi - 1]);
  return (1.0 - w) * values[hi - 1] + w * values[hi];
}

ScalarProgram ScalarProgram::ramp(double t0, double v0, double t1, double v1) {
  return ScalarProgram{{t0, t1}, {v0, v1}};
}

void ScalarProgram::validate() const {
  if (times.size() != values.size() || times.empty()) {
    throw InvalidParams("ScalarProgram: times/values mismatch");
  }
  for (size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw InvalidParams("ScalarProgram: breakpoints must increase");
  }
}

namespace scenarios {

namespace {

// Shared grid-generator plumbing: positions indexed (col, row) per row list,
// defect removal, boundary constraints, displacement program assembly.
struct GridBuilder {
  int dim = 2;
  std::vector<Eigen::Vector2d> positions;       // by node id
  std::vector<std::pair<int, int>> coords;      // (col, row) by node id
  std::vector<std::pair<int, int>> springs;     // (origin, terminus), origin < terminus
  std::vector<int> bottom_nodes;
  std::vector<int> top_nodes;

  void add_spring(int a, int b) {
    if (a > b) std::swap(a, b);
    springs.emplace_back(a, b);
  }

  LatticeSpec finish(const SpringParams& params, const ScalarProgram& l,
                     const std::optional<LatticeDefect>& defect, double reference_area) const {
    l.validate();
    std::set<std::pair<int, int>> dead_nodes;
    std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> dead_springs;
    if (defect) {
      dead_nodes.insert(defect->removed_nodes.begin(), defect->removed_nodes.end());
      for (auto sp : defect->removed_springs) {
        if (sp.second < sp.first) std::swap(sp.first, sp.second);
        dead_springs.insert(sp);
      }
    }

    const int n_all = static_cast<int>(positions.size());
    std::vector<int> remap(static_cast<size_t>(n_all), -1);
    LatticeSpec spec;
    spec.dim = dim;
    int kept = 0;
    for (int j = 0; j < n_all; ++j) {
      if (!dead_nodes.count(coords[static_cast<size_t>(j)])) remap[static_cast<size_t>(j)] = kept++;
    }
    spec.positions.resize(kept, dim);
    for (int j = 0; j < n_all; ++j) {
      if (remap[static_cast<size_t>(j)] >= 0) {
        spec.positions.row(remap[static_cast<size_t>(j)]) = positions[static_cast<size_t>(j)].head(dim);
      }
    }
    for (auto [a, b] : springs) {
      if (remap[static_cast<size_t>(a)] < 0 || remap[static_cast<size_t>(b)] < 0) continue;
      auto ca = coords[static_cast<size_t>(a)];
      auto cb = coords[static_cast<size_t>(b)];
      if (cb < ca) std::swap(ca, cb);
      if (dead_springs.count({ca, cb})) continue;
      spec.springs.push_back(Edge{remap[static_cast<size_t>(a)], remap[static_cast<size_t>(b)], params});
    }

    // Constraint rows: bottom vertical pins, top vertical drives, one
    // horizontal pin on the lowest surviving bottom node.
    std::vector<int> bottom, top;
    for (int j : bottom_nodes) {
      if (remap[static_cast<size_t>(j)] >= 0) bottom.push_back(remap[static_cast<size_t>(j)]);
    }
    for (int j : top_nodes) {
      if (remap[static_cast<size_t>(j)] >= 0) top.push_back(remap[static_cast<size_t>(j)]);
    }
    if (bottom.empty() || top.empty()) throw InvalidParams("grid generator: boundary rows removed");
    const int q = static_cast<int>(bottom.size() + top.size()) + 1;
    spec.constraint_matrix = Matrix::Zero(q, kept * dim);
    int row = 0;
    std::vector<double> base(static_cast<size_t>(q), 0.0);
    std::vector<bool> driven(static_cast<size_t>(q), false);
    for (int node : bottom) {
      spec.constraint_matrix(row, dim * node + 1) = 1.0;
      base[static_cast<size_t>(row)] = -spec.positions(node, 1);
      ++row;
    }
    for (int node : top) {
      spec.constraint_matrix(row, dim * node + 1) = 1.0;
      base[static_cast<size_t>(row)] = -spec.positions(node, 1);
      driven[static_cast<size_t>(row)] = true;
      ++row;
    }
    spec.constraint_matrix(row, dim * bottom.front() + 0) = 1.0;
    base[static_cast<size_t>(row)] = -spec.positions(bottom.front(), 0);

    LoadProgram r;
    r.times = l.times;
    for (double lv : l.values) {
      Vector v(q);
      for (int i = 0; i < q; ++i) {
        v(i) = base[static_cast<size_t>(i)] - (driven[static_cast<size_t>(i)] ? lv : 0.0);
      }
      r.values.push_back(v);
    }
    spec.displacement_load = r;
    spec.reference_area = reference_area;
    spec.validate();
    return spec;
  }
};

Eigen::Vector3d upper_normal(double kappa, double s, int which) {
  // (kappa, -s, 0) for spring 1, (kappa, 0, -s) for spring 2
  return which == 0 ? Eigen::Vector3d(kappa, -s, 0.0) : Eigen::Vector3d(kappa, 0.0, -s);
}

}  // namespace

LatticeSpec make_two_spring(const SpringParams& p1, const SpringParams& p2, const ScalarProgram& l,
                            const ScalarProgram* middle_force) {
  l.validate();
  LatticeSpec spec;
  spec.dim = 1;
  spec.positions.resize(3, 1);
  spec.positions << 0.0, 1.0, 2.0;
  spec.springs = {Edge{0, 1, p1}, Edge{1, 2, p2}};
  spec.constraint_matrix = Matrix::Zero(2, 3);
  spec.constraint_matrix(0, 0) = 1.0;
  spec.constraint_matrix(1, 2) = 1.0;
  LoadProgram r;
  r.times = l.times;
  for (double lv : l.values) {
    Vector v(2);
    v << 0.0, -lv;
    r.values.push_back(v);
  }
  spec.displacement_load = r;
  if (middle_force != nullptr) {
    middle_force->validate();
    LoadProgram f;
    f.times = middle_force->times;
    for (double fv : middle_force->values) {
      Vector v = Vector::Zero(3);
      v(1) = fv;
      f.values.push_back(v);
    }
    spec.force_load = f;
  }
  spec.validate();
  return spec;
}

LatticeSpec make_single_spring(const SpringParams& p, const ScalarProgram& l) {
  l.validate();
  LatticeSpec spec;
  spec.dim = 1;
  spec.positions.resize(2, 1);
  spec.positions << 0.0, 1.0;
  spec.springs = {Edge{0, 1, p}};
  spec.constraint_matrix = Matrix::Identity(2, 2);
  LoadProgram r;
  r.times = l.times;
  for (double lv : l.values) {
    Vector v(2);
    v << 0.0, -lv;
    r.values.push_back(v);
  }
  spec.displacement_load = r;
  spec.validate();
  return spec;
}

LatticeSpec make_rectangular(int cols, int rows, double spacing, const SpringParams& params,
                             const ScalarProgram& l, const std::optional<LatticeDefect>& defect) {
  if (cols < 2 || rows < 2) throw InvalidParams("make_rectangular: need at least a 2x2 grid");
  GridBuilder b;
  auto id = [cols](int c, int r) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      b.positions.emplace_back(c * spacing, r * spacing);
      b.coords.emplace_back(c, r);
    }
  }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) b.add_spring(id(c, r), id(c + 1, r));
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c < cols; ++c) b.add_spring(id(c, r), id(c, r + 1));
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      b.add_spring(id(c, r), id(c + 1, r + 1));
      b.add_spring(id(c + 1, r), id(c, r + 1));
    }
  }
  for (int c = 0; c < cols; ++c) {
    b.bottom_nodes.push_back(id(c, 0));
    b.top_nodes.push_back(id(c, rows - 1));
  }
  return b.finish(params, l, defect, static_cast<double>((rows - 1) * (cols - 1)));
}

LatticeSpec make_triangular(int cols, int rows, double spacing, const SpringParams& params,
                            const ScalarProgram& l, const std::optional<LatticeDefect>& defect) {
  if (cols < 2 || rows < 2) throw InvalidParams("make_triangular: need at least a 2x2 strip");
  GridBuilder b;
  const double row_height = spacing * std::sqrt(3.0) / 2.0;
  std::vector<std::vector<int>> row_ids(static_cast<size_t>(rows));
  int next = 0;
  for (int r = 0; r < rows; ++r) {
    const bool odd = (r % 2) == 1;
    const int count = odd ? cols + 1 : cols;
    for (int c = 0; c < count; ++c) {
      const double x = odd ? (c - 0.5) * spacing : c * spacing;
      b.positions.emplace_back(x, r * row_height);
      b.coords.emplace_back(c, r);
      row_ids[static_cast<size_t>(r)].push_back(next++);
    }
  }
  for (int r = 0; r < rows; ++r) {
    const auto& ids = row_ids[static_cast<size_t>(r)];
    for (size_t c = 0; c + 1 < ids.size(); ++c) b.add_spring(ids[c], ids[c + 1]);
  }
  for (int r = 0; r + 1 < rows; ++r) {
    const auto& lo = row_ids[static_cast<size_t>(r)];
    const auto& hi = row_ids[static_cast<size_t>(r + 1)];
    const bool lo_even = (r % 2) == 0;
    for (size_t c = 0; c < lo.size(); ++c) {
      if (lo_even) {
        // even row node c sits between odd row nodes c and c+1
        b.add_spring(lo[c], hi[c]);
        b.add_spring(lo[c], hi[c + 1]);
      } else {
        if (c >= 1) b.add_spring(lo[c], hi[c - 1]);
        if (c < hi.size()) b.add_spring(lo[c], hi[c]);
      }
    }
  }
  b.bottom_nodes = row_ids.front();
  b.top_nodes = row_ids.back();
  return b.finish(params, l, defect, static_cast<double>((rows - 1) * (cols - 1)));
}

SingleSpringOracle oracle_single_spring(const SpringParams& p, double sigma0, double a0, double t0,
                                        const ScalarProgram& l, double t, bool upper) {
  spring::validate(p);
  l.validate();
  const double sign = upper ? 1.0 : -1.0;
  const double activation = sign * sigma0 - p.s * (1.0 - p.h) * a0 - p.c0;
  if (std::abs(activation) > 1e-9) {
    throw PreconditionViolated("oracle_single_spring: selected constraint is not active at t0");
  }
  // l must be monotone in the driving direction between t0 and t.
  double prev = l.at(t0);
  for (size_t i = 0; i < l.times.size(); ++i) {
    const double ti = l.times[i];
    if (ti <= t0 || ti >= t) continue;
    const double vi = l.values[i];
    if (sign * (vi - prev) < -1e-12) {
      throw PreconditionViolated("oracle_single_spring: load is not monotone on [t0, t]");
    }
    prev = vi;
  }
  if (sign * (l.at(t) - prev) < -1e-12) {
    throw PreconditionViolated("oracle_single_spring: load is not monotone on [t0, t]");
  }

  const double denom = 1.0 + p.s * p.s * (1.0 - p.h) / p.k;
  const double dl = l.at(t) - l.at(t0);
  const double y0 = sigma0 - p.k * l.at(t0);
  SingleSpringOracle out;
  out.y = y0 - (p.k * dl) / denom;
  out.a = a0 + (p.s * dl * sign) / denom;
  out.sigma = out.y + p.k * l.at(t);
  // Stop being valid once the opposite constraint engages (complete failure).
  const double opposite = -sign * out.sigma - p.s * (1.0 - p.h) * out.a - p.c0;
  if (opposite > 1e-12) {
    throw PreconditionViolated("oracle_single_spring: opposite constraint active before t");
  }
  return out;
}

std::vector<BranchSolution> oracle_two_spring_branches(const SpringParams& p1,
                                                       const SpringParams& p2) {
  spring::validate(p1);
  spring::validate(p2);
  if (!(p1.s > 0.0) || !(p2.s > 0.0)) {
    throw PreconditionViolated("oracle_two_spring_branches: geometric slopes must be positive");
  }
  const double sum_inv = 1.0 / p1.k + 1.0 / p2.k;
  const double kappa = 1.0 / std::sqrt(sum_inv);
  const double w1 = (1.0 - p1.h) * p1.s * p1.s;
  const double w2 = (1.0 - p2.h) * p2.s * p2.s;

  auto with_stress_rates = [&](BranchSolution b) {
    b.dsigma1_dl = kappa * b.dy_hat_dl + kappa * kappa;
    b.dsigma2_dl = b.dsigma1_dl;  // both stresses move together inside the self-stress span
    return b;
  };

  auto distributed = [&]() {
    BranchSolution b;
    b.kind = BranchKind::Distributed;
    const double denom = w1 + w2 + sum_inv * w1 * w2;
    b.existence_margin = denom;
    if (denom != 0.0) {
      const Eigen::Vector3d rate =
          -(w2 * upper_normal(kappa, p1.s, 0) + w1 * upper_normal(kappa, p2.s, 1)) / denom;
      b.dy_hat_dl = rate(0);
      b.da1_dl = rate(1);
      b.da2_dl = rate(2);
    }
    return b;
  };

  std::vector<BranchSolution> out;
  const bool hardening = p1.h < 1.0 && p2.h < 1.0;
  const bool perfect = p1.h == 1.0 && p2.h == 1.0;
  const bool softening = p1.h > 1.0 && p2.h > 1.0;
  if (!hardening && !perfect && !softening) {
    throw PreconditionViolated("oracle_two_spring_branches: mixed plasticity types not enumerated");
  }

  if (hardening) {
    BranchSolution b = distributed();
    b.exists = b.existence_margin > 0.0;
    out.push_back(with_stress_rates(b));
    return out;
  }
  if (perfect) {
    BranchSolution b;
    b.kind = BranchKind::PerfectFamily;
    b.theta = 0.5;
    const Eigen::Vector3d rate =
        -(0.5 * upper_normal(kappa, p1.s, 0) + 0.5 * upper_normal(kappa, p2.s, 1));
    b.dy_hat_dl = rate(0);
    b.da1_dl = rate(1);
    b.da2_dl = rate(2);
    b.exists = true;
    b.existence_margin = 0.0;
    out.push_back(with_stress_rates(b));
    return out;
  }

  // Both softening: two localized branches plus possibly the distributed one.
  {
    BranchSolution b;
    b.kind = BranchKind::Localized1;
    b.existence_margin = sum_inv * w1;  // exists while above -1
    b.exists = b.existence_margin > -1.0;
    if (b.exists) {
      const Eigen::Vector3d rate = -upper_normal(kappa, p1.s, 0) / (1.0 + sum_inv * w1);
      b.dy_hat_dl = rate(0);
      b.da1_dl = rate(1);
      b.da2_dl = rate(2);
    }
    out.push_back(with_stress_rates(b));
  }
  {
    BranchSolution b;
    b.kind = BranchKind::Localized2;
    b.existence_margin = sum_inv * w2;
    b.exists = b.existence_margin > -1.0;
    if (b.exists) {
      const Eigen::Vector3d rate = -upper_normal(kappa, p2.s, 1) / (1.0 + sum_inv * w2);
      b.dy_hat_dl = rate(0);
      b.da1_dl = rate(1);
      b.da2_dl = rate(2);
    }
    out.push_back(with_stress_rates(b));
  }
  {
    BranchSolution b = distributed();
    b.exists = b.existence_margin < 0.0;
    if (!b.exists) {
      b.dy_hat_dl = b.da1_dl = b.da2_dl = 0.0;
    }
    out.push_back(with_stress_rates(b));
  }
  return out;
}

StabilityChart stability_chart(const SweepProcess& process, const SweepState& prev, double t_next,
                               const Eigen::Vector2d& region_lo, const Eigen::Vector2d& region_hi,
                               int grid_n, int threads) {
  if (process.ops().m != 2) {
    throw UnsupportedDimension("stability_chart: needs a two-spring system");
  }
  if (grid_n < 4) throw InvalidParams("stability_chart: grid too coarse");
  if (!(region_hi.x() > region_lo.x()) || !(region_hi.y() > region_lo.y())) {
    throw InvalidParams("stability_chart: empty region");
  }

  StabilityChart chart;
  chart.region_lo = region_lo;
  chart.region_hi = region_hi;
  const Eigen::Vector2d cell = (region_hi - region_lo) / grid_n;

  auto t_of = [&](const Eigen::Vector2d& at, polyproj::Projector::Workspace* ws) {
    Vector a_tilde(2);
    a_tilde << at.x(), at.y();
    const TMapResult res = process.t_map(prev, t_next, a_tilde, ws);
    return Eigen::Vector2d(res.a_new(0), res.a_new(1));
  };

  chart.samples.resize(static_cast<size_t>(grid_n) * static_cast<size_t>(grid_n));
  int nthreads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  nthreads = std::clamp(nthreads, 1, 8);
  {
    std::vector<std::thread> pool;
    std::atomic<int> next_row{0};
    for (int w = 0; w < nthreads; ++w) {
      pool.emplace_back([&]() {
        polyproj::Projector::Workspace ws;
        for (int iy = next_row.fetch_add(1); iy < grid_n; iy = next_row.fetch_add(1)) {
          for (int ix = 0; ix < grid_n; ++ix) {
            Eigen::Vector2d at(region_lo.x() + (ix + 0.5) * cell.x(),
                               region_lo.y() + (iy + 0.5) * cell.y());
            auto& sample = chart.samples[static_cast<size_t>(iy) * grid_n + ix];
            sample.a_tilde = at;
            sample.image = t_of(at, &ws);
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  auto residual_of = [&](size_t idx) {
    return (chart.samples[idx].image - chart.samples[idx].a_tilde).cwiseAbs().maxCoeff();
  };

  // Refine every local minimum of the residual field.
  polyproj::Projector::Workspace ws;
  std::vector<Eigen::Vector2d> found;
  for (int iy = 0; iy < grid_n; ++iy) {
    for (int ix = 0; ix < grid_n; ++ix) {
      const size_t idx = static_cast<size_t>(iy) * grid_n + ix;
      const double res = residual_of(idx);
      bool is_min = true;
      for (int dy = -1; dy <= 1 && is_min; ++dy) {
        for (int dx = -1; dx <= 1 && is_min; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int jx = ix + dx;
          const int jy = iy + dy;
          if (jx < 0 || jy < 0 || jx >= grid_n || jy >= grid_n) continue;
          if (residual_of(static_cast<size_t>(jy) * grid_n + jx) < res) is_min = false;
        }
      }
      if (!is_min) continue;
      // Bisection-style refinement around the candidate cell.
      Eigen::Vector2d center = chart.samples[idx].a_tilde;
      Eigen::Vector2d half = cell;
      double best = res;
      while (half.maxCoeff() > 1e-8) {
        Eigen::Vector2d arg = center;
        for (int sy = -1; sy <= 1; ++sy) {
          for (int sx = -1; sx <= 1; ++sx) {
            Eigen::Vector2d cand = center + Eigen::Vector2d(sx * half.x(), sy * half.y());
            cand = cand.cwiseMax(region_lo).cwiseMin(region_hi);
            const Eigen::Vector2d img = t_of(cand, &ws);
            const double r = (img - cand).cwiseAbs().maxCoeff();
            if (r < best) {
              best = r;
              arg = cand;
            }
          }
        }
        center = arg;
        half *= 0.5;
      }
      if (best < 1e-7) found.push_back(center);
    }
  }

  // Merge refinements that landed on the same point.
  const double merge_radius = 1e-6 * (1.0 + (region_hi - region_lo).norm());
  std::vector<Eigen::Vector2d> unique_points;
  for (const auto& pt : found) {
    bool dup = false;
    for (const auto& u : unique_points) {
      if ((pt - u).norm() < merge_radius) {
        dup = true;
        break;
      }
    }
    if (!dup) unique_points.push_back(pt);
  }

  // Classify by iterating the map from symmetric perturbations around each
  // fixed point: axis directions alone miss saddles whose unstable set runs
  // diagonally, so the diagonals are probed as well.
  const double probe = 1e-4 * (region_hi - region_lo).maxCoeff();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const std::array<Eigen::Vector2d, 8> dirs = {
      Eigen::Vector2d(1, 0),           Eigen::Vector2d(-1, 0),
      Eigen::Vector2d(0, 1),           Eigen::Vector2d(0, -1),
      Eigen::Vector2d(inv_sqrt2, inv_sqrt2),   Eigen::Vector2d(-inv_sqrt2, -inv_sqrt2),
      Eigen::Vector2d(inv_sqrt2, -inv_sqrt2),  Eigen::Vector2d(-inv_sqrt2, inv_sqrt2)};
  for (const auto& pt : unique_points) {
    int returned = 0;
    for (const auto& dir : dirs) {
      Eigen::Vector2d a = (pt + probe * dir).cwiseMax(0.0);
      for (int it = 0; it < 300; ++it) {
        const Eigen::Vector2d nexta = t_of(a, &ws);
        const double delta = (nexta - a).cwiseAbs().maxCoeff();
        a = nexta;
        if (delta < 1e-12) break;
        if (!a.allFinite() || a.cwiseAbs().maxCoeff() > 1e6) break;
      }
      if ((a - pt).cwiseAbs().maxCoeff() <= 1.25 * probe + 1e-9) ++returned;
    }
    StabilityChart::FixedPoint fp;
    fp.location = pt;
    fp.residual = (t_of(pt, &ws) - pt).cwiseAbs().maxCoeff();
    fp.classification = returned == 8 ? FixedPointClass::Stable
                        : returned == 0 ? FixedPointClass::Unstable
                                        : FixedPointClass::Saddle;
    chart.fixed_points.push_back(fp);
  }
  return chart;
}

}  // namespace scenarios
}  // namespace sweeplat
