#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sweeplat/lattice.hpp"
#include "sweeplat/numlin.hpp"
#include "sweeplat/scenarios.hpp"

#include <random>

using namespace sweeplat;

namespace {

SpringParams unit_params() { return SpringParams{1.0, 1.1, 0.3, 0.01}; }

LatticeSpec toy(double k1 = 1.0, double k2 = 1.0) {
  SpringParams p1{k1, 1.2, 1.0, 0.01};
  SpringParams p2{k2, 1.2, 1.0, 0.01};
  return scenarios::make_two_spring(p1, p2, ScalarProgram::ramp(0.0, 2.0, 1.0, 3.0));
}

}  // namespace

TEST_CASE("incidence matrix of the toy chain") {
  auto spec = toy();
  Matrix q = lattice::incidence_matrix(spec);
  REQUIRE(q.rows() == 3);
  REQUIRE(q.cols() == 2);
  CHECK(q(0, 0) == 1.0);
  CHECK(q(1, 0) == -1.0);
  CHECK(q(2, 0) == 0.0);
  CHECK(q(1, 1) == 1.0);
  CHECK(q(2, 1) == -1.0);
  CHECK((q.colwise().sum().cwiseAbs().maxCoeff()) == 0.0);
}

TEST_CASE("rest lengths and compatibility of the toy chain") {
  auto spec = toy();
  Vector len = lattice::rest_lengths(spec);
  CHECK(len(0) == doctest::Approx(1.0));
  CHECK(len(1) == doctest::Approx(1.0));
  auto [compat, dirs] = lattice::compatibility_matrix(spec);
  Matrix expected(2, 3);
  expected << -1, 1, 0, 0, -1, 1;
  CHECK((compat - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(dirs(0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("direction rows are unit and match finite differences") {
  auto l = ScalarProgram::ramp(0.0, 0.0, 1.0, 0.1);
  auto spec = scenarios::make_rectangular(4, 3, 0.5, unit_params(), l);
  auto [compat, dirs] = lattice::compatibility_matrix(spec);
  for (Index i = 0; i < dirs.rows(); ++i) {
    CHECK(dirs.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }

  // phi(xi0 + dz) - phi(xi0) against compat * dz for small random dz.
  std::mt19937_64 rng(42);
  std::normal_distribution<double> dist;
  const Vector xi0 = spec.flat_positions();
  const Vector len0 = lattice::rest_lengths(spec);
  Vector dz(xi0.size());
  for (Index i = 0; i < dz.size(); ++i) dz(i) = 1e-6 * dist(rng);
  LatticeSpec moved = spec;
  for (int j = 0; j < spec.node_count(); ++j)
    for (int k = 0; k < spec.dim; ++k) moved.positions(j, k) += dz(spec.dim * j + k);
  const Vector len1 = lattice::rest_lengths(moved);
  const Vector fd = len1 - len0;
  const Vector lin = compat * dz;
  CHECK((fd - lin).cwiseAbs().maxCoeff() < 1e-10);  // second order in ||dz||
}

TEST_CASE("horizontal spring direction in 2d") {
  LatticeSpec spec;
  spec.dim = 2;
  spec.positions.resize(3, 2);
  spec.positions << 0, 0, 1, 0, 1, 1;
  spec.springs = {Edge{0, 1, unit_params()}, Edge{1, 2, unit_params()}, Edge{0, 2, unit_params()}};
  spec.constraint_matrix = Matrix::Zero(4, 6);
  spec.constraint_matrix(0, 0) = 1;
  spec.constraint_matrix(1, 1) = 1;
  spec.constraint_matrix(2, 2) = 1;
  spec.constraint_matrix(3, 3) = 1;
  spec.displacement_load = LoadProgram::constant(Vector::Zero(4));
  auto [compat, dirs] = lattice::compatibility_matrix(spec);
  (void)compat;
  // Spring 0 runs from node 0 to node 1 along +x, so terminus->origin is -x.
  CHECK(dirs(0, 0) == doctest::Approx(-1.0));
  CHECK(dirs(0, 1) == doctest::Approx(0.0));
  // Diagonal spring has unit norm direction.
  CHECK(dirs.row(2).norm() == doctest::Approx(1.0));
}

TEST_CASE("assumption report for the toy system") {
  auto report = lattice::verify_assumptions(toy());
  CHECK(report.rank_r_ok);
  CHECK(report.kinematic_determinacy_ok);
  CHECK(report.self_stress_nondegenerate);
  CHECK(report.n == 3);
  CHECK(report.m == 2);
  CHECK(report.q == 2);
  CHECK(report.dim_u == 1);
  CHECK(report.dim_v == 1);
}

TEST_CASE("rectangular lattice hits the reference counts") {
  auto l = ScalarProgram::ramp(0.0, 0.0, 6.0, 0.8);
  auto spec = scenarios::make_rectangular(10, 15, 0.5, unit_params(), l);
  auto report = lattice::verify_assumptions(spec);
  CHECK(report.n == 150);
  CHECK(report.m == 527);
  CHECK(report.q == 21);
  CHECK(report.dim_u == 279);
  CHECK(report.dim_v == 248);
  CHECK(report.all_ok());

  Matrix q = lattice::incidence_matrix(spec);
  CHECK(q.rows() == 150);
  CHECK(q.cols() == 527);
  CHECK(q.colwise().sum().cwiseAbs().maxCoeff() == 0.0);

  // Axis springs have rest length 0.5, diagonals 0.5*sqrt(2).
  Vector len = lattice::rest_lengths(spec);
  for (Index i = 0; i < len.size(); ++i) {
    const bool axis = std::abs(len(i) - 0.5) < 1e-12;
    const bool diag = std::abs(len(i) - 0.5 * std::sqrt(2.0)) < 1e-12;
    CHECK((axis || diag));
  }
}

TEST_CASE("toy assembly matches the worked example") {
  auto spec = toy();
  auto ops = lattice::assemble(spec);
  const double kappa = 1.0 / std::sqrt(2.0);

  Matrix f1_expected(2, 3);
  f1_expected << -1, 2, 1, -1, -2, 1;
  f1_expected *= 0.25;
  CHECK((ops.f1 - f1_expected).cwiseAbs().maxCoeff() < 1e-12);

  REQUIRE(ops.dim_v == 1);
  CHECK(ops.v_basis(0, 0) == doctest::Approx(kappa).epsilon(1e-12));
  CHECK(ops.v_basis(1, 0) == doctest::Approx(kappa).epsilon(1e-12));

  // G applied to (0, -l) gives -kappa^2 (1,1) l.
  Vector r(2);
  r << 0.0, -0.7;
  Vector gr = ops.g * r;
  CHECK(gr(0) == doctest::Approx(-0.5 * 0.7).epsilon(1e-12));
  CHECK(gr(1) == doctest::Approx(-0.5 * 0.7).epsilon(1e-12));
  Vector gvr = ops.g_v * r;
  CHECK(gvr(0) == doctest::Approx(-kappa * 0.7).epsilon(1e-12));

  // F applied to a middle-node force spreads it by stiffness.
  Vector f(3);
  f << 0.0, 0.02, 0.0;
  Vector ff = ops.f * f;
  CHECK(ff(0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(ff(1) == doctest::Approx(-0.01).epsilon(1e-12));
}

TEST_CASE("two-spring assembly with unequal stiffness") {
  auto spec = toy(1.0, 2.0);
  auto ops = lattice::assemble(spec);
  const double kappa = 1.0 / std::sqrt(1.0 + 0.5);
  CHECK(ops.v_basis(0, 0) == doctest::Approx(kappa).epsilon(1e-12));
  Vector f(3);
  f << 0.0, 0.03, 0.0;
  Vector ff = ops.f * f;
  CHECK(ff(0) == doctest::Approx(0.03 * 1.0 / 3.0).epsilon(1e-12));
  CHECK(ff(1) == doctest::Approx(-0.03 * 2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("assembled operator invariants on generated lattices") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> dist;
  auto l = ScalarProgram::ramp(0.0, 0.0, 1.0, 0.1);
  std::vector<LatticeSpec> specs;
  specs.push_back(scenarios::make_rectangular(3, 4, 0.5, unit_params(), l));
  specs.push_back(scenarios::make_rectangular(5, 3, 1.0, SpringParams{2.0, 0.9, 0.5, 0.02}, l));
  specs.push_back(scenarios::make_triangular(4, 4, 0.5, unit_params(), l));
  specs.push_back(toy());

  for (const auto& spec : specs) {
    auto report = lattice::verify_assumptions(spec);
    REQUIRE(report.all_ok());
    CHECK(report.dim_v == report.m - spec.node_count() * spec.dim + report.q);

    auto ops = lattice::assemble(spec);
    const Matrix kinv = ops.k.cwiseInverse().asDiagonal();
    CHECK((ops.v_basis.transpose() * kinv * ops.v_basis - Matrix::Identity(ops.dim_v, ops.dim_v))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    if (ops.dim_u > 0) {
      CHECK((ops.v_basis.transpose() * kinv * ops.u_basis).cwiseAbs().maxCoeff() < 1e-10);
    }
    const Matrix projector_sum =
        ops.u_basis * ops.proj_u + ops.v_basis * ops.proj_v - Matrix::Identity(ops.m, ops.m);
    CHECK(projector_sum.cwiseAbs().maxCoeff() < 1e-9);

    // Columns of G live in span(V), columns of F in span(U).
    const Matrix vvk = ops.v_basis * ops.proj_v;
    CHECK((vvk * ops.g - ops.g).cwiseAbs().maxCoeff() < 1e-10);
    if (ops.dim_u > 0) {
      const Matrix uuk = ops.u_basis * ops.proj_u;
      CHECK((uuk * ops.f - ops.f).cwiseAbs().maxCoeff() < 1e-10);
    }

    // Random self-stress vectors satisfy the equilibrium characterization.
    for (int trial = 0; trial < 5; ++trial) {
      Vector coeff(ops.dim_v);
      for (Index i = 0; i < coeff.size(); ++i) coeff(i) = dist(rng);
      const Vector v = ops.v_basis * coeff;
      const Vector residual = ops.ker_r_projector * (ops.compat.transpose() * v);
      CHECK(residual.cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, v.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("displacement recovery") {
  auto spec = toy();
  auto ops = lattice::assemble(spec);

  // Relaxed configuration: l = 2 keeps the chain at its reference length.
  Vector x = Vector::Zero(2);
  Vector r(2);
  r << 0.0, -2.0;
  auto rec = lattice::recover_displacements(ops, x, r);
  CHECK(rec.zeta.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(rec.elongation_residual < 1e-12);
  CHECK(rec.constraint_residual < 1e-12);

  // Stretch by delta applied at the right end, all carried by spring 1.
  const double delta = 0.05;
  Vector x2(2);
  x2 << delta, 0.0;
  Vector r2(2);
  r2 << 0.0, -(2.0 + delta);
  auto rec2 = lattice::recover_displacements(ops, x2, r2);
  CHECK(rec2.zeta(0) == doctest::Approx(0.0));
  CHECK(rec2.zeta(1) == doctest::Approx(delta).epsilon(1e-10));
  CHECK(rec2.zeta(2) == doctest::Approx(delta).epsilon(1e-10));
  CHECK(rec2.elongation_residual < 1e-10);

  // Round trip for a random compatible elongation on a 2d lattice.
  auto l = ScalarProgram::ramp(0.0, 0.0, 1.0, 0.1);
  auto spec2 = scenarios::make_rectangular(4, 4, 0.5, unit_params(), l);
  auto ops2 = lattice::assemble(spec2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist;
  Vector zeta_star(ops2.n * ops2.d);
  for (Index i = 0; i < zeta_star.size(); ++i) zeta_star(i) = 0.01 * dist(rng);
  const Vector x3 = ops2.compat * zeta_star;
  const Vector r3 = -(ops2.constraint * (zeta_star + ops2.xi0));
  auto rec3 = lattice::recover_displacements(ops2, x3, r3);
  CHECK((rec3.zeta - zeta_star).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("degenerate spring raises") {
  LatticeSpec spec;
  spec.dim = 1;
  spec.positions.resize(2, 1);
  spec.positions << 0.0, 0.0;
  spec.springs = {Edge{0, 1, unit_params()}};
  spec.constraint_matrix = Matrix::Identity(2, 2);
  spec.displacement_load = LoadProgram::constant(Vector::Zero(2));
  CHECK_THROWS_AS(lattice::rest_lengths(spec), DegenerateSpring);
}
