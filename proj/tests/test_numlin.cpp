#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sweeplat/numlin.hpp"

#include <random>

using namespace sweeplat;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> dist;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

Matrix random_spd(std::mt19937_64& rng, Index n) {
  Matrix a = random_matrix(rng, n, n);
  return a * a.transpose() + 0.5 * Matrix::Identity(n, n);
}

}  // namespace

TEST_CASE("right pseudoinverse of the two-row selector") {
  Matrix r(2, 3);
  r << 1, 0, 0, 0, 0, 1;
  Matrix plus = numlin::pinv_full_row_rank(r);
  Matrix expected(3, 2);
  expected << 1, 0, 0, 0, 0, 1;
  CHECK((plus - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((r * plus - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("right pseudoinverse identity and hand case") {
  CHECK((numlin::pinv_full_row_rank(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  Matrix row(1, 2);
  row << 1, 1;
  Matrix plus = numlin::pinv_full_row_rank(row);
  CHECK(plus(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(plus(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("left pseudoinverse of the toy stacked matrix") {
  Matrix m(4, 3);
  m << -1, 1, 0, 0, -1, 1, 1, 0, 0, 0, 0, 1;
  Matrix plus = numlin::pinv_full_col_rank(m);
  CHECK((plus * m - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

  Matrix col(2, 1);
  col << 1, 1;
  Matrix left = numlin::pinv_full_col_rank(col);
  CHECK(left(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(left(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rank deficiency raises") {
  Matrix m(2, 3);
  m << 1, 2, 3, 2, 4, 6;
  CHECK_THROWS_AS(numlin::pinv_full_row_rank(m), RankDeficient);
  CHECK_THROWS_AS(numlin::pinv_full_col_rank(m.transpose()), RankDeficient);
}

TEST_CASE("rank with tolerance") {
  Matrix r(2, 3);
  r << 1, 0, 0, 0, 0, 1;
  CHECK(numlin::rank_with_tolerance(r).numerical_rank == 2);
  CHECK(numlin::rank_with_tolerance(Matrix::Zero(3, 4)).numerical_rank == 0);
  Matrix tiny(2, 2);
  tiny << 1, 0, 0, 1e-15;
  CHECK(numlin::rank_with_tolerance(tiny, 1e-10).numerical_rank == 1);
}

TEST_CASE("metric orthonormalization hand cases") {
  Matrix b(2, 1);
  b << 1, 1;
  Matrix w = Matrix::Identity(2, 2);
  Matrix q = numlin::metric_orthonormal_columns(b, w);
  const double kappa = 1.0 / std::sqrt(2.0);
  CHECK(q(0, 0) == doctest::Approx(kappa).epsilon(1e-12));
  CHECK(q(1, 0) == doctest::Approx(kappa).epsilon(1e-12));

  Matrix w2(2, 2);
  w2 << 4, 0, 0, 1;
  Matrix q2 = numlin::metric_orthonormal_columns(Matrix::Identity(2, 2), w2);
  CHECK(q2(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(q2(1, 0) == doctest::Approx(0.0));
  CHECK(q2(0, 1) == doctest::Approx(0.0));
  CHECK(q2(1, 1) == doctest::Approx(1.0).epsilon(1e-12));

  // An already orthonormal basis comes back unchanged up to sign.
  Matrix q3 = numlin::metric_orthonormal_columns(q2, w2);
  CHECK((q3 - q2).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(numlin::metric_orthonormal_columns(Matrix::Ones(2, 2), w), RankDeficient);
}

TEST_CASE("randomized pseudoinverse and orthonormality properties") {
  std::mt19937_64 rng(20240811);
  for (int trial = 0; trial < 40; ++trial) {
    const Index rows = 2 + trial % 7;
    const Index cols = rows + 1 + trial % 5;
    Matrix m = random_matrix(rng, rows, cols);
    Matrix plus = numlin::pinv_full_row_rank(m);
    CHECK((m * plus - Matrix::Identity(rows, rows)).cwiseAbs().maxCoeff() < 1e-10);
    Matrix left = numlin::pinv_full_col_rank(m.transpose());
    CHECK((left * m.transpose() - Matrix::Identity(rows, rows)).cwiseAbs().maxCoeff() < 1e-10);

    Matrix w = random_spd(rng, cols);
    Matrix basis = random_matrix(rng, cols, rows);
    Matrix ortho = numlin::metric_orthonormal_columns(basis, w);
    CHECK((ortho.transpose() * w * ortho - Matrix::Identity(rows, rows)).cwiseAbs().maxCoeff() <
          1e-10);
    Matrix joined(cols, 2 * rows);
    joined.leftCols(rows) = basis;
    joined.rightCols(rows) = ortho;
    CHECK(numlin::rank_with_tolerance(joined).numerical_rank == rows);
  }
}

TEST_CASE("deterministic outputs") {
  std::mt19937_64 rng(7);
  Matrix m = random_matrix(rng, 5, 9);
  Matrix a = numlin::pinv_full_row_rank(m);
  Matrix b = numlin::pinv_full_row_rank(m);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  auto r1 = numlin::rank_with_tolerance(m);
  auto r2 = numlin::rank_with_tolerance(m);
  CHECK(r1.singular_values == r2.singular_values);
}

TEST_CASE("kernel basis spans the kernel") {
  Matrix m(1, 2);
  m << 1, -1;
  Matrix k = numlin::kernel_basis(m);
  REQUIRE(k.cols() == 1);
  CHECK((m * k).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(k(0, 0) > 0.0);  // sign convention
}
