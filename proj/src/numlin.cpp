#include "sweeplat/numlin.hpp"

#include <cmath>
#include <limits>

namespace sweeplat::numlin {

namespace {

// Flip a column so its first entry of non-negligible magnitude is positive.
void fix_column_sign(Eigen::Ref<Matrix> m, Index col) {
  const double scale = m.col(col).cwiseAbs().maxCoeff();
  if (scale <= 0.0) return;
  for (Index i = 0; i < m.rows(); ++i) {
    if (std::abs(m(i, col)) > 1e-8 * scale) {
      if (m(i, col) < 0.0) m.col(col) = -m.col(col);
      return;
    }
  }
}

}  // namespace

RankReport rank_with_tolerance(const Matrix& m, double rel_tol) {
  if (rel_tol <= 0.0) throw InvalidParams("rank_with_tolerance: rel_tol must be positive");
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  RankReport report;
  report.singular_values.assign(sv.data(), sv.data() + sv.size());
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  report.tolerance_used = rel_tol * smax;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > report.tolerance_used && sv(i) > 0.0) ++report.numerical_rank;
  }
  return report;
}

Matrix pinv_full_row_rank(const Matrix& m) {
  const RankReport report = rank_with_tolerance(m);
  if (report.numerical_rank < m.rows()) {
    throw RankDeficient("pinv_full_row_rank: numerical rank " + std::to_string(report.numerical_rank) +
                        " < rows " + std::to_string(m.rows()));
  }
  // M^T (M M^T)^{-1}, with the SPD system solved by Cholesky.
  Matrix gram = m * m.transpose();
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw RankDeficient("pinv_full_row_rank: Gram factorization failed");
  Matrix sol = llt.solve(m);  // (M M^T)^{-1} M
  return sol.transpose();
}

Matrix pinv_full_col_rank(const Matrix& m) {
  const RankReport report = rank_with_tolerance(m);
  if (report.numerical_rank < m.cols()) {
    throw RankDeficient("pinv_full_col_rank: numerical rank " + std::to_string(report.numerical_rank) +
                        " < cols " + std::to_string(m.cols()));
  }
  Matrix gram = m.transpose() * m;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw RankDeficient("pinv_full_col_rank: Gram factorization failed");
  return llt.solve(m.transpose());  // (M^T M)^{-1} M^T
}

Matrix metric_orthonormal_columns(const Matrix& basis, const Matrix& weight) {
  if (basis.rows() != weight.rows() || weight.rows() != weight.cols()) {
    throw InvalidParams("metric_orthonormal_columns: dimension mismatch");
  }
  Matrix out = basis;
  for (Index j = 0; j < out.cols(); ++j) {
    const double original = std::sqrt(basis.col(j).dot(weight * basis.col(j)));
    for (int pass = 0; pass < 2; ++pass) {
      for (Index i = 0; i < j; ++i) {
        const double coeff = out.col(i).dot(weight * out.col(j));
        out.col(j) -= coeff * out.col(i);
      }
    }
    const double norm = std::sqrt(out.col(j).dot(weight * out.col(j)));
    if (!(norm > kDefaultRankTol * original) || original <= 0.0) {
      throw RankDeficient("metric_orthonormal_columns: column " + std::to_string(j) +
                          " is dependent on the previous ones");
    }
    out.col(j) /= norm;
    fix_column_sign(out, j);
  }
  return out;
}

Matrix kernel_basis(const Matrix& m, double rel_tol) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * smax && sv(i) > 0.0) ++rank;
  }
  Matrix kernel = svd.matrixV().rightCols(m.cols() - rank);
  for (Index j = 0; j < kernel.cols(); ++j) fix_column_sign(kernel, j);
  return kernel;
}

double condition_number(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0) return std::numeric_limits<double>::infinity();
  const double smin = sv(sv.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

}  // namespace sweeplat::numlin
