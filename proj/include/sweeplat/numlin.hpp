#pragma once

#include "sweeplat/common.hpp"

#include <vector>

namespace sweeplat::numlin {

inline constexpr double kDefaultRankTol = 1e-10;

struct RankReport {
  Index numerical_rank = 0;
  std::vector<double> singular_values;  // nonincreasing
  double tolerance_used = 0.0;
};

// Singular values above rel_tol * sigma_max count toward the rank.
RankReport rank_with_tolerance(const Matrix& m, double rel_tol = kDefaultRankTol);

// Right inverse M^T (M M^T)^{-1} of a full-row-rank matrix.
Matrix pinv_full_row_rank(const Matrix& m);

// Left inverse (M^T M)^{-1} M^T of a full-column-rank matrix.
Matrix pinv_full_col_rank(const Matrix& m);

// Basis B' with span(B') = span(B) and B'^T W B' = I for SPD weight W.
// Weighted Gram-Schmidt with one reorthogonalization pass; sign fixed so the
// first non-negligible entry of each column is positive.
Matrix metric_orthonormal_columns(const Matrix& basis, const Matrix& weight);

// Orthonormal basis of Ker(m) with the same sign convention, via SVD.
Matrix kernel_basis(const Matrix& m, double rel_tol = kDefaultRankTol);

// sigma_max / sigma_min; +inf for a singular matrix.
double condition_number(const Matrix& m);

}  // namespace sweeplat::numlin
