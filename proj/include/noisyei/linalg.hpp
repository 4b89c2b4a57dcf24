#pragma once

#include <Eigen/Dense>

namespace nei {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct JitteredCholesky {
  Matrix lower;
  double jitter = 0.0;  // absolute amount added to the diagonal
};

/// Lower Cholesky factor of `gram + jitter * I`.
///
/// The factorization is first attempted without jitter and accepted only if
/// every squared pivot is at least `kMinPivotRatio * scale`. Otherwise the
/// jitter starts at 1e-8 * scale and doubles until 1e-4 * scale; past that a
/// ConditioningError is thrown. `scale` is the prior signal variance.
JitteredCholesky jittered_cholesky(const Matrix& gram, double scale);

inline constexpr double kMinPivotRatio = 1e-10;
inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-4;

/// Lower-triangular A with A A^T = cov for a positive semi-definite `cov`.
///
/// Pivots that fall below `tolerance` are treated as exact zeros and their
/// column is zeroed, so degenerate (e.g. all-zero) covariances are accepted.
/// A pivot below -`tolerance` means the matrix is not PSD and raises
/// ConditioningError.
Matrix psd_factor(const Matrix& cov, double tolerance);

/// Solves L x = b in place for lower-triangular L.
void solve_lower_in_place(const Matrix& lower, Eigen::Ref<Matrix> rhs);

/// Solves L^T x = b in place for lower-triangular L.
void solve_upper_transposed_in_place(const Matrix& lower, Eigen::Ref<Matrix> rhs);

}  // namespace nei
