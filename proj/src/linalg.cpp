#include "noisyei/linalg.hpp"

#include <cmath>
#include <sstream>

#include "noisyei/errors.hpp"

namespace nei {
namespace {

// Plain column Cholesky. Returns false on a non-positive pivot. On success
// `min_pivot_sq` holds the smallest squared diagonal entry.
bool cholesky(const Matrix& a, double jitter, Matrix& lower, double& min_pivot_sq) {
  const Eigen::Index n = a.rows();
  lower.setZero(n, n);
  min_pivot_sq = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) + jitter;
    for (Eigen::Index k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    min_pivot_sq = std::min(min_pivot_sq, d);
    const double ljj = std::sqrt(d);
    lower(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

JitteredCholesky jittered_cholesky(const Matrix& gram, double scale) {
  if (gram.rows() != gram.cols()) throw InvalidArgument("jittered_cholesky: matrix is not square");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgument("jittered_cholesky: scale must be positive and finite");
  }
  JitteredCholesky out;
  double min_pivot_sq = 0.0;
  if (cholesky(gram, 0.0, out.lower, min_pivot_sq) && min_pivot_sq >= kMinPivotRatio * scale) {
    return out;
  }
  for (double jitter = kJitterStart * scale; jitter <= kJitterMax * scale * (1.0 + 1e-12);
       jitter *= 2.0) {
    if (cholesky(gram, jitter, out.lower, min_pivot_sq)) {
      out.jitter = jitter;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "Gram matrix of size " << gram.rows() << " is not positive definite even with jitter "
      << kJitterMax * scale;
  throw ConditioningError(msg.str());
}

Matrix psd_factor(const Matrix& cov, double tolerance) {
  const Eigen::Index n = cov.rows();
  if (cov.cols() != n) throw InvalidArgument("psd_factor: matrix is not square");
  Matrix lower = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = cov(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
    if (!std::isfinite(d) || d < -tolerance) {
      std::ostringstream msg;
      msg << "covariance is not positive semi-definite (pivot " << d << " at index " << j << ")";
      throw ConditioningError(msg.str());
    }
    if (d <= tolerance) continue;
    const double ljj = std::sqrt(d);
    lower(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = cov(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / ljj;
    }
  }
  return lower;
}

void solve_lower_in_place(const Matrix& lower, Eigen::Ref<Matrix> rhs) {
  lower.triangularView<Eigen::Lower>().solveInPlace(rhs);
}

void solve_upper_transposed_in_place(const Matrix& lower, Eigen::Ref<Matrix> rhs) {
  lower.transpose().triangularView<Eigen::Upper>().solveInPlace(rhs);
}

}  // namespace nei
