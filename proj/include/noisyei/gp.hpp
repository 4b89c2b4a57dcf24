#pragma once

#include <cstdint>
#include <vector>

#include "noisyei/linalg.hpp"

namespace nei {

/// Matérn 5/2 hyperparameters in the coordinates and units of the data the
/// model is conditioned on.
struct KernelParams {
  Vector lengthscales;           // one per input dimension (ARD)
  double signal_variance = 1.0;
  double mean_constant = 0.0;    // constant prior mean

  /// Throws InvalidArgument unless the invariants hold for `dim` inputs.
  void validate(Eigen::Index dim) const;
};

/// Observations y_i = f(x_i) + eps_i with eps_i ~ N(0, noise_sds_i^2).
struct NoisyDataset {
  Matrix points;     // n x d, one point per row
  Vector means;      // n
  Vector noise_sds;  // n, zero for exact observations

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  void validate() const;
};

/// Mean and covariance of latent function values at a set of points.
struct MVNPosterior {
  Vector mean;
  Matrix cov;
};

struct MarginalPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct MarginalGradient {
  double mean = 0.0;
  double variance = 0.0;
  Vector mean_grad;      // d(mean)/dx
  Vector variance_grad;  // d(variance)/dx
};

/// Box of admissible inputs; used to normalize inputs while fitting.
struct Bounds {
  Vector lower;
  Vector upper;

  static Bounds unit_cube(Eigen::Index dim);
  Eigen::Index dim() const { return lower.size(); }
  void validate() const;
};

double matern52(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x2,
                const KernelParams& params);

/// Kernel matrix between the rows of `a` and the rows of `b`.
Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelParams& params);

/// Exact GP regression on heteroscedastic, fixed-noise observations.
///
/// Immutable once constructed. Predicted variances have the diagonal jitter
/// removed and are clamped at zero; variances below 1e-12 of the signal
/// variance are reported as exactly zero.
class GPModel {
 public:
  GPModel(KernelParams params, NoisyDataset data);

  const KernelParams& params() const { return params_; }
  const NoisyDataset& data() const { return data_; }
  Eigen::Index dim() const { return data_.dim(); }
  /// Lower factor of K + diag(noise^2) + jitter * I.
  const Matrix& factor() const { return factor_; }
  double jitter() const { return jitter_; }
  /// (K + D)^-1 (y - mean_constant).
  const Vector& alpha() const { return alpha_; }

  /// Joint posterior of the latent values at `queries` (rows).
  MVNPosterior posterior(const Matrix& queries) const;

  /// Joint posterior over the training points followed by `extra` points.
  ///
  /// The training block is evaluated in the noise form D - D (K + D)^-1 D, so
  /// that exactly observed points have exactly zero posterior variance and
  /// their posterior mean equals the observation.
  MVNPosterior posterior_with_training(const Matrix& extra) const;

  MarginalPrediction predict(const Eigen::Ref<const Vector>& x) const;
  MarginalGradient predict_with_gradient(const Eigen::Ref<const Vector>& x) const;

  /// k(x, X) for the training points X.
  Vector cross_kernel(const Eigen::Ref<const Vector>& x) const;
  /// d k(x, X_i) / dx as an n x d matrix.
  Matrix cross_kernel_jacobian(const Eigen::Ref<const Vector>& x) const;
  /// (K + D)^-1 rhs.
  Matrix solve(const Matrix& rhs) const;
  /// Latent variance at x given k = cross_kernel(x), with jitter removed and
  /// the floor applied. If `w` is given it receives (K + D)^-1 k.
  double variance_from_cross(const Eigen::Ref<const Vector>& k, Vector* w = nullptr) const;

 private:
  double floor_variance(double raw) const;

  KernelParams params_;
  NoisyDataset data_;
  Matrix factor_;
  double jitter_ = 0.0;
  Vector alpha_;
};

/// A noiseless GP on (points, values) reusing the given hyperparameters.
GPModel condition_noiseless(const KernelParams& params, Matrix points, Vector values);

struct LogMarginalLikelihood {
  double value = 0.0;
  /// Gradient w.r.t. (log lengthscale_1 .. log lengthscale_d, log signal_variance).
  Vector gradient;
};

/// Gaussian log marginal likelihood of `data` under `params` and its
/// gradient in log-hyperparameter coordinates.
LogMarginalLikelihood log_marginal_likelihood(const NoisyDataset& data, const KernelParams& params);

struct FitOptions {
  int starts = 8;
  std::uint64_t seed = 0;
  double lengthscale_prior_median = 0.25;  // fraction of each input range
  double log_sd = 1.0;
  double min_lengthscale = 0.01;           // fractions of each input range
  double max_lengthscale = 20.0;
  double min_signal_variance = 1e-4;       // in standardized output units
  double max_signal_variance = 1e2;
  int max_iterations = 200;
};

/// MAP hyperparameters under independent log-normal priors.
///
/// Inputs are mapped to the unit cube through `bounds` and the means are
/// standardized before fitting; the result is expressed in the original
/// units. Throws InsufficientData with fewer than two observations.
KernelParams fit_map(const NoisyDataset& data, const Bounds& bounds, const FitOptions& options = {});

/// Log posterior (up to a constant) that fit_map maximizes, evaluated on
/// already-normalized data; exposed for gradient checks.
LogMarginalLikelihood log_map_objective(const NoisyDataset& standardized, const KernelParams& params,
                                        double signal_prior_median, const FitOptions& options);

}  // namespace nei
