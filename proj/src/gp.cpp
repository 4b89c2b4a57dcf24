#include "noisyei/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "noisyei/errors.hpp"
#include "noisyei/optimize.hpp"
#include "noisyei/qmc.hpp"

namespace nei {
namespace {

constexpr double kSqrt5 = 2.23606797749978969641;
// Predicted variances below this fraction of the signal variance are zero.
constexpr double kVarianceFloor = 1e-12;

// Matérn 5/2 correlation as a function of the scaled distance r.
double matern_corr(double r) {
  const double s = kSqrt5 * r;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

// -(1/r) d corr / dr, finite at r = 0.
double matern_radial(double r) {
  const double s = kSqrt5 * r;
  return (5.0 / 3.0) * (1.0 + s) * std::exp(-s);
}

double scaled_sq_dist(const double* a, Eigen::Index stride_a, const double* b, Eigen::Index stride_b,
                      const Vector& lengthscales) {
  double r2 = 0.0;
  for (Eigen::Index k = 0; k < lengthscales.size(); ++k) {
    const double t = (a[k * stride_a] - b[k * stride_b]) / lengthscales(k);
    r2 += t * t;
  }
  return r2;
}

}  // namespace

void KernelParams::validate(Eigen::Index dim) const {
  if (lengthscales.size() != dim) {
    std::ostringstream msg;
    msg << "kernel has " << lengthscales.size() << " lengthscales for " << dim << " inputs";
    throw InvalidArgument(msg.str());
  }
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!(lengthscales(i) > 0.0) || !std::isfinite(lengthscales(i))) {
      throw InvalidArgument("kernel lengthscales must be positive and finite");
    }
  }
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw InvalidArgument("kernel signal variance must be positive and finite");
  }
  if (!std::isfinite(mean_constant)) throw InvalidArgument("kernel mean constant must be finite");
}

void NoisyDataset::validate() const {
  if (means.size() != points.rows() || noise_sds.size() != points.rows()) {
    throw InvalidArgument("dataset points, means and noise sds must have equal length");
  }
  if (!points.allFinite() || !means.allFinite() || !noise_sds.allFinite()) {
    throw InvalidArgument("dataset contains non-finite values");
  }
  if ((noise_sds.array() < 0.0).any()) throw InvalidArgument("noise sds must be non-negative");
}

Bounds Bounds::unit_cube(Eigen::Index dim) {
  return Bounds{Vector::Zero(dim), Vector::Ones(dim)};
}

void Bounds::validate() const {
  if (lower.size() != upper.size()) throw InvalidArgument("bounds have mismatched dimensions");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)) || !(lower(i) < upper(i))) {
      throw InvalidArgument("bounds must be finite with lower < upper");
    }
  }
}

double matern52(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x2,
                const KernelParams& params) {
  if (x.size() != params.lengthscales.size() || x2.size() != params.lengthscales.size()) {
    throw InvalidArgument("matern52: point dimension does not match the kernel");
  }
  const double r2 = scaled_sq_dist(x.data(), 1, x2.data(), 1, params.lengthscales);
  return params.signal_variance * matern_corr(std::sqrt(r2));
}

Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelParams& params) {
  if (a.cols() != params.lengthscales.size() || b.cols() != params.lengthscales.size()) {
    throw InvalidArgument("kernel_matrix: point dimension does not match the kernel");
  }
  Matrix k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double r2 = scaled_sq_dist(&a(i, 0), a.rows(), &b(j, 0), b.rows(), params.lengthscales);
      k(i, j) = params.signal_variance * matern_corr(std::sqrt(r2));
    }
  }
  return k;
}

GPModel::GPModel(KernelParams params, NoisyDataset data)
    : params_(std::move(params)), data_(std::move(data)) {
  data_.validate();
  if (data_.size() == 0) throw InsufficientData("GPModel: no observations");
  params_.validate(data_.dim());
  Matrix gram = kernel_matrix(data_.points, data_.points, params_);
  gram.diagonal() += data_.noise_sds.array().square().matrix();
  auto chol = jittered_cholesky(gram, params_.signal_variance);
  factor_ = std::move(chol.lower);
  jitter_ = chol.jitter;
  alpha_ = solve((data_.means.array() - params_.mean_constant).matrix());
}

Matrix GPModel::solve(const Matrix& rhs) const {
  Matrix out = rhs;
  solve_lower_in_place(factor_, out);
  solve_upper_transposed_in_place(factor_, out);
  return out;
}

double GPModel::floor_variance(double raw) const {
  const double v = raw - jitter_;
  return v <= kVarianceFloor * params_.signal_variance ? 0.0 : v;
}

Vector GPModel::cross_kernel(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dim()) throw InvalidArgument("query dimension does not match the model");
  const Eigen::Index n = data_.size();
  Vector k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r2 =
        scaled_sq_dist(x.data(), 1, &data_.points(i, 0), n, params_.lengthscales);
    k(i) = params_.signal_variance * matern_corr(std::sqrt(r2));
  }
  return k;
}

Matrix GPModel::cross_kernel_jacobian(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dim()) throw InvalidArgument("query dimension does not match the model");
  const Eigen::Index n = data_.size();
  const Eigen::Index d = dim();
  Matrix jac(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r2 =
        scaled_sq_dist(x.data(), 1, &data_.points(i, 0), n, params_.lengthscales);
    const double radial = params_.signal_variance * matern_radial(std::sqrt(r2));
    for (Eigen::Index k = 0; k < d; ++k) {
      const double l = params_.lengthscales(k);
      jac(i, k) = -radial * (x(k) - data_.points(i, k)) / (l * l);
    }
  }
  return jac;
}

double GPModel::variance_from_cross(const Eigen::Ref<const Vector>& k, Vector* w) const {
  Vector v = k;
  factor_.triangularView<Eigen::Lower>().solveInPlace(v);
  const double raw = params_.signal_variance - v.squaredNorm();
  if (w) {
    factor_.transpose().triangularView<Eigen::Upper>().solveInPlace(v);
    *w = std::move(v);
  }
  return floor_variance(raw);
}

MarginalPrediction GPModel::predict(const Eigen::Ref<const Vector>& x) const {
  const Vector k = cross_kernel(x);
  return {params_.mean_constant + k.dot(alpha_), variance_from_cross(k)};
}

MarginalGradient GPModel::predict_with_gradient(const Eigen::Ref<const Vector>& x) const {
  const Vector k = cross_kernel(x);
  const Matrix jac = cross_kernel_jacobian(x);
  MarginalGradient out;
  Vector w;
  out.mean = params_.mean_constant + k.dot(alpha_);
  out.variance = variance_from_cross(k, &w);
  out.mean_grad = jac.transpose() * alpha_;
  if (out.variance > 0.0) {
    out.variance_grad = -2.0 * (jac.transpose() * w);
  } else {
    out.variance_grad = Vector::Zero(dim());
  }
  return out;
}

MVNPosterior GPModel::posterior(const Matrix& queries) const {
  if (queries.rows() == 0) throw InvalidArgument("posterior: empty query set");
  if (queries.cols() != dim()) throw InvalidArgument("posterior: query dimension mismatch");
  const Matrix kxq = kernel_matrix(data_.points, queries, params_);
  Matrix v = kxq;
  solve_lower_in_place(factor_, v);
  MVNPosterior out;
  out.mean = (kxq.transpose() * alpha_).array() + params_.mean_constant;
  out.cov = kernel_matrix(queries, queries, params_) - v.transpose() * v;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  for (Eigen::Index i = 0; i < out.cov.rows(); ++i) out.cov(i, i) = floor_variance(out.cov(i, i));
  return out;
}

MVNPosterior GPModel::posterior_with_training(const Matrix& extra) const {
  const Eigen::Index n = data_.size();
  const Eigen::Index m = extra.rows();
  if (m > 0 && extra.cols() != dim()) throw InvalidArgument("posterior: query dimension mismatch");
  const Vector noise_var = data_.noise_sds.array().square();

  // B = L^-1 D; training block D - B^T B.
  Matrix b = Matrix(noise_var.asDiagonal());
  solve_lower_in_place(factor_, b);
  MVNPosterior out;
  out.mean.resize(n + m);
  out.cov.resize(n + m, n + m);
  out.mean.head(n) = data_.means - noise_var.cwiseProduct(alpha_);
  out.cov.topLeftCorner(n, n) = Matrix(noise_var.asDiagonal()) - b.transpose() * b;
  if (m > 0) {
    const Matrix kxe = kernel_matrix(data_.points, extra, params_);
    Matrix v = kxe;
    solve_lower_in_place(factor_, v);
    out.mean.tail(m) = (kxe.transpose() * alpha_).array() + params_.mean_constant;
    out.cov.topRightCorner(n, m) = b.transpose() * v;
    out.cov.bottomLeftCorner(m, n) = out.cov.topRightCorner(n, m).transpose();
    out.cov.bottomRightCorner(m, m) = kernel_matrix(extra, extra, params_) - v.transpose() * v;
  }
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

GPModel condition_noiseless(const KernelParams& params, Matrix points, Vector values) {
  if (values.size() != points.rows()) {
    throw InvalidArgument("condition_noiseless: values and points differ in length");
  }
  const Eigen::Index n = points.rows();
  return GPModel(params, NoisyDataset{std::move(points), std::move(values), Vector::Zero(n)});
}

LogMarginalLikelihood log_marginal_likelihood(const NoisyDataset& data, const KernelParams& params) {
  data.validate();
  params.validate(data.dim());
  const Eigen::Index n = data.size();
  const Eigen::Index d = data.dim();
  const Matrix kf = kernel_matrix(data.points, data.points, params);
  Matrix gram = kf;
  gram.diagonal() += data.noise_sds.array().square().matrix();
  const auto chol = jittered_cholesky(gram, params.signal_variance);

  Matrix inv = Matrix::Identity(n, n);
  solve_lower_in_place(chol.lower, inv);
  solve_upper_transposed_in_place(chol.lower, inv);
  const Vector centered = (data.means.array() - params.mean_constant).matrix();
  const Vector alpha = inv * centered;

  LogMarginalLikelihood out;
  out.value = -0.5 * centered.dot(alpha) - chol.lower.diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  const Matrix a = alpha * alpha.transpose() - inv;
  out.gradient = Vector::Zero(d + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out.gradient(d) += 0.5 * a(i, j) * kf(i, j);
      if (i == j) continue;
      const double r2 =
          scaled_sq_dist(&data.points(i, 0), n, &data.points(j, 0), n, params.lengthscales);
      const double radial = params.signal_variance * matern_radial(std::sqrt(r2));
      for (Eigen::Index k = 0; k < d; ++k) {
        const double l = params.lengthscales(k);
        const double diff = data.points(i, k) - data.points(j, k);
        out.gradient(k) += 0.5 * a(i, j) * radial * diff * diff / (l * l);
      }
    }
  }
  return out;
}

LogMarginalLikelihood log_map_objective(const NoisyDataset& standardized, const KernelParams& params,
                                        double signal_prior_median, const FitOptions& options) {
  auto out = log_marginal_likelihood(standardized, params);
  const double s2 = options.log_sd * options.log_sd;
  const Eigen::Index d = params.lengthscales.size();
  const double l0 = std::log(options.lengthscale_prior_median);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double z = std::log(params.lengthscales(k)) - l0;
    out.value -= 0.5 * z * z / s2;
    out.gradient(k) -= z / s2;
  }
  const double z = std::log(params.signal_variance) - std::log(signal_prior_median);
  out.value -= 0.5 * z * z / s2;
  out.gradient(d) -= z / s2;
  return out;
}

KernelParams fit_map(const NoisyDataset& data, const Bounds& bounds, const FitOptions& options) {
  data.validate();
  if (data.size() < 2) throw InsufficientData("fit_map: at least 2 observations are required");
  bounds.validate();
  if (bounds.dim() != data.dim()) throw InvalidArgument("fit_map: bounds do not match the data");
  if (options.starts < 1) throw InvalidArgument("fit_map: at least one start is required");

  const Eigen::Index n = data.size();
  const Eigen::Index d = data.dim();
  const Vector range = bounds.upper - bounds.lower;

  NoisyDataset norm;
  norm.points.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    norm.points.row(i) = (data.points.row(i) - bounds.lower.transpose()).cwiseQuotient(range.transpose());
  }
  const double y_mean = data.means.mean();
  double y_scale = std::sqrt((data.means.array() - y_mean).square().sum() / static_cast<double>(n - 1));
  double signal_median = 1.0;
  if (!(y_scale > 1e-12 * std::max(1.0, std::abs(y_mean)))) y_scale = 1.0;
  norm.means = (data.means.array() - y_mean) / y_scale;
  norm.noise_sds = data.noise_sds / y_scale;

  Vector lower(d + 1), upper(d + 1), center(d + 1);
  lower.head(d).setConstant(std::log(options.min_lengthscale));
  upper.head(d).setConstant(std::log(options.max_lengthscale));
  center.head(d).setConstant(std::log(options.lengthscale_prior_median));
  lower(d) = std::log(options.min_signal_variance);
  upper(d) = std::log(options.max_signal_variance);
  center(d) = std::log(signal_median);

  auto unpack = [d](const Vector& theta) {
    KernelParams p;
    p.lengthscales = theta.head(d).array().exp();
    p.signal_variance = std::exp(theta(d));
    p.mean_constant = 0.0;
    return p;
  };
  const ObjectiveWithGradient objective = [&](const Vector& theta, Vector& grad) {
    try {
      const auto res = log_map_objective(norm, unpack(theta), signal_median, options);
      grad = -res.gradient;
      return -res.value;
    } catch (const ConditioningError&) {
      grad = Vector::Zero(theta.size());
      return std::numeric_limits<double>::infinity();
    }
  };

  SobolGenerator starts(static_cast<std::size_t>(d + 1), mix_seed(options.seed, 0x6770u));
  const Matrix offsets = starts.draw(static_cast<std::size_t>(options.starts));
  BoxMinimizeOptions opt;
  opt.max_iterations = options.max_iterations;
  opt.gradient_tolerance = 1e-6;
  opt.initial_step = 0.5;

  Vector best_theta = center.cwiseMax(lower).cwiseMin(upper);
  double best_value = std::numeric_limits<double>::infinity();
  for (int s = 0; s < options.starts; ++s) {
    Vector start = center;
    if (s > 0) {
      // spread the remaining starts over +-2 prior sds
      for (Eigen::Index k = 0; k <= d; ++k) start(k) += 4.0 * options.log_sd * (offsets(s, k) - 0.5);
    }
    const auto res = minimize_box(objective, start, lower, upper, opt);
    if (std::isfinite(res.value) && res.value < best_value) {
      best_value = res.value;
      best_theta = res.x;
    }
  }
  if (!std::isfinite(best_value)) {
    throw ConditioningError("fit_map: no start produced a finite log posterior");
  }

  KernelParams out = unpack(best_theta);
  out.lengthscales = out.lengthscales.cwiseProduct(range);
  out.signal_variance *= y_scale * y_scale;
  out.mean_constant = y_mean;
  return out;
}

}  // namespace nei
