#include "noisyei/optimize.hpp"

#include <cmath>
#include <limits>

#include "noisyei/errors.hpp"

namespace nei {
namespace {

// A coordinate is blocked when it sits on a bound and the descent direction
// -grad points outside the box.
bool blocked(double x, double g, double lo, double hi) {
  return (x <= lo && g > 0.0) || (x >= hi && g < 0.0);
}

Vector project(Vector x, const Vector& lower, const Vector& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

}  // namespace

double projected_gradient_norm(const Vector& x, const Vector& grad, const Vector& lower,
                               const Vector& upper) {
  double norm = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!blocked(x(i), grad(i), lower(i), upper(i))) norm = std::max(norm, std::abs(grad(i)));
  }
  return norm;
}

BoxMinimizeResult minimize_box(const ObjectiveWithGradient& objective, const Vector& start,
                               const Vector& lower, const Vector& upper,
                               const BoxMinimizeOptions& options) {
  const Eigen::Index n = start.size();
  if (lower.size() != n || upper.size() != n) {
    throw InvalidArgument("minimize_box: bounds do not match the start point");
  }
  BoxMinimizeResult out;
  out.x = project(start, lower, upper);
  out.gradient = Vector::Zero(n);
  out.value = objective(out.x, out.gradient);
  out.evaluations = 1;
  if (!std::isfinite(out.value)) return out;

  Matrix h = Matrix::Identity(n, n);
  bool h_is_identity = true;
  Vector grad_new(n);

  for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
    if (projected_gradient_norm(out.x, out.gradient, lower, upper) <= options.gradient_tolerance) {
      out.converged = true;
      break;
    }

    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!blocked(out.x(i), out.gradient(i), lower(i), upper(i))) free.push_back(i);
    }

    Vector direction = Vector::Zero(n);
    for (Eigen::Index a : free) {
      double s = 0.0;
      for (Eigen::Index b : free) s -= h(a, b) * out.gradient(b);
      direction(a) = s;
    }
    if (direction.dot(out.gradient) >= 0.0) {
      h.setIdentity();
      h_is_identity = true;
      direction.setZero();
      for (Eigen::Index a : free) direction(a) = -out.gradient(a);
    }
    double step = 1.0;
    if (h_is_identity) {
      const double len = direction.cwiseAbs().maxCoeff();
      if (len > 0.0) step = options.initial_step / len;
    }

    bool accepted = false;
    Vector x_new;
    double f_new = 0.0;
    for (int tries = 0; tries < 40; ++tries) {
      x_new = project(out.x + step * direction, lower, upper);
      f_new = objective(x_new, grad_new);
      ++out.evaluations;
      const double decrease = out.gradient.dot(x_new - out.x);
      if (std::isfinite(f_new) && f_new <= out.value + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (h_is_identity) break;
      h.setIdentity();
      h_is_identity = true;
      continue;
    }

    const Vector s = x_new - out.x;
    const Vector y = grad_new - out.gradient;
    const double progress = s.cwiseAbs().maxCoeff();
    const double previous = out.value;
    out.x = x_new;
    out.value = f_new;
    out.gradient = grad_new;
    if (progress <= 1e-15 ||
        std::abs(previous - f_new) <= 1e-15 * std::max(1.0, std::abs(previous))) {
      out.converged =
          projected_gradient_norm(out.x, out.gradient, lower, upper) <= options.gradient_tolerance;
      ++out.iterations;
      break;
    }

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (h_is_identity) h *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Vector hy = h * y;
      h += ((1.0 + rho * y.dot(hy)) * rho) * (s * s.transpose()) -
           rho * (hy * s.transpose() + s * hy.transpose());
      h_is_identity = false;
    }
  }
  return out;
}

}  // namespace nei
