#pragma once

#include <functional>

#include "noisyei/linalg.hpp"

namespace nei {

/// f(x) returning the value and writing the gradient into `grad`.
using ObjectiveWithGradient = std::function<double(const Vector& x, Vector& grad)>;

struct BoxMinimizeOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;  // on the projected gradient, infinity norm
  double initial_step = 0.1;         // max-norm length of the first trial step
};

struct BoxMinimizeResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Bound-constrained quasi-Newton minimization.
///
/// BFGS on the variables that are not held at a bound, with a projected
/// backtracking (Armijo) line search. Stops when the projected gradient
/// falls below the tolerance, after `max_iterations`, or when the line
/// search can no longer make progress.
BoxMinimizeResult minimize_box(const ObjectiveWithGradient& objective, const Vector& start,
                               const Vector& lower, const Vector& upper,
                               const BoxMinimizeOptions& options = {});

/// Infinity norm of the gradient after zeroing components that point out of
/// the box at active bounds.
double projected_gradient_norm(const Vector& x, const Vector& grad, const Vector& lower,
                               const Vector& upper);

}  // namespace nei
