#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "noisyei/study.hpp"

namespace nei {

struct ProblemEvaluation {
  double objective = 0.0;
  Vector constraints;  // feasible when every entry is <= 0
};

struct ReferenceOptimum {
  Vector x;
  double f = 0.0;
  std::string provenance;
};

/// Synthetic constrained benchmark, evaluated in native coordinates.
struct Problem {
  std::string name;
  SearchSpace space;
  std::size_t num_constraints = 0;
  double objective_noise_sd = 0.0;
  std::vector<double> constraint_noise_sds;
  ReferenceOptimum optimum;
  std::function<ProblemEvaluation(const Vector&)> function;

  std::size_t dim() const { return space.dim(); }
};

/// Registry lookup: "gramacy", "hartmann6", "branin" or "gardner". Unknown
/// names raise InvalidArgument listing the registry.
const Problem& get_problem(const std::string& name);
const std::vector<std::string>& problem_names();

/// Copy of `problem` with every noise sd multiplied by `factor`.
Problem scale_noise(const Problem& problem, double factor);

/// Noiseless values; throws InvalidArgument outside the bounds.
ProblemEvaluation evaluate_true(const Problem& problem, const Eigen::Ref<const Vector>& x);

/// Completed trial holding true values plus Gaussian noise, with the noise
/// sds recorded as the standard errors.
TrialRecord evaluate_noisy(const Problem& problem, const Eigen::Ref<const Vector>& x, std::mt19937_64& rng);

const ReferenceOptimum& reference_optimum(const Problem& problem);

bool is_feasible(const ProblemEvaluation& e, double tolerance = 0.0);

}  // namespace nei
