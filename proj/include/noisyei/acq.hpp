#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "noisyei/gp.hpp"
#include "noisyei/qmc.hpp"

namespace nei {

// ---------------------------------------------------------------------------
// Closed-form pieces
// ---------------------------------------------------------------------------

/// Expected improvement of y ~ N(mu, sigma^2) below `best`.
double ei_analytic(double mu, double sigma, double best);

/// P(c <= 0) for c ~ N(mu_c, sigma_c^2).
double prob_feasible(double mu_c, double sigma_c);

struct ConstraintMoment {
  double mean = 0.0;
  double sd = 1.0;
};

/// Marginal posterior summaries at a candidate x that EI with infeasibility
/// consumes. `incumbent` is the best feasible value, absent when no
/// observation is feasible; `penalty_m` is the value assigned to having no
/// feasible point.
struct EIxInputs {
  double mu_f = 0.0;
  double sigma_f = 0.0;
  std::vector<ConstraintMoment> constraints;
  std::optional<double> incumbent;
  double penalty_m = 0.0;

  void validate() const;
};

/// Constraint sds below this value are clamped to it.
inline constexpr double kMinConstraintSd = 1e-12;

/// EI with infeasibility: EI(mu_f, sigma_f, incumbent) * prod_j P(c_j <= 0),
/// or (M - mu_f) * prod_j P(c_j <= 0) when there is no incumbent.
double eix(const EIxInputs& inputs);

/// Gradients of the marginal moments with respect to x.
struct MomentGradients {
  Vector mu_f;
  Vector sigma_f;
  std::vector<Vector> mu_c;
  std::vector<Vector> sigma_c;
};

Vector eix_gradient(const EIxInputs& inputs, const MomentGradients& grads);

// ---------------------------------------------------------------------------
// Fantasies
// ---------------------------------------------------------------------------

/// One noisy GP per metric, all fitted on the same points.
struct MetricModels {
  GPModel objective;
  std::vector<GPModel> constraints;

  std::size_t num_constraints() const { return constraints.size(); }
  /// Throws InvalidArgument unless all models share the training points.
  void validate() const;
};

enum class FantasyMode {
  /// Joint draws of the latent values at observed and pending points; each
  /// draw conditions a noiseless model (noisy expected improvement).
  noisy_ei,
  /// Models keep their noise and the observed data; pending outcomes are
  /// drawn with observation noise and incumbents are the best posterior
  /// means among points feasible in expectation (EI+heuristics).
  plug_in,
};

enum class SamplingMethod { qmc, mc };

/// N fantasy models of one metric sharing a single factorization.
///
/// Fantasy k is the GP with kernel `base.params()` conditioned on column k of
/// `values`; `weights` holds the corresponding (K + D)^-1 (values - mean).
struct FantasyMetric {
  GPModel base;
  Matrix values;   // n x N
  Matrix weights;  // n x N
  Matrix fitted;   // n x N, model means at the conditioning points
};

struct FantasySet {
  FantasyMode mode = FantasyMode::noisy_ei;
  Matrix points;  // conditioning points: observed then pending
  Eigen::Index num_observed = 0;
  std::vector<FantasyMetric> metrics;  // objective first, then constraints
  std::vector<std::optional<double>> incumbents;
  double penalty_m = 0.0;

  std::size_t sample_count() const { return incumbents.size(); }
  std::size_t num_constraints() const { return metrics.empty() ? 0 : metrics.size() - 1; }
  Eigen::Index dim() const { return points.cols(); }

  /// Materialized model of fantasy k for metric `metric` (0 = objective).
  GPModel model(std::size_t metric, std::size_t k) const;
};

/// Point-source dimension that prepare_fantasies needs.
std::size_t fantasy_dimension(const MetricModels& models, Eigen::Index num_pending);

/// Builds the fantasy set: joint posteriors of every metric at observed and
/// pending points, block-diagonal factor, N transformed draws from `source`,
/// one conditioned model per draw and the per-fantasy incumbents.
FantasySet prepare_fantasies(const MetricModels& models, const Matrix& pending, std::size_t count,
                             PointSource& source, double penalty_m,
                             FantasyMode mode = FantasyMode::noisy_ei);

/// Penalty for having no feasible point: max of mu_f + sigma_multiplier * sigma_f
/// over a scrambled Sobol scan of `bounds`.
double penalty_from_scan(const GPModel& objective, const Bounds& bounds, std::size_t scan_points,
                         double sigma_multiplier, std::uint64_t seed);

/// Sample average of EIx over the fantasies at x.
double nei(const Eigen::Ref<const Vector>& x, const FantasySet& fantasies);

/// Value and gradient of `nei`.
double nei_with_gradient(const Eigen::Ref<const Vector>& x, const FantasySet& fantasies,
                         Vector& gradient);

Vector nei_gradient(const Eigen::Ref<const Vector>& x, const FantasySet& fantasies);

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

/// Optional post-processing of a candidate, e.g. rounding integer inputs.
using CandidateProjection = std::function<void(Eigen::Ref<Vector>)>;

struct AcqOptimizerOptions {
  Bounds bounds;
  std::size_t restarts = 20;
  std::size_t scan_points = 1000;
  std::uint64_t seed = 0;
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  /// Candidates closer than this (Euclidean, in the model's coordinates) to
  /// any row of `avoid` are rejected in favour of the next best optimum.
  double min_distance = 1e-6;
  Matrix avoid;
  CandidateProjection project;
};

struct AcquisitionOptimum {
  Vector x;
  double value = 0.0;
};

/// Multi-start maximization: a Sobol scan, then bounded quasi-Newton runs
/// from `restarts` Sobol start points plus the best scan point.
AcquisitionOptimum optimize_acquisition(const FantasySet& fantasies,
                                        const AcqOptimizerOptions& options);

/// Same driver for an arbitrary acquisition with gradient.
using AcquisitionFn = std::function<double(const Vector& x, Vector* gradient)>;
AcquisitionOptimum optimize_acquisition(const AcquisitionFn& acquisition,
                                        const AcqOptimizerOptions& options);

struct BatchOptions {
  Bounds bounds;
  std::size_t q = 1;
  std::size_t restarts = 20;
  std::size_t samples = 32;
  std::size_t scan_points = 1000;
  double penalty_sigma = 2.0;
  std::uint64_t seed = 0;
  FantasyMode mode = FantasyMode::noisy_ei;
  SamplingMethod sampling = SamplingMethod::qmc;
  int max_iterations = 200;
  double min_distance = 1e-6;
  CandidateProjection project;
};

/// Seeds used for position i of a batch.
std::uint64_t batch_fantasy_seed(std::uint64_t seed, std::size_t position);
std::uint64_t batch_optimizer_seed(std::uint64_t seed, std::size_t position);
std::uint64_t batch_penalty_seed(std::uint64_t seed);

/// Greedy batch: each position prepares fantasies over observed, pending and
/// already selected points, maximizes the sample-average acquisition and
/// appends the maximizer. Returns q x d.
Matrix generate_batch(const MetricModels& models, const Matrix& pending, const BatchOptions& options);

/// generate_batch with plug-in incumbents (EI+heuristics baseline).
Matrix heuristic_ei_batch(const MetricModels& models, const Matrix& pending, BatchOptions options);

}  // namespace nei
