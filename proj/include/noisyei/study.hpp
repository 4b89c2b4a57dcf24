#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "noisyei/acq.hpp"
#include "noisyei/gp.hpp"

namespace nei {

struct Dimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  bool integer = false;
};

/// Box-shaped design space in native units.
struct SearchSpace {
  std::vector<Dimension> dims;

  std::size_t dim() const { return dims.size(); }
  /// Throws InvalidArgument for empty spaces, lower >= upper, non-finite
  /// bounds, duplicate names or integer dims without an integer inside.
  void validate() const;
  Bounds bounds() const;

  Vector to_unit(const Eigen::Ref<const Vector>& x) const;
  Vector from_unit(const Eigen::Ref<const Vector>& u) const;
  /// Rounds integer dims to the nearest admissible integer and clips to the box.
  void round(Eigen::Ref<Vector> x) const;
  bool contains(const Eigen::Ref<const Vector>& x) const;
  bool has_integer_dims() const;
};

/// A sample mean together with its standard error.
struct Measurement {
  double mean = 0.0;
  double sd = 0.0;
};

enum class TrialStatus { pending, completed };

struct TrialRecord {
  Vector x;  // native units
  std::optional<Measurement> objective;
  std::vector<Measurement> constraints;
  TrialStatus status = TrialStatus::pending;
  std::string tag;
};

struct StudyConfig {
  std::size_t qmc_samples = 32;
  std::size_t restarts = 20;
  std::uint64_t seed = 0;
  std::size_t scan_points = 1000;
  double penalty_sigma = 2.0;
  /// Quasirandom points before the first model-based batch; 0 picks
  /// min(2 d + 2, 30).
  std::size_t init_size = 0;
  /// Objective is maximized; means are negated whenever a model is built.
  bool maximize = false;
};

inline constexpr int kSchemaVersion = 1;

struct StudyState {
  SearchSpace space;
  std::size_t num_constraints = 0;
  std::vector<TrialRecord> trials;
  StudyConfig config;
  int schema_version = kSchemaVersion;

  std::size_t count(TrialStatus status) const;
  std::size_t initialization_size() const;
};

bool operator==(const Dimension& a, const Dimension& b);
bool operator==(const Measurement& a, const Measurement& b);
bool operator==(const TrialRecord& a, const TrialRecord& b);
bool operator==(const StudyConfig& a, const StudyConfig& b);
bool operator==(const StudyState& a, const StudyState& b);

StudyState create_study(SearchSpace space, std::size_t num_constraints, StudyConfig config = {});

/// Incorporates trials. A completed trial whose x matches a pending entry
/// (same point, and the same tag when both carry one) completes that entry;
/// an exact repeat of a recorded trial is a no-op; anything else is appended.
StudyState tell(StudyState state, const std::vector<TrialRecord>& trials);

struct Suggestion {
  StudyState state;
  std::vector<Vector> candidates;  // native units, also recorded as pending
};

Suggestion suggest(StudyState state, std::size_t q);

/// Models of every metric in unit-cube coordinates, fitted to the completed
/// trials (objective negated for maximization studies).
MetricModels fit_models(const StudyState& state);

// Identification of the best evaluated point.

/// Posterior summary of one completed trial, minimization convention.
struct TrialSummary {
  std::size_t trial = 0;  // index into StudyState::trials
  double mu_f = 0.0;
  double sigma_f = 0.0;
  std::vector<ConstraintMoment> constraints;
};

struct IdentifiedTrial {
  std::size_t trial = 0;
  double score = 0.0;
  double feasibility = 1.0;  // prod_j P(c_j <= 0)
  double mu_f = 0.0;
};

/// prod_j Phi(-mu_j / sd_j), sds clamped below at kMinConstraintSd.
double feasibility_product(const std::vector<ConstraintMoment>& constraints);

/// argmax of (B - mu_f) * feasibility; ties go to the higher feasibility,
/// then to the earliest entry.
IdentifiedTrial identify_expected_reduction(const std::vector<TrialSummary>& summaries, double baseline);

/// Largest mu_f over the summaries, the default baseline B.
double default_baseline(const std::vector<TrialSummary>& summaries);

/// Smallest mu_f among entries whose every constraint holds with probability
/// at least 1 - delta; the score is mu_f.
std::optional<IdentifiedTrial> identify_confident_feasible(const std::vector<TrialSummary>& summaries,
                                                           double delta);

/// Model posteriors at completed trials; with fewer than two completed
/// trials the observed means and sds are used directly.
std::vector<TrialSummary> summarize_completed(const StudyState& state);
/// Same, with models already fitted by fit_models(state).
std::vector<TrialSummary> summarize_completed(const StudyState& state, const MetricModels& models);

/// Expected reduction rule on a study. `baseline` defaults to the
/// largest posterior mean over completed trials.
IdentifiedTrial identify_best_expected_reduction(const StudyState& state,
                                                 std::optional<double> baseline = std::nullopt);
std::optional<IdentifiedTrial> identify_best_confident_feasible(const StudyState& state,
                                                                double delta = 0.05);

// Persistence.

std::string to_json(const StudyState& state);
/// Parses a study document; unknown fields are reported through `warnings`.
StudyState from_json(const std::string& text, std::vector<std::string>* warnings = nullptr);

/// Writes the document next to `path` and returns the temporary file.
std::filesystem::path write_temp(const StudyState& state, const std::filesystem::path& path);
/// Atomic save: write_temp followed by a rename over `path`.
void save(const StudyState& state, const std::filesystem::path& path);
StudyState load(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

}  // namespace nei
