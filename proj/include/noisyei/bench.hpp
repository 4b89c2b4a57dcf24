#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "noisyei/acq.hpp"
#include "noisyei/problems.hpp"

namespace nei {

// Integration study: MC vs QMC estimates of NEI on a fixed noisy dataset.

/// Fixed dataset of the integration study: `num_observed` noisy
/// evaluations at scrambled Sobol points, the next `num_pending` Sobol
/// points as pending, models fitted in the unit cube and the query at the
/// centroid.
struct QmcSetup {
  const Problem* problem = nullptr;
  MetricModels models;
  Matrix pending;  // unit cube
  Vector query;    // unit cube
  double penalty_m = 0.0;
};

QmcSetup make_qmc_setup(const Problem& problem, std::uint64_t seed, std::size_t num_observed = 5,
                        std::size_t num_pending = 5);

FantasySet qmc_setup_fantasies(const QmcSetup& setup, SamplingMethod method, std::size_t samples,
                               std::uint64_t source_seed);

/// NEI at the setup's query from `samples` MC or QMC draws.
double estimate_nei(const QmcSetup& setup, SamplingMethod method, std::size_t samples,
                    std::uint64_t source_seed);

struct QmcStudyOptions {
  std::string problem = "gramacy";
  std::vector<std::size_t> sample_sizes{4, 8, 16, 32, 50, 64, 128};
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  std::size_t ground_truth_samples = 10000;
  std::size_t ground_truth_restarts = 100;
  std::size_t restarts = 20;
  std::size_t scan_points = 1000;
  bool optimize = true;  // also record optimizer distances
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct QmcRecord {
  std::string problem;
  SamplingMethod method = SamplingMethod::qmc;
  std::size_t samples = 0;
  std::size_t replicate = 0;
  double relative_error = 0.0;      // |estimate - truth| / |truth|
  double optimizer_distance = 0.0;  // fraction of the box diagonal; NaN if not optimized
};

struct QmcStudyResult {
  std::vector<QmcRecord> records;  // ordered by method, samples, replicate
  double ground_truth = 0.0;
  Vector ground_truth_optimizer;  // native units
};

QmcStudyResult run_qmc_study(const QmcStudyOptions& options);

// Closed-loop optimization benchmark.

struct OptBenchmarkOptions {
  std::vector<std::string> problems{"gramacy", "hartmann6"};
  std::vector<FantasyMode> methods{FantasyMode::noisy_ei, FantasyMode::plug_in};
  std::size_t init_points = 5;
  std::size_t batches = 9;
  std::size_t batch_size = 5;
  std::size_t replicates = 20;
  std::uint64_t seed = 0;
  std::size_t samples = 32;
  std::size_t restarts = 20;
  std::size_t scan_points = 1000;
  double noise_scale = 1.0;
  double delta = 0.05;
  unsigned threads = 0;
};

struct OptTraceRecord {
  std::string problem;
  FantasyMode method = FantasyMode::noisy_ei;
  std::size_t replicate = 0;
  std::size_t iteration = 0;  // evaluations so far
  std::optional<double> best_feasible_true_value;
  double identified_best_value = 0.0;  // true objective of the expected-reduction pick
  bool identified_feasible = false;
  std::optional<double> confident_best_value;  // 1 - delta rule, absent if none qualifies
  std::optional<bool> confident_feasible;
};

struct OptRunTrace {
  std::vector<OptTraceRecord> records;  // ordered by problem, method, replicate, iteration
};

OptRunTrace run_opt_benchmark(const OptBenchmarkOptions& options);

// Reporting.

std::string method_name(SamplingMethod method);
std::string method_name(FantasyMode method);

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
  std::size_t count = 0;
};

/// Mean and standard error of the mean (sample sd / sqrt(n)).
MeanSem mean_sem(const std::vector<double>& values);

struct QmcSummaryRow {
  SamplingMethod method;
  std::size_t samples;
  MeanSem error;
  MeanSem distance;
};
std::vector<QmcSummaryRow> summarize(const QmcStudyResult& result);

struct OptSummaryRow {
  std::string problem;
  FantasyMode method;
  std::size_t iteration;
  MeanSem best_feasible;  // over replicates with a feasible point
  MeanSem identified_value;
  MeanSem identified_feasible;  // proportion
};
/// One row per (problem, method) at the final iteration.
std::vector<OptSummaryRow> summarize_final(const OptRunTrace& trace);

std::string to_csv(const QmcStudyResult& result);
std::string to_csv(const OptRunTrace& trace);
void emit_csv(const QmcStudyResult& result, const std::filesystem::path& path);
void emit_csv(const OptRunTrace& trace, const std::filesystem::path& path);

}  // namespace nei
