#include "noisyei/bench.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "noisyei/errors.hpp"

namespace nei {
namespace {

// Runs fn(0..count-1) on a small pool. Results must be written by index so
// the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double box_distance(const SearchSpace& space, const Vector& a_unit, const Vector& b_unit) {
  const Bounds b = space.bounds();
  const Vector range = b.upper - b.lower;
  return (a_unit - b_unit).cwiseProduct(range).norm() / range.norm();
}

std::string format_real(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : ""; }

void write_file(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

QmcSetup make_qmc_setup(const Problem& problem, std::uint64_t seed, std::size_t num_observed,
                        std::size_t num_pending) {
  if (num_observed < 2) throw InvalidArgument("the integration study needs at least two observations");
  const std::size_t d = problem.dim();
  SobolGenerator sobol(d, mix_seed(seed, 0xb5));
  const Matrix unit = sobol.draw(num_observed + num_pending);

  StudyConfig config;
  config.seed = seed;
  StudyState state = create_study(problem.space, problem.num_constraints, config);
  std::mt19937_64 rng(mix_seed(seed, 0x401));
  std::vector<TrialRecord> observed;
  for (std::size_t i = 0; i < num_observed; ++i) {
    Vector x = problem.space.from_unit(unit.row(static_cast<Eigen::Index>(i)).transpose());
    problem.space.round(x);
    observed.push_back(evaluate_noisy(problem, x, rng));
  }
  state = tell(std::move(state), observed);

  QmcSetup setup{&problem, fit_models(state), unit.bottomRows(static_cast<Eigen::Index>(num_pending)),
                 Vector::Constant(static_cast<Eigen::Index>(d), 0.5), 0.0};
  setup.penalty_m = penalty_from_scan(setup.models.objective, Bounds::unit_cube(static_cast<Eigen::Index>(d)),
                                      1000, 2.0, mix_seed(seed, 0x9e));
  return setup;
}

FantasySet qmc_setup_fantasies(const QmcSetup& setup, SamplingMethod method, std::size_t samples,
                               std::uint64_t source_seed) {
  const std::size_t dim = fantasy_dimension(setup.models, setup.pending.rows());
  if (method == SamplingMethod::qmc) {
    SobolGenerator source(dim, source_seed);
    return prepare_fantasies(setup.models, setup.pending, samples, source, setup.penalty_m);
  }
  UniformRandomSource source(dim, source_seed);
  return prepare_fantasies(setup.models, setup.pending, samples, source, setup.penalty_m);
}

double estimate_nei(const QmcSetup& setup, SamplingMethod method, std::size_t samples,
                    std::uint64_t source_seed) {
  return nei(setup.query, qmc_setup_fantasies(setup, method, samples, source_seed));
}

QmcStudyResult run_qmc_study(const QmcStudyOptions& options) {
  if (options.replicates < 1) throw InvalidArgument("replicates must be at least 1");
  if (options.sample_sizes.empty()) throw InvalidArgument("at least one sample size is required");
  for (std::size_t n : options.sample_sizes) {
    if (n < 1) throw InvalidArgument("sample sizes must be at least 1");
  }
  const Problem& problem = get_problem(options.problem);
  const QmcSetup setup = make_qmc_setup(problem, options.seed);
  const auto d = static_cast<Eigen::Index>(problem.dim());
  const FantasySet truth_set =
      qmc_setup_fantasies(setup, SamplingMethod::mc, options.ground_truth_samples, mix_seed(options.seed, 0x67));

  QmcStudyResult result;
  result.ground_truth = nei(setup.query, truth_set);
  Vector truth_opt;
  AcqOptimizerOptions opt;
  opt.bounds = Bounds::unit_cube(d);
  opt.scan_points = options.scan_points;
  if (options.optimize) {
    opt.restarts = options.ground_truth_restarts;
    opt.seed = mix_seed(options.seed, 0x68);
    truth_opt = optimize_acquisition(truth_set, opt).x;
    result.ground_truth_optimizer = problem.space.from_unit(truth_opt);
  }

  const std::array<SamplingMethod, 2> methods{SamplingMethod::mc, SamplingMethod::qmc};
  const std::size_t num_n = options.sample_sizes.size();
  // [replicate][method][n] -> (error, distance)
  std::vector<std::vector<std::pair<double, double>>> cells(options.replicates,
                                                            std::vector<std::pair<double, double>>(2 * num_n));
  parallel_for(options.replicates, options.threads, [&](std::size_t r) {
    const std::uint64_t rep_seed = mix_seed(options.seed, 0x1000 + r);
    AcqOptimizerOptions local = opt;
    local.restarts = options.restarts;
    local.seed = mix_seed(rep_seed, 0x77);
    for (std::size_t m = 0; m < 2; ++m) {
      for (std::size_t k = 0; k < num_n; ++k) {
        const std::size_t n = options.sample_sizes[k];
        const FantasySet fs = qmc_setup_fantasies(setup, methods[m], n, mix_seed(rep_seed, 2 * n + m));
        const double estimate = nei(setup.query, fs);
        const double error = std::abs(estimate - result.ground_truth) / std::abs(result.ground_truth);
        double distance = std::numeric_limits<double>::quiet_NaN();
        if (options.optimize) distance = box_distance(problem.space, optimize_acquisition(fs, local).x, truth_opt);
        cells[r][m * num_n + k] = {error, distance};
      }
    }
  });

  for (std::size_t m = 0; m < 2; ++m) {
    for (std::size_t k = 0; k < num_n; ++k) {
      for (std::size_t r = 0; r < options.replicates; ++r) {
        const auto& [error, distance] = cells[r][m * num_n + k];
        result.records.push_back({problem.name, methods[m], options.sample_sizes[k], r, error, distance});
      }
    }
  }
  return result;
}

namespace {

std::vector<OptTraceRecord> run_one_trace(const Problem& base_problem, FantasyMode method, std::size_t replicate,
                                          const OptBenchmarkOptions& options) {
  const Problem problem = scale_noise(base_problem, options.noise_scale);
  const std::uint64_t rep_seed = mix_seed(mix_seed(options.seed, name_hash(problem.name)), replicate);
  const std::size_t d = problem.dim();
  const auto unit_bounds = Bounds::unit_cube(static_cast<Eigen::Index>(d));

  StudyConfig config;
  config.seed = rep_seed;
  config.qmc_samples = options.samples;
  config.restarts = options.restarts;
  config.scan_points = options.scan_points;
  config.init_size = options.init_points;
  StudyState state = create_study(problem.space, problem.num_constraints, config);

  // Both methods see the same initial batch and the same noise stream.
  std::mt19937_64 rng(mix_seed(rep_seed, 2));
  auto evaluate_rows = [&](const Matrix& unit) {
    std::vector<TrialRecord> trials;
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
      Vector x = problem.space.from_unit(unit.row(i).transpose());
      problem.space.round(x);
      trials.push_back(evaluate_noisy(problem, x, rng));
    }
    state = tell(std::move(state), trials);
  };
  SobolGenerator init(d, mix_seed(rep_seed, 1));
  evaluate_rows(init.draw(options.init_points));

  std::vector<OptTraceRecord> out;
  std::optional<double> best_feasible;
  std::size_t scored = 0;
  auto record = [&](const MetricModels& models) {
    for (; scored < state.trials.size(); ++scored) {
      const auto truth = evaluate_true(problem, state.trials[scored].x);
      if (is_feasible(truth) && (!best_feasible || truth.objective < *best_feasible)) {
        best_feasible = truth.objective;
      }
    }
    const auto summaries = summarize_completed(state, models);
    const auto pick = identify_expected_reduction(summaries, default_baseline(summaries));
    const auto pick_truth = evaluate_true(problem, state.trials[pick.trial].x);
    OptTraceRecord rec;
    rec.problem = problem.name;
    rec.method = method;
    rec.replicate = replicate;
    rec.iteration = state.count(TrialStatus::completed);
    rec.best_feasible_true_value = best_feasible;
    rec.identified_best_value = pick_truth.objective;
    rec.identified_feasible = is_feasible(pick_truth);
    if (const auto confident = identify_confident_feasible(summaries, options.delta)) {
      const auto t = evaluate_true(problem, state.trials[confident->trial].x);
      rec.confident_best_value = t.objective;
      rec.confident_feasible = is_feasible(t);
    }
    out.push_back(std::move(rec));
  };

  MetricModels models = fit_models(state);
  record(models);
  for (std::size_t b = 0; b < options.batches; ++b) {
    BatchOptions opts;
    opts.bounds = unit_bounds;
    opts.q = options.batch_size;
    opts.restarts = options.restarts;
    opts.samples = options.samples;
    opts.scan_points = options.scan_points;
    opts.seed = mix_seed(rep_seed, 100 + b);
    opts.mode = method;
    evaluate_rows(generate_batch(models, Matrix(0, static_cast<Eigen::Index>(d)), opts));
    models = fit_models(state);
    record(models);
  }
  return out;
}

}  // namespace

OptRunTrace run_opt_benchmark(const OptBenchmarkOptions& options) {
  if (options.replicates < 1) throw InvalidArgument("replicates must be at least 1");
  if (options.batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (options.init_points < 2) throw InvalidArgument("at least two initial points are required");
  std::vector<const Problem*> problems;
  for (const auto& name : options.problems) problems.push_back(&get_problem(name));

  const std::size_t num_m = options.methods.size();
  const std::size_t tasks = problems.size() * num_m * options.replicates;
  std::vector<std::vector<OptTraceRecord>> traces(tasks);
  parallel_for(tasks, options.threads, [&](std::size_t i) {
    const std::size_t r = i % options.replicates;
    const std::size_t m = (i / options.replicates) % num_m;
    const std::size_t p = i / (options.replicates * num_m);
    traces[i] = run_one_trace(*problems[p], options.methods[m], r, options);
  });

  OptRunTrace out;
  for (auto& t : traces) {
    for (auto& rec : t) out.records.push_back(std::move(rec));
  }
  return out;
}

std::string method_name(SamplingMethod method) { return method == SamplingMethod::qmc ? "QMC" : "MC"; }

std::string method_name(FantasyMode method) {
  return method == FantasyMode::noisy_ei ? "NEI" : "EI+heuristics";
}

MeanSem mean_sem(const std::vector<double>& values) {
  MeanSem out;
  out.count = values.size();
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), 0};
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sem = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  }
  return out;
}

std::vector<QmcSummaryRow> summarize(const QmcStudyResult& result) {
  std::map<std::pair<int, std::size_t>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : result.records) {
    auto& g = groups[{static_cast<int>(r.method), r.samples}];
    g.first.push_back(r.relative_error);
    if (!std::isnan(r.optimizer_distance)) g.second.push_back(r.optimizer_distance);
  }
  std::vector<QmcSummaryRow> out;
  for (const auto& [key, g] : groups) {
    out.push_back({static_cast<SamplingMethod>(key.first), key.second, mean_sem(g.first), mean_sem(g.second)});
  }
  return out;
}

std::vector<OptSummaryRow> summarize_final(const OptRunTrace& trace) {
  // Final iteration per (problem, method), in order of first appearance.
  std::vector<std::pair<std::string, FantasyMode>> order;
  std::map<std::pair<std::string, int>, std::size_t> final_iteration;
  for (const auto& r : trace.records) {
    const auto key = std::make_pair(r.problem, static_cast<int>(r.method));
    if (!final_iteration.count(key)) order.emplace_back(r.problem, r.method);
    final_iteration[key] = std::max(final_iteration[key], r.iteration);
  }
  std::vector<OptSummaryRow> out;
  for (const auto& [problem, method] : order) {
    const std::size_t it = final_iteration[{problem, static_cast<int>(method)}];
    std::vector<double> best, identified, feasible;
    for (const auto& r : trace.records) {
      if (r.problem != problem || r.method != method || r.iteration != it) continue;
      if (r.best_feasible_true_value) best.push_back(*r.best_feasible_true_value);
      identified.push_back(r.identified_best_value);
      feasible.push_back(r.identified_feasible ? 1.0 : 0.0);
    }
    out.push_back({problem, method, it, mean_sem(best), mean_sem(identified), mean_sem(feasible)});
  }
  return out;
}

std::string to_csv(const QmcStudyResult& result) {
  std::ostringstream out;
  out << "problem,method,samples,replicate,relative_error,optimizer_distance\n";
  for (const auto& r : result.records) {
    out << r.problem << ',' << method_name(r.method) << ',' << r.samples << ',' << r.replicate << ','
        << format_real(r.relative_error) << ',' << format_real(r.optimizer_distance) << '\n';
  }
  return out.str();
}

std::string to_csv(const OptRunTrace& trace) {
  std::ostringstream out;
  out << "problem,method,replicate,iteration,best_feasible_true_value,identified_best_value,"
         "identified_feasible,confident_best_value,confident_feasible\n";
  for (const auto& r : trace.records) {
    out << r.problem << ',' << method_name(r.method) << ',' << r.replicate << ',' << r.iteration << ','
        << format_optional(r.best_feasible_true_value) << ',' << format_real(r.identified_best_value) << ','
        << (r.identified_feasible ? 1 : 0) << ',' << format_optional(r.confident_best_value) << ','
        << (r.confident_feasible ? (*r.confident_feasible ? "1" : "0") : "") << '\n';
  }
  return out.str();
}

void emit_csv(const QmcStudyResult& result, const std::filesystem::path& path) { write_file(to_csv(result), path); }

void emit_csv(const OptRunTrace& trace, const std::filesystem::path& path) { write_file(to_csv(trace), path); }

}  // namespace nei
