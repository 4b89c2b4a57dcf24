// Command-line front end: ask-tell studies and benchmark reproduction.
//
// Exit codes: 0 success, 1 user error, 2 internal error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "noisyei/bench.hpp"
#include "noisyei/errors.hpp"
#include "noisyei/study.hpp"

namespace {

using nei::Vector;

struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v, int digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string join(const Vector& x, int digits = 17) {
  std::string out;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) out += ',';
    out += fmt(x(i), digits);
  }
  return out;
}

nei::StudyState load_study(const std::string& path) {
  std::vector<std::string> warnings;
  auto state = nei::load(path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return state;
}

nei::SearchSpace read_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open space file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UserError("malformed space file '" + path + "': " + e.what());
  }
  const nlohmann::json& dims = doc.is_object() && doc.contains("dims") ? doc["dims"] : doc;
  if (!dims.is_array()) throw UserError("space file must hold a list of dimensions");
  nei::SearchSpace space;
  try {
    for (const auto& d : dims) {
      space.dims.push_back({d.at("name").get<std::string>(), d.at("lower").get<double>(),
                            d.at("upper").get<double>(), d.value("integer", false)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw UserError("space file '" + path + "': " + e.what());
  }
  space.validate();
  return space;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t row, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UserError("row " + std::to_string(row) + ": column '" + column + "' is not a number: '" + s + "'");
  }
}

// Observation rows: one column per dimension (named as in the space), then
// objective_mean, objective_sd, c1_mean, c1_sd, ..., and an optional tag.
std::vector<nei::TrialRecord> read_observations(const std::string& path, const nei::StudyState& state) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open observations file '" + path + "'");
  std::vector<std::string> expected;
  for (const auto& d : state.space.dims) expected.push_back(d.name);
  expected.insert(expected.end(), {"objective_mean", "objective_sd"});
  for (std::size_t j = 1; j <= state.num_constraints; ++j) {
    expected.push_back("c" + std::to_string(j) + "_mean");
    expected.push_back("c" + std::to_string(j) + "_sd");
  }

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      header = split_csv_line(line);
      break;
    }
  }
  std::vector<nei::TrialRecord> trials;
  if (header.empty()) return trials;

  const bool has_tag = header.size() == expected.size() + 1 && header.back() == "tag";
  std::vector<std::string> got(header.begin(), header.end() - (has_tag ? 1 : 0));
  if (got != expected) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw UserError("observations header must be: " + want + "[,tag]");
  }

  const std::size_t d = state.space.dim();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw UserError("row " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    nei::TrialRecord t;
    t.status = nei::TrialStatus::completed;
    t.x.resize(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) t.x(static_cast<Eigen::Index>(i)) = parse_number(fields[i], line_no, header[i]);
    auto measurement = [&](std::size_t col) {
      nei::Measurement m{parse_number(fields[col], line_no, header[col]),
                         parse_number(fields[col + 1], line_no, header[col + 1])};
      if (m.sd < 0.0) throw UserError("row " + std::to_string(line_no) + ": column '" + header[col + 1] + "' is negative");
      return m;
    };
    t.objective = measurement(d);
    for (std::size_t j = 0; j < state.num_constraints; ++j) t.constraints.push_back(measurement(d + 2 + 2 * j));
    if (has_tag) t.tag = fields.back();
    try {
      nei::tell(state, {t});
    } catch (const nei::InvalidArgument& e) {
      throw UserError("row " + std::to_string(line_no) + ": " + e.what());
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void print_summary_rows(const std::vector<nei::QmcSummaryRow>& rows) {
  std::cout << "method,samples,mean_error,sem_error,mean_distance,sem_distance\n";
  for (const auto& r : rows) {
    std::cout << nei::method_name(r.method) << ',' << r.samples << ',' << fmt(r.error.mean, 6) << ','
              << fmt(r.error.sem, 6) << ',' << fmt(r.distance.mean, 6) << ',' << fmt(r.distance.sem, 6) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained Bayesian optimization with noisy expected improvement"};
  app.require_subcommand(1);

  // init
  auto* init = app.add_subcommand("init", "Create a study file");
  std::string space_path, out_path;
  std::size_t num_constraints = 0;
  std::uint64_t seed = 0;
  bool force = false;
  nei::StudyConfig config;
  init->add_option("--space", space_path, "JSON list of {name, lower, upper, integer}")->required();
  init->add_option("--constraints", num_constraints, "Number of constraints c_j(x) <= 0");
  init->add_option("--seed", seed, "Study seed");
  init->add_option("--out", out_path, "Study file to create")->required();
  init->add_flag("--force", force, "Overwrite an existing file");
  init->add_flag("--maximize", config.maximize, "Maximize the objective");
  init->add_option("--qmc-samples", config.qmc_samples, "Fantasy samples per acquisition");
  init->add_option("--restarts", config.restarts, "Acquisition optimizer restarts");
  init->add_option("--init-size", config.init_size, "Quasirandom points before modelling (0 = auto)");

  // suggest
  auto* suggest = app.add_subcommand("suggest", "Propose a batch of candidates");
  std::string study_path;
  std::size_t q = 1;
  suggest->add_option("--study", study_path, "Study file")->required();
  suggest->add_option("--q", q, "Batch size");

  // tell
  auto* tell = app.add_subcommand("tell", "Add observations from a CSV file");
  std::string obs_path;
  tell->add_option("--study", study_path, "Study file")->required();
  tell->add_option("--observations", obs_path, "CSV of observations")->required();

  // best
  auto* best = app.add_subcommand("best", "Report the identified best trial");
  std::string rule = "expected-reduction";
  std::optional<double> baseline;
  double delta = 0.05;
  best->add_option("--study", study_path, "Study file")->required();
  best->add_option("--rule", rule, "expected-reduction or confident-feasible")
      ->check(CLI::IsMember({"expected-reduction", "confident-feasible"}));
  best->add_option("--B", baseline, "Baseline objective (default: largest posterior mean)");
  best->add_option("--delta", delta, "Per-constraint infeasibility tolerance");

  // bench-qmc
  auto* bench_qmc = app.add_subcommand("bench-qmc", "MC vs QMC integration study");
  nei::QmcStudyOptions qmc;
  std::string csv_path;
  bool no_optimize = false;
  bench_qmc->add_option("--problem", qmc.problem, "Problem name");
  bench_qmc->add_option("--replicates", qmc.replicates, "Replicates");
  bench_qmc->add_option("--seed", qmc.seed, "Seed");
  bench_qmc->add_option("--samples", qmc.sample_sizes, "Sample sizes")->delimiter(',');
  bench_qmc->add_option("--threads", qmc.threads, "Worker threads (0 = all cores)");
  bench_qmc->add_flag("--no-optimize", no_optimize, "Skip the optimizer-distance part");
  bench_qmc->add_option("--out", csv_path, "CSV output")->required();

  // bench-opt
  auto* bench_opt = app.add_subcommand("bench-opt", "Closed-loop NEI vs EI+heuristics benchmark");
  nei::OptBenchmarkOptions opt;
  std::vector<std::string> problems;
  bench_opt->add_option("--problem", problems, "Problem name(s)")->delimiter(',');
  bench_opt->add_option("--replicates", opt.replicates, "Replicates");
  bench_opt->add_option("--seed", opt.seed, "Seed");
  bench_opt->add_option("--batches", opt.batches, "Batches after initialization");
  bench_opt->add_option("--batch-size", opt.batch_size, "Points per batch");
  bench_opt->add_option("--init-points", opt.init_points, "Quasirandom initial points");
  bench_opt->add_option("--samples", opt.samples, "Fantasy samples");
  bench_opt->add_option("--noise-scale", opt.noise_scale, "Multiplier on every noise sd");
  bench_opt->add_option("--threads", opt.threads, "Worker threads (0 = all cores)");
  bench_opt->add_option("--out", csv_path, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*init) {
      if (std::filesystem::exists(out_path) && !force) {
        throw UserError("'" + out_path + "' exists; pass --force to overwrite");
      }
      config.seed = seed;
      const auto state = nei::create_study(read_space(space_path), num_constraints, config);
      nei::save(state, out_path);
      std::cout << "created " << out_path << " (" << state.space.dim() << " dims, " << num_constraints
                << " constraints)\n";
    } else if (*suggest) {
      auto result = nei::suggest(load_study(study_path), q);
      nei::save(result.state, study_path);
      for (const auto& x : result.candidates) std::cout << join(x) << '\n';
    } else if (*tell) {
      auto state = load_study(study_path);
      const auto trials = read_observations(obs_path, state);
      if (trials.empty()) {
        std::cerr << "warning: '" << obs_path << "' holds no observations; study unchanged\n";
        return 0;
      }
      state = nei::tell(std::move(state), trials);
      nei::save(state, study_path);
      std::cout << "read " << trials.size() << " observations; " << state.count(nei::TrialStatus::completed)
                << " completed, " << state.count(nei::TrialStatus::pending) << " pending\n";
    } else if (*best) {
      const auto state = load_study(study_path);
      const double sign = state.config.maximize ? -1.0 : 1.0;
      std::optional<nei::IdentifiedTrial> pick;
      if (rule == "expected-reduction") {
        std::optional<double> b;
        if (baseline) b = sign * *baseline;
        pick = nei::identify_best_expected_reduction(state, b);
      } else {
        pick = nei::identify_best_confident_feasible(state, delta);
        if (!pick) {
          std::cout << "none qualifies: no completed trial meets every constraint with probability >= "
                    << fmt(1.0 - delta, 6) << '\n';
          return 0;
        }
      }
      const auto& t = state.trials[pick->trial];
      std::cout << "trial " << pick->trial << (t.tag.empty() ? "" : " (" + t.tag + ")") << '\n'
                << "x: " << join(t.x) << '\n'
                << "posterior mean: " << fmt(sign * pick->mu_f, 10) << '\n'
                << "feasibility: " << fmt(pick->feasibility, 10) << '\n'
                << "score: " << fmt(rule == "expected-reduction" ? pick->score : sign * pick->score, 10) << '\n';
    } else if (*bench_qmc) {
      qmc.optimize = !no_optimize;
      const auto result = nei::run_qmc_study(qmc);
      nei::emit_csv(result, csv_path);
      std::cout << "ground truth NEI: " << fmt(result.ground_truth, 10) << '\n';
      print_summary_rows(nei::summarize(result));
    } else if (*bench_opt) {
      if (!problems.empty()) opt.problems = problems;
      const auto trace = nei::run_opt_benchmark(opt);
      nei::emit_csv(trace, csv_path);
      std::cout << "problem,method,iteration,mean_best_feasible,sem,runs_with_feasible,mean_identified,"
                   "identified_feasible_rate\n";
      for (const auto& r : nei::summarize_final(trace)) {
        std::cout << r.problem << ',' << nei::method_name(r.method) << ',' << r.iteration << ','
                  << fmt(r.best_feasible.mean, 6) << ',' << fmt(r.best_feasible.sem, 6) << ','
                  << r.best_feasible.count << ',' << fmt(r.identified_value.mean, 6) << ','
                  << fmt(r.identified_feasible.mean, 6) << '\n';
      }
    }
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nei::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nei::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nei::IncompatibleVersion& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nei::InsufficientData& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nei::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
