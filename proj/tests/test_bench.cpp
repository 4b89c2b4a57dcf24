#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "noisyei/bench.hpp"
#include "noisyei/errors.hpp"

using namespace nei;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

QmcStudyOptions small_qmc(bool optimize) {
  QmcStudyOptions o;
  o.sample_sizes = {4, 8};
  o.replicates = 3;
  o.ground_truth_samples = 2000;
  o.ground_truth_restarts = 4;
  o.restarts = 2;
  o.scan_points = 100;
  o.optimize = optimize;
  o.threads = 2;
  return o;
}

OptBenchmarkOptions small_opt() {
  OptBenchmarkOptions o;
  o.problems = {"gramacy"};
  o.batches = 2;
  o.batch_size = 2;
  o.replicates = 2;
  o.samples = 8;
  o.restarts = 3;
  o.scan_points = 100;
  o.threads = 2;
  return o;
}

}  // namespace

TEST_CASE("a large MC estimate reproduces itself") {
  const auto setup = make_qmc_setup(get_problem("gramacy"), 0);
  CHECK(setup.models.objective.data().size() == 5);
  CHECK(setup.pending.rows() == 5);
  CHECK(setup.query == Vector::Constant(2, 0.5));
  const double a = estimate_nei(setup, SamplingMethod::mc, 10000, 42);
  const double b = estimate_nei(setup, SamplingMethod::mc, 10000, 42);
  CHECK(std::abs(a - b) / std::abs(a) == 0.0);
  CHECK(std::isfinite(a));
}

TEST_CASE("integration study shape and determinism") {
  const auto r = run_qmc_study(small_qmc(false));
  CHECK(r.records.size() == 2 * 2 * 3);
  for (const auto& rec : r.records) {
    CHECK(rec.relative_error >= 0.0);
    CHECK(std::isnan(rec.optimizer_distance));
    CHECK(rec.problem == "gramacy");
  }
  CHECK(r.records.front().method == SamplingMethod::mc);
  CHECK(to_csv(run_qmc_study(small_qmc(false))) == to_csv(r));

  auto single = small_qmc(false);
  single.threads = 1;
  CHECK(to_csv(run_qmc_study(single)) == to_csv(r));
}

TEST_CASE("optimizer distances are fractions of the diagonal") {
  auto o = small_qmc(true);
  o.replicates = 2;
  const auto r = run_qmc_study(o);
  CHECK(r.ground_truth_optimizer.size() == 2);
  for (const auto& rec : r.records) {
    CHECK(rec.optimizer_distance >= 0.0);
    CHECK(rec.optimizer_distance <= 1.0);
  }
  o.replicates = 0;
  CHECK_THROWS_AS(run_qmc_study(o), InvalidArgument);
}

TEST_CASE("integration CSV round trip") {
  const auto r = run_qmc_study(small_qmc(false));
  const auto rows = parse_csv(to_csv(r));
  REQUIRE(rows.size() == r.records.size() + 1);
  CHECK(rows[0] == std::vector<std::string>{"problem", "method", "samples", "replicate", "relative_error",
                                            "optimizer_distance"});
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& rec = r.records[i];
    const auto& row = rows[i + 1];
    REQUIRE(row.size() == 6);
    CHECK(row[0] == rec.problem);
    CHECK(row[1] == method_name(rec.method));
    CHECK(std::stoul(row[2]) == rec.samples);
    CHECK(std::stoul(row[3]) == rec.replicate);
    CHECK(std::stod(row[4]) == doctest::Approx(rec.relative_error).epsilon(1e-9));
    CHECK(row[5].empty());
  }
}

TEST_CASE("empty results give header-only files") {
  const fs::path dir = fs::temp_directory_path() / "noisyei_bench_test";
  fs::create_directories(dir);
  emit_csv(QmcStudyResult{}, dir / "qmc.csv");
  emit_csv(OptRunTrace{}, dir / "opt.csv");
  std::ifstream a(dir / "qmc.csv"), b(dir / "opt.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == "problem,method,samples,replicate,relative_error,optimizer_distance\n");
  CHECK(sb.str() ==
        "problem,method,replicate,iteration,best_feasible_true_value,identified_best_value,"
        "identified_feasible,confident_best_value,confident_feasible\n");
  fs::remove_all(dir);
  CHECK_THROWS_AS(emit_csv(OptRunTrace{}, dir / "missing" / "opt.csv"), IoError);
}

TEST_CASE("optimization benchmark with no batches records the initial design") {
  auto o = small_opt();
  o.batches = 0;
  const auto t = run_opt_benchmark(o);
  CHECK(t.records.size() == 2 * 2);
  for (const auto& r : t.records) CHECK(r.iteration == o.init_points);
  // Both methods start from the same design.
  CHECK(t.records[0].best_feasible_true_value == t.records[2].best_feasible_true_value);
  CHECK(t.records[0].identified_best_value == t.records[2].identified_best_value);
}

TEST_CASE("optimization benchmark traces") {
  const auto o = small_opt();
  const auto t = run_opt_benchmark(o);
  CHECK(t.records.size() == 2 * 2 * 3);
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const auto& r = t.records[i];
    CHECK(r.iteration == o.init_points + (i % 3) * o.batch_size);
    if (i % 3 == 0) continue;
    const auto& prev = t.records[i - 1];
    if (prev.best_feasible_true_value) {
      REQUIRE(r.best_feasible_true_value.has_value());
      CHECK(*r.best_feasible_true_value <= *prev.best_feasible_true_value);
    }
  }
  CHECK(to_csv(run_opt_benchmark(o)) == to_csv(t));

  const auto rows = parse_csv(to_csv(t));
  REQUIRE(rows.size() == t.records.size() + 1);
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const auto& row = rows[i + 1];
    REQUIRE(row.size() == 9);
    CHECK(row[1] == method_name(t.records[i].method));
    CHECK(std::stod(row[5]) == doctest::Approx(t.records[i].identified_best_value).epsilon(1e-9));
  }

  const auto summary = summarize_final(t);
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].iteration == o.init_points + o.batches * o.batch_size);
  CHECK(summary[0].identified_value.count == 2);
}

TEST_CASE("without noise both methods produce the same traces") {
  auto o = small_opt();
  o.noise_scale = 0.0;
  o.replicates = 1;
  const auto t = run_opt_benchmark(o);
  REQUIRE(t.records.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& a = t.records[i];
    const auto& b = t.records[i + 3];
    CHECK(a.method == FantasyMode::noisy_ei);
    CHECK(b.method == FantasyMode::plug_in);
    CHECK(a.best_feasible_true_value == b.best_feasible_true_value);
    CHECK(a.identified_best_value == b.identified_best_value);
    CHECK(a.identified_feasible == b.identified_feasible);
  }
}

TEST_CASE("reporting helpers") {
  const auto ms = mean_sem({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == 2.5);
  CHECK(ms.sem == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(ms.count == 4);
  CHECK(mean_sem({}).count == 0);
  CHECK(mean_sem({7.0}).sem == 0.0);
  CHECK(method_name(SamplingMethod::qmc) == "QMC");
  CHECK(method_name(FantasyMode::noisy_ei) == "NEI");
  CHECK(method_name(FantasyMode::plug_in) == "EI+heuristics");
}
