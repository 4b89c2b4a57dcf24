#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "noisyei/errors.hpp"
#include "noisyei/problems.hpp"
#include "noisyei/study.hpp"

using namespace nei;
namespace fs = std::filesystem;

namespace {

SearchSpace square() { return SearchSpace{{{"x1", 0.0, 1.0, false}, {"x2", 0.0, 1.0, false}}}; }

TrialRecord completed(Vector x, double f, std::vector<Measurement> c = {}, double sd = 0.1,
                      std::string tag = "") {
  TrialRecord t;
  t.x = std::move(x);
  t.objective = Measurement{f, sd};
  t.constraints = std::move(c);
  t.status = TrialStatus::completed;
  t.tag = std::move(tag);
  return t;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("noisyei_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

StudyState gramacy_study(std::size_t n, std::uint64_t seed) {
  const auto& problem = get_problem("gramacy");
  StudyConfig cfg;
  cfg.seed = seed;
  cfg.qmc_samples = 8;
  cfg.restarts = 4;
  cfg.scan_points = 200;
  auto state = create_study(problem.space, problem.num_constraints, cfg);
  std::mt19937_64 rng(seed);
  auto s = suggest(state, n);
  std::vector<TrialRecord> obs;
  for (const auto& x : s.candidates) obs.push_back(evaluate_noisy(problem, x, rng));
  return tell(s.state, obs);
}

}  // namespace

TEST_CASE("create_study") {
  auto s = create_study(square(), 1);
  CHECK(s.trials.empty());
  CHECK(s.num_constraints == 1);
  CHECK(s.schema_version == kSchemaVersion);
  CHECK(create_study(square(), 0).num_constraints == 0);

  CHECK_THROWS_AS(create_study(SearchSpace{{{"x", 1.0, 1.0, false}}}, 0), InvalidArgument);
  CHECK_THROWS_AS(create_study(SearchSpace{{{"x", 2.0, 1.0, false}}}, 0), InvalidArgument);
  CHECK_THROWS_AS(create_study(SearchSpace{{{"x", 0.0, 1.0, false}, {"x", 0.0, 2.0, false}}}, 0),
                  InvalidArgument);
  CHECK_THROWS_AS(create_study(SearchSpace{}, 0), InvalidArgument);
  CHECK_THROWS_AS(create_study(SearchSpace{{{"k", 0.2, 0.8, true}}}, 0), InvalidArgument);
}

TEST_CASE("initialization size") {
  auto s = create_study(square(), 0);
  CHECK(s.initialization_size() == 6);
  SearchSpace big;
  for (int i = 0; i < 20; ++i) big.dims.push_back({"d" + std::to_string(i), 0.0, 1.0, false});
  CHECK(create_study(big, 0).initialization_size() == 30);
  StudyConfig cfg;
  cfg.init_size = 5;
  CHECK(create_study(square(), 0, cfg).initialization_size() == 5);
}

TEST_CASE("tell") {
  auto s = create_study(square(), 1);
  auto sug = suggest(s, 3);
  CHECK(sug.state.count(TrialStatus::pending) == 3);
  auto t = tell(sug.state, {completed(sug.candidates[1], 0.5, {{-1.0, 0.0}}, 0.0)});
  CHECK(t.count(TrialStatus::pending) == 2);
  CHECK(t.count(TrialStatus::completed) == 1);
  CHECK(t.trials.size() == 3);
  CHECK(t.trials[1].objective->sd == 0.0);

  CHECK_THROWS_AS(tell(s, {completed(vec2(1.5, 0.5), 0.0, {{0.0, 0.1}})}), InvalidArgument);
  CHECK_THROWS_AS(tell(s, {completed(Vector::Zero(3), 0.0, {{0.0, 0.1}})}), InvalidArgument);
  CHECK_THROWS_AS(tell(s, {completed(vec2(0.5, 0.5), 0.0, {{0.0, -0.1}})}), InvalidArgument);
  CHECK_THROWS_AS(tell(s, {completed(vec2(0.5, 0.5), 0.0, {}, -1.0)}), InvalidArgument);
  CHECK_THROWS_AS(tell(s, {completed(vec2(0.5, 0.5), 0.0, {})}), InvalidArgument);
}

TEST_CASE("tell is idempotent") {
  auto s = create_study(square(), 0);
  const auto a = completed(vec2(0.2, 0.3), 1.0, {}, 0.1, "arm-a");
  const auto b = completed(vec2(0.7, 0.1), 2.0);
  auto once = tell(s, {a, b});
  auto twice = tell(once, {a, b});
  CHECK(once == twice);
  CHECK(twice.trials.size() == 2);

  // A different tag at the same point is a distinct trial.
  auto other = tell(once, {completed(vec2(0.2, 0.3), 1.0, {}, 0.1, "arm-b")});
  CHECK(other.trials.size() == 3);
}

TEST_CASE("suggest") {
  auto s = create_study(square(), 1);
  auto sug = suggest(s, 5);
  CHECK(sug.candidates.size() == 5);
  for (const auto& x : sug.candidates) CHECK(s.space.contains(x));
  CHECK(sug.state.count(TrialStatus::pending) == 5);
  CHECK_THROWS_AS(suggest(s, 0), InvalidArgument);

  // Later quasirandom points continue the sequence rather than repeating it.
  auto next = suggest(sug.state, 1);
  for (const auto& x : sug.candidates) CHECK((x - next.candidates[0]).norm() > 1e-6);
}

TEST_CASE("model-based suggestions avoid existing points") {
  auto state = gramacy_study(6, 3);
  auto sug = suggest(state, 3);
  REQUIRE(sug.candidates.size() == 3);
  for (std::size_t i = 0; i < sug.candidates.size(); ++i) {
    CHECK(state.space.contains(sug.candidates[i]));
    for (const auto& t : state.trials) CHECK((t.x - sug.candidates[i]).norm() > 1e-6);
    for (std::size_t j = 0; j < i; ++j) CHECK((sug.candidates[j] - sug.candidates[i]).norm() > 1e-6);
  }
  // Deterministic given the state.
  CHECK(suggest(state, 3).candidates == sug.candidates);
}

TEST_CASE("integer dimensions stay integral") {
  SearchSpace space{{{"threads", 1.0, 16.0, true}, {"ratio", 0.0, 1.0, false}}};
  StudyConfig cfg;
  cfg.qmc_samples = 8;
  cfg.restarts = 3;
  cfg.scan_points = 100;
  cfg.init_size = 4;
  auto state = create_study(space, 0, cfg);
  auto sug = suggest(state, 4);
  std::vector<TrialRecord> obs;
  for (const auto& x : sug.candidates) {
    CHECK(x(0) == std::round(x(0)));
    obs.push_back(completed(x, std::pow(x(0) - 6.0, 2) / 10.0 + x(1), {}, 0.05));
  }
  state = tell(sug.state, obs);
  auto more = suggest(state, 2);
  for (const auto& x : more.candidates) {
    CHECK(x(0) == std::round(x(0)));
    CHECK(space.contains(x));
  }
  Vector x(2);
  x << 3.4, 0.5;
  space.round(x);
  CHECK(x(0) == 3.0);
}

TEST_CASE("expected reduction rule") {
  TrialSummary a{0, 0.0, 0.1, {{0.0, 1.0}}};
  TrialSummary b{1, 0.5, 0.1, {{0.0, 2.0}}};
  const auto best = identify_expected_reduction({b, a}, 1.0);
  CHECK(best.trial == 0);
  CHECK(best.score == 0.5);
  CHECK(best.feasibility == 0.5);
  CHECK(identify_expected_reduction({b}, -7.0).trial == 1);

  // Ties: higher feasibility wins, then the earlier entry.
  TrialSummary c{2, 0.0, 0.1, {{0.0, 1.0}}};
  TrialSummary e{3, 0.5, 0.1, {}};
  const auto tie = identify_expected_reduction({c, e}, 1.0);
  CHECK(tie.trial == 3);
  CHECK(identify_expected_reduction({e, TrialSummary{4, 0.5, 0.1, {}}}, 1.0).trial == 3);
  const auto tie2 = identify_expected_reduction({TrialSummary{5, 0.5, 0.1, {{0.0, 1.0}}},
                                                  TrialSummary{6, 0.75, 0.1, {}}},
                                                 1.0);
  CHECK(tie2.trial == 6);

  CHECK_THROWS_AS(identify_expected_reduction({}, 1.0), InsufficientData);
  CHECK(default_baseline({a, b}) == 0.5);
}

TEST_CASE("scaling every feasibility product keeps the argmax") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<TrialSummary> s, scaled;
    for (std::size_t i = 0; i < 6; ++i) {
      TrialSummary x{i, u(rng), 0.1, {{u(rng), 0.5}}};
      s.push_back(x);
      // A second constraint that is certainly satisfied with probability 1/2
      // halves every product.
      x.constraints.push_back({0.0, 1.0});
      scaled.push_back(x);
    }
    CHECK(identify_expected_reduction(s, 2.0).trial == identify_expected_reduction(scaled, 2.0).trial);
  }
}

TEST_CASE("expected reduction score never rises as a constraint mean worsens") {
  double prev = INFINITY;
  for (double mc = -3.0; mc <= 3.0; mc += 0.1) {
    const auto r = identify_expected_reduction({TrialSummary{0, 0.2, 0.1, {{mc, 0.7}, {-0.5, 1.0}}}}, 1.0);
    CHECK(r.score <= prev);
    prev = r.score;
  }
}

TEST_CASE("confident feasibility rule") {
  TrialSummary edge{0, 0.3, 0.1, {{0.0, 1.0}, {0.0, 0.2}}};
  auto r = identify_confident_feasible({edge}, 0.5);
  REQUIRE(r.has_value());
  CHECK(r->trial == 0);
  CHECK(r->score == 0.3);

  CHECK_FALSE(identify_confident_feasible({edge}, 0.05).has_value());

  TrialSummary a{1, 0.4, 0.1, {{-5.0, 1.0}}};
  TrialSummary b{2, -0.1, 0.1, {{-5.0, 1.0}}};
  TrialSummary c{3, -9.0, 0.1, {{5.0, 1.0}}};
  r = identify_confident_feasible({a, b, c}, 0.05);
  REQUIRE(r.has_value());
  CHECK(r->trial == 2);

  CHECK_THROWS_AS(identify_confident_feasible({a}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(identify_confident_feasible({a}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(identify_confident_feasible({}, 0.5), InsufficientData);
}

TEST_CASE("identification on a study") {
  auto s = create_study(square(), 1);
  CHECK_THROWS_AS(identify_best_expected_reduction(s), InsufficientData);
  s = tell(s, {completed(vec2(0.5, 0.5), 2.0, {{-1.0, 0.5}})});
  CHECK(identify_best_expected_reduction(s, 10.0).trial == 0);
  CHECK(identify_best_expected_reduction(s, -10.0).trial == 0);

  auto g = gramacy_study(8, 4);
  const auto er = identify_best_expected_reduction(g);
  CHECK(g.trials[er.trial].status == TrialStatus::completed);
  const auto cf = identify_best_confident_feasible(g, 0.05);
  if (cf) CHECK(g.trials[cf->trial].status == TrialStatus::completed);
}

TEST_CASE("maximization negates the objective") {
  StudyConfig cfg;
  cfg.maximize = true;
  auto s = create_study(square(), 0, cfg);
  s = tell(s, {completed(vec2(0.1, 0.1), 1.0), completed(vec2(0.9, 0.9), 3.0)});
  const auto sum = summarize_completed(s);
  CHECK(sum[1].mu_f < sum[0].mu_f);
  const auto m = fit_models(s);
  CHECK(m.objective.data().means(1) == -3.0);
  CHECK(identify_best_expected_reduction(s).trial == 1);
}

TEST_CASE("persistence round trip") {
  TempDir dir;
  StudyConfig cfg;
  cfg.seed = 0xfeedfacecafebeefULL;
  cfg.maximize = true;
  cfg.init_size = 7;
  SearchSpace space{{{"a", -1.5, 2.25, false}, {"n", 1.0, 9.0, true}}};
  auto s = create_study(space, 2, cfg);
  Vector x(2);
  x << 0.1 + 1e-17, 3.0;
  s = tell(s, {completed(x, 1.0 / 3.0, {{-0.0, 0.0}, {1e-300, 2.5e-7}}, 0.0, "tag \"quoted\"")});
  x << -1.5, 9.0;
  TrialRecord pending;
  pending.x = x;
  s = tell(s, {pending});

  const auto path = dir.path / "study.json";
  save(s, path);
  std::vector<std::string> warnings;
  const auto back = load(path, &warnings);
  CHECK(warnings.empty());
  CHECK(back == s);
  CHECK(back.config.seed == cfg.seed);
  CHECK(from_json(to_json(s)) == s);
  CHECK_FALSE(fs::exists(fs::path(path.string() + ".tmp")));
}

TEST_CASE("malformed and incompatible files") {
  TempDir dir;
  auto s = tell(create_study(square(), 0), {completed(vec2(0.5, 0.5), 1.0)});
  const std::string text = to_json(s);

  CHECK_THROWS_AS(from_json(text.substr(0, text.size() / 2)), ParseError);
  try {
    from_json("{\n  \"schema_version\": 1,\n  \"space\": [\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }

  std::string future = text;
  future.replace(future.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
  CHECK_THROWS_AS(from_json(future), IncompatibleVersion);

  std::string extra = text;
  extra.insert(1, "\n  \"colour\": \"blue\",");
  std::vector<std::string> warnings;
  CHECK(from_json(extra, &warnings) == s);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("colour") != std::string::npos);

  CHECK_THROWS_AS(load(dir.path / "missing.json"), IoError);
}

TEST_CASE("an interrupted save leaves the previous file intact") {
  TempDir dir;
  const auto path = dir.path / "study.json";
  auto before = tell(create_study(square(), 0), {completed(vec2(0.5, 0.5), 1.0)});
  save(before, path);
  const auto after = tell(before, {completed(vec2(0.25, 0.75), 2.0)});
  // Crash between writing the temporary file and renaming it.
  const auto tmp = write_temp(after, path);
  CHECK(fs::exists(tmp));
  CHECK(load(path) == before);
  CHECK(from_json(slurp(tmp)) == after);
  save(after, path);
  CHECK(load(path) == after);
}
