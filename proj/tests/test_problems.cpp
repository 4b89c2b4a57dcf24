#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "noisyei/errors.hpp"
#include "noisyei/problems.hpp"
#include "noisyei/qmc.hpp"

using namespace nei;

namespace {

Vector v(std::initializer_list<double> xs) {
  Vector out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("registry") {
  CHECK(problem_names() == std::vector<std::string>{"gramacy", "hartmann6", "branin", "gardner"});
  CHECK(get_problem("gramacy").dim() == 2);
  CHECK(get_problem("gramacy").num_constraints == 2);
  CHECK(get_problem("hartmann6").dim() == 6);
  CHECK(get_problem("hartmann6").num_constraints == 1);
  CHECK(get_problem("branin").num_constraints == 1);
  CHECK(get_problem("gardner").num_constraints == 1);
  try {
    get_problem("rosenbrock");
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    for (const auto& n : problem_names()) CHECK(msg.find(n) != std::string::npos);
  }
}

TEST_CASE("closed-form evaluations") {
  const auto g = evaluate_true(get_problem("gramacy"), v({0.0, 0.0}));
  CHECK(g.objective == 0.0);
  CHECK(g.constraints(0) == doctest::Approx(1.5));
  CHECK(g.constraints(1) == doctest::Approx(-1.5));
  CHECK_FALSE(is_feasible(g));

  const auto b = evaluate_true(get_problem("branin"), v({std::numbers::pi, 2.275}));
  CHECK(b.objective == doctest::Approx(0.397887357729738).epsilon(1e-12));

  const auto h = evaluate_true(get_problem("hartmann6"),
                               v({0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573}));
  CHECK(h.objective == doctest::Approx(-3.32237).epsilon(1e-5));

  const auto gd = evaluate_true(get_problem("gardner"), v({1.5 * std::numbers::pi, 0.0}));
  CHECK(gd.objective == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("published noise levels") {
  CHECK(get_problem("hartmann6").objective_noise_sd == 0.2);
  CHECK(get_problem("branin").objective_noise_sd == 5.0);
  for (const auto& name : problem_names()) {
    const auto& p = get_problem(name);
    CHECK(p.objective_noise_sd >= 0.0);
    REQUIRE(p.constraint_noise_sds.size() == p.num_constraints);
    for (double sd : p.constraint_noise_sds) CHECK(sd >= 0.0);
  }
}

TEST_CASE("out-of-bounds evaluation is rejected") {
  CHECK_THROWS_AS(evaluate_true(get_problem("gramacy"), v({1.1, 0.5})), InvalidArgument);
  CHECK_THROWS_AS(evaluate_true(get_problem("branin"), v({0.0, 16.0})), InvalidArgument);
  CHECK_THROWS_AS(evaluate_true(get_problem("gramacy"), v({0.5})), InvalidArgument);
}

TEST_CASE("reference optima are feasible and not beaten by a grid") {
  for (const auto& name : problem_names()) {
    CAPTURE(name);
    const auto& p = get_problem(name);
    const auto& opt = reference_optimum(p);
    const auto e = evaluate_true(p, opt.x);
    CHECK(is_feasible(e, 1e-6));
    CHECK(e.objective == doctest::Approx(opt.f).epsilon(1e-9));
    CHECK_FALSE(opt.provenance.empty());
  }
  // 2-d problems: 401 x 401 grid; slack is a gradient bound times the
  // diagonal of two grid cells.
  const std::vector<std::pair<std::string, double>> lipschitz{{"gramacy", 1.5}, {"branin", 60.0}, {"gardner", 4.0}};
  for (const auto& [name, lip] : lipschitz) {
    CAPTURE(name);
    const auto& p = get_problem(name);
    const auto b = p.space.bounds();
    const int n = 400;
    const Vector step = (b.upper - b.lower) / n;
    const double slack = lip * 2.0 * step.norm();
    double best = INFINITY;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        Vector x = b.lower + Vector(v({i * step(0), j * step(1)}));
        x = x.cwiseMin(b.upper);
        const auto e = evaluate_true(p, x);
        if (is_feasible(e)) best = std::min(best, e.objective);
      }
    }
    CHECK(best >= p.optimum.f - slack);
    CHECK(best <= p.optimum.f + slack);
  }
  // 6-d: a Sobol scan never beats the reference.
  const auto& h = get_problem("hartmann6");
  SobolGenerator gen(6, 1);
  const Matrix pts = gen.draw(1 << 14);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const auto e = evaluate_true(h, pts.row(i).transpose());
    if (is_feasible(e)) CHECK(e.objective >= h.optimum.f - 1e-9);
  }
}

TEST_CASE("noisy evaluation") {
  const auto& p = get_problem("gramacy");
  const Vector x = v({0.3, 0.6});
  std::mt19937_64 a(17), b(17);
  const auto ra = evaluate_noisy(p, x, a), rb = evaluate_noisy(p, x, b);
  CHECK(ra == rb);
  CHECK(ra.status == TrialStatus::completed);
  CHECK(ra.objective->sd == p.objective_noise_sd);
  REQUIRE(ra.constraints.size() == 2);
  CHECK(ra.constraints[1].sd == p.constraint_noise_sds[1]);

  const auto quiet = scale_noise(p, 0.0);
  std::mt19937_64 c(3);
  const auto rq = evaluate_noisy(quiet, x, c);
  const auto t = evaluate_true(p, x);
  CHECK(rq.objective->mean == t.objective);
  CHECK(rq.objective->sd == 0.0);
  CHECK(rq.constraints[0].mean == t.constraints(0));
  CHECK(rq.constraints[1].mean == t.constraints(1));

  // Sample moments of the injected noise.
  std::mt19937_64 rng(5);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double e = evaluate_noisy(p, x, rng).objective->mean - t.objective;
    sum += e;
    sum2 += e * e;
  }
  CHECK(std::abs(sum / n) < 4.0 * p.objective_noise_sd / std::sqrt(n));
  CHECK(std::sqrt(sum2 / n) == doctest::Approx(p.objective_noise_sd).epsilon(0.03));
}

TEST_CASE("evaluation is bit-deterministic") {
  SobolGenerator gen(2, 4);
  const Matrix pts = gen.draw(64);
  for (const auto& name : {"gramacy", "branin", "gardner"}) {
    const auto& p = get_problem(name);
    const auto b = p.space.bounds();
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const Vector x = b.lower.array() + pts.row(i).transpose().array() * (b.upper - b.lower).array();
      const auto e1 = evaluate_true(p, x), e2 = evaluate_true(p, x);
      CHECK(e1.objective == e2.objective);
      CHECK(e1.constraints == e2.constraints);
    }
  }
}
