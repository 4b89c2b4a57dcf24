#include "noisyei/problems.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "noisyei/errors.hpp"

namespace nei {
namespace {

using std::numbers::pi;

SearchSpace box(std::initializer_list<std::pair<double, double>> ranges) {
  SearchSpace s;
  int i = 1;
  for (const auto& [lo, hi] : ranges) s.dims.push_back({"x" + std::to_string(i++), lo, hi, false});
  return s;
}

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

// Minimize x1 + x2 on [0,1]^2 subject to a sinusoidal constraint and a norm
// constraint (Gramacy et al., 2016).
ProblemEvaluation gramacy(const Vector& x) {
  const double x1 = x(0), x2 = x(1);
  const double c1 = 1.5 - x1 - 2.0 * x2 - 0.5 * std::sin(2.0 * pi * (x1 * x1 - 2.0 * x2));
  const double c2 = x1 * x1 + x2 * x2 - 1.5;
  return {x1 + x2, vec({c1, c2})};
}

double branin_value(double x1, double x2) {
  const double b = 5.1 / (4.0 * pi * pi);
  const double c = 5.0 / pi;
  const double t = 1.0 / (8.0 * pi);
  const double r = x2 - b * x1 * x1 + c * x1 - 6.0;
  return r * r + 10.0 * (1.0 - t) * std::cos(x1) + 10.0;
}

// Branin restricted to a disk (Gelbart et al., 2014).
ProblemEvaluation branin(const Vector& x) {
  const double d1 = x(0) - 2.5, d2 = x(1) - 7.5;
  return {branin_value(x(0), x(1)), vec({d1 * d1 + d2 * d2 - 50.0})};
}

// First simulation of Gardner et al. (2014).
ProblemEvaluation gardner(const Vector& x) {
  const double x1 = x(0), x2 = x(1);
  const double f = std::cos(2.0 * x1) * std::cos(x2) + std::sin(x1);
  const double c = std::cos(x1) * std::cos(x2) - std::sin(x1) * std::sin(x2) - 0.5;
  return {f, vec({c})};
}

constexpr std::array<double, 4> kHartmannAlpha{1.0, 1.2, 3.0, 3.2};
constexpr double kHartmannA[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                     {0.05, 10, 17, 0.1, 8, 14},
                                     {3, 3.5, 1.7, 10, 17, 8},
                                     {17, 8, 0.05, 10, 0.1, 14}};
constexpr double kHartmannP[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                     {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                     {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                     {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};

// Hartmann6 inside the unit L2 ball.
ProblemEvaluation hartmann6(const Vector& x) {
  double f = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int k = 0; k < 6; ++k) {
      const double d = x(k) - kHartmannP[i][k];
      inner += kHartmannA[i][k] * d * d;
    }
    f -= kHartmannAlpha[static_cast<std::size_t>(i)] * std::exp(-inner);
  }
  return {f, vec({x.squaredNorm() - 1.0})};
}

// Reference optima and noise levels come from tools/reference_values.py:
// a 2000 x 2000 grid (2-d) or a 2^20-point Sobol scan (6-d) polished with
// SLSQP; noise sds are 20% of each function's range over a 10^4-point Sobol
// scan rounded to one significant digit, except the Branin and Hartmann6
// objective noise which follow the published setup.
std::vector<Problem> build_registry() {
  std::vector<Problem> r;
  r.push_back({"gramacy", box({{0, 1}, {0, 1}}), 2, 0.4, {0.7, 0.4},
               {vec({0.1951226868944409, 0.4046653651140607}), 0.5997880520085016,
                "2000x2000 grid + SLSQP polish"},
               gramacy});
  r.push_back({"hartmann6", box({{0, 1}, {0, 1}, {0, 1}, {0, 1}, {0, 1}, {0, 1}}), 1, 0.2, {1.0},
               {vec({0.20168951335947666, 0.1500106924068659, 0.47687396490815326, 0.27533243004813107,
                     0.31165161151933884, 0.6573005378270553}),
                -3.3223680114155125, "2^20-point Sobol scan + SLSQP polish; ball constraint inactive"},
               hartmann6});
  r.push_back({"branin", box({{-5, 10}, {0, 15}}), 1, 5.0, {20.0},
               {vec({pi, 2.275}), 0.39788735772973816, "2000x2000 grid + SLSQP polish"},
               branin});
  r.push_back({"gardner", box({{0, 6}, {0, 6}}), 1, 0.8, {0.4},
               {vec({1.5 * pi, 0.0}), -2.0, "2000x2000 grid + SLSQP polish"},
               gardner});
  return r;
}

const std::vector<Problem>& registry() {
  static const std::vector<Problem> problems = build_registry();
  return problems;
}

}  // namespace

const Problem& get_problem(const std::string& name) {
  for (const auto& p : registry()) {
    if (p.name == name) return p;
  }
  std::ostringstream msg;
  msg << "unknown problem '" << name << "'; available:";
  for (const auto& n : problem_names()) msg << ' ' << n;
  throw InvalidArgument(msg.str());
}

const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& p : registry()) out.push_back(p.name);
    return out;
  }();
  return names;
}

Problem scale_noise(const Problem& problem, double factor) {
  if (!(factor >= 0.0) || !std::isfinite(factor)) throw InvalidArgument("noise factor must be >= 0");
  Problem out = problem;
  out.objective_noise_sd *= factor;
  for (double& sd : out.constraint_noise_sds) sd *= factor;
  return out;
}

ProblemEvaluation evaluate_true(const Problem& problem, const Eigen::Ref<const Vector>& x) {
  if (!problem.space.contains(x)) {
    throw InvalidArgument("point lies outside the bounds of problem '" + problem.name + "'");
  }
  return problem.function(x);
}

TrialRecord evaluate_noisy(const Problem& problem, const Eigen::Ref<const Vector>& x, std::mt19937_64& rng) {
  const ProblemEvaluation truth = evaluate_true(problem, x);
  std::normal_distribution<double> normal(0.0, 1.0);
  TrialRecord t;
  t.x = x;
  t.status = TrialStatus::completed;
  const double sd_f = problem.objective_noise_sd;
  t.objective = Measurement{truth.objective + sd_f * normal(rng), sd_f};
  for (std::size_t j = 0; j < problem.num_constraints; ++j) {
    const double sd = problem.constraint_noise_sds[j];
    t.constraints.push_back({truth.constraints(static_cast<Eigen::Index>(j)) + sd * normal(rng), sd});
  }
  return t;
}

const ReferenceOptimum& reference_optimum(const Problem& problem) { return problem.optimum; }

bool is_feasible(const ProblemEvaluation& e, double tolerance) {
  return (e.constraints.array() <= tolerance).all();
}

}  // namespace nei
