// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "noisyei/acq.hpp"
#include "noisyei/bench.hpp"
#include "noisyei/errors.hpp"
#include "noisyei/gp.hpp"
#include "noisyei/normal.hpp"
#include "noisyei/problems.hpp"
#include "noisyei/qmc.hpp"
#include "noisyei/study.hpp"

using namespace nei;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("criterion %2d [%s] %s: %s\n", id, pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Study holding `n` evaluations of `problem` at quasirandom points.
StudyState observed_study(const Problem& problem, std::size_t n, std::uint64_t seed) {
  StudyConfig cfg;
  cfg.seed = seed;
  auto state = create_study(problem.space, problem.num_constraints, cfg);
  SobolGenerator gen(problem.dim(), mix_seed(seed, 1));
  std::mt19937_64 rng(mix_seed(seed, 2));
  const auto b = problem.space.bounds();
  std::vector<TrialRecord> trials;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector u = gen.draw(1).row(0).transpose();
    trials.push_back(evaluate_noisy(problem, problem.space.from_unit(u), rng));
  }
  return tell(state, trials);
}

EIxInputs moments(const MetricModels& m, const Vector& x, std::optional<double> incumbent, double penalty,
                  MomentGradients* grads) {
  EIxInputs in;
  const auto f = m.objective.predict_with_gradient(x);
  in.mu_f = f.mean;
  in.sigma_f = std::sqrt(f.variance);
  in.incumbent = incumbent;
  in.penalty_m = penalty;
  if (grads) {
    grads->mu_f = f.mean_grad;
    grads->sigma_f = in.sigma_f > 0 ? Vector(f.variance_grad / (2 * in.sigma_f)) : Vector::Zero(x.size());
  }
  for (const auto& c : m.constraints) {
    const auto g = c.predict_with_gradient(x);
    const double sd = std::max(std::sqrt(g.variance), kMinConstraintSd);
    in.constraints.push_back({g.mean, sd});
    if (grads) {
      grads->mu_c.push_back(g.mean_grad);
      grads->sigma_c.push_back(g.variance > 0 ? Vector(g.variance_grad / (2 * sd)) : Vector::Zero(x.size()));
    }
  }
  return in;
}

std::optional<double> observed_incumbent(const MetricModels& m) {
  std::optional<double> best;
  const auto& y = m.objective.data().means;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    bool ok = true;
    for (const auto& c : m.constraints) ok = ok && c.data().means(i) <= 0.0;
    if (ok && (!best || y(i) < *best)) best = y(i);
  }
  return best;
}

FantasySet fantasies(const MetricModels& m, std::size_t n, std::uint64_t seed, double penalty,
                     FantasyMode mode = FantasyMode::noisy_ei) {
  SobolGenerator gen(fantasy_dimension(m, 0), seed);
  return prepare_fantasies(m, Matrix(0, m.objective.dim()), n, gen, penalty, mode);
}

// Relative central-difference error with a floor on the denominator.
double fd_error(const std::function<double(const Vector&)>& f, const Vector& x, const Vector& grad) {
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector xp = x, xm = x;
    xp(k) = std::min(1.0, x(k) + h);
    xm(k) = std::max(0.0, x(k) - h);
    const double fd = (f(xp) - f(xm)) / (xp(k) - xm(k));
    worst = std::max(worst, std::abs(fd - grad(k)) / std::max(std::abs(fd), 1e-6));
  }
  return worst;
}

struct QmcNumbers {
  QmcStudyResult result;
  std::vector<QmcSummaryRow> rows;
  double seconds = 0.0;
};

const QmcSummaryRow* find_row(const std::vector<QmcSummaryRow>& rows, SamplingMethod m, std::size_t n) {
  for (const auto& r : rows) {
    if (r.method == m && r.samples == n) return &r;
  }
  return nullptr;
}

const OptSummaryRow* find_row(const std::vector<OptSummaryRow>& rows, const std::string& p, FantasyMode m) {
  for (const auto& r : rows) {
    if (r.problem == p && r.method == m) return &r;
  }
  return nullptr;
}

}  // namespace

int main() {
  // 1 and 2: integration study on Gramacy, 100 replicates.
  QmcStudyOptions qopt;
  qopt.sample_sizes = {16, 32, 50};
  qopt.replicates = 100;
  qopt.seed = 0;
  auto t0 = std::chrono::steady_clock::now();
  QmcNumbers q;
  q.result = run_qmc_study(qopt);
  q.seconds = seconds_since(t0);
  q.rows = summarize(q.result);
  {
    const auto* qmc16 = find_row(q.rows, SamplingMethod::qmc, 16);
    const auto* mc32 = find_row(q.rows, SamplingMethod::mc, 32);
    report(1, "QMC N=16 integration error <= MC N=32", qmc16->error.mean <= mc32->error.mean && q.seconds < 600,
           fmt("QMC16 %.4f +- %.4f, MC32 %.4f +- %.4f, %zu replicates, %.0f s", qmc16->error.mean,
               qmc16->error.sem, mc32->error.mean, mc32->error.sem, qopt.replicates, q.seconds));
    const auto* mc50 = find_row(q.rows, SamplingMethod::mc, 50);
    report(2, "QMC N=16 optimizer distance <= MC N=50 + 1 SEM",
           qmc16->distance.mean <= mc50->distance.mean + mc50->distance.sem,
           fmt("QMC16 %.4f +- %.4f, MC50 %.4f +- %.4f", qmc16->distance.mean, qmc16->distance.sem,
               mc50->distance.mean, mc50->distance.sem));
  }

  // 3 and 9 (second half): closed-loop benchmark.
  OptBenchmarkOptions oopt;
  oopt.problems = {"gramacy", "hartmann6"};
  oopt.replicates = 20;
  oopt.seed = 0;
  t0 = std::chrono::steady_clock::now();
  const auto trace = run_opt_benchmark(oopt);
  const double opt_seconds = seconds_since(t0);
  const auto final_rows = summarize_final(trace);
  {
    bool pass = opt_seconds < 7200;
    std::string detail;
    for (const auto& p : oopt.problems) {
      const auto* a = find_row(final_rows, p, FantasyMode::noisy_ei);
      const auto* b = find_row(final_rows, p, FantasyMode::plug_in);
      pass = pass && a->best_feasible.mean <= b->best_feasible.mean + b->best_feasible.sem;
      detail += fmt("%s NEI %.4f +- %.4f (n=%zu) vs EI+heuristics %.4f +- %.4f (n=%zu); ", p.c_str(),
                    a->best_feasible.mean, a->best_feasible.sem, a->best_feasible.count, b->best_feasible.mean,
                    b->best_feasible.sem, b->best_feasible.count);
    }
    const auto* g = find_row(final_rows, "gramacy", FantasyMode::noisy_ei);
    const double fstar = reference_optimum(get_problem("gramacy")).f;
    pass = pass && std::abs(g->best_feasible.mean - fstar) <= 0.15;
    detail += fmt("Gramacy NEI gap to %.4f: %.4f; %.0f s", fstar, g->best_feasible.mean - fstar, opt_seconds);
    report(3, "NEI final best feasible <= EI+heuristics + 1 SEM", pass, detail);
  }

  // 4: without noise NEI is EIx and both methods propose the same batches.
  {
    bool pass = true;
    double worst = 0.0;
    std::string detail;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& name : problem_names()) {
      const Problem quiet = scale_noise(get_problem(name), 0.0);
      const auto state = observed_study(quiet, 2 * quiet.dim() + 2, 40);
      const auto models = fit_models(state);
      const Bounds unit = Bounds::unit_cube(static_cast<Eigen::Index>(quiet.dim()));
      const double penalty = penalty_from_scan(models.objective, unit, 1000, 2.0, 7);
      const auto fs = fantasies(models, 32, 8, penalty);
      const auto inc = observed_incumbent(models);
      for (int i = 0; i < 100; ++i) {
        Vector x(static_cast<Eigen::Index>(quiet.dim()));
        for (auto& c : x) c = u(rng);
        worst = std::max(worst, std::abs(nei::nei(x, fs) - eix(moments(models, x, inc, penalty, nullptr))));
      }
      BatchOptions b;
      b.bounds = unit;
      b.q = 3;
      b.seed = 41;
      const bool same = generate_batch(models, Matrix(0, unit.dim()), b) ==
                        heuristic_ei_batch(models, Matrix(0, unit.dim()), b);
      pass = pass && same;
      if (!same) detail += name + " batches differ; ";
    }
    pass = pass && worst <= 1e-8;
    report(4, "noiseless NEI equals EIx, identical batches", pass,
           detail + fmt("max |NEI - EIx| = %.3g over 100 points x 4 problems", worst));
  }

  // 5: NEI vanishes at observed points.
  {
    double worst = 0.0;
    int used = 0, total = 0;
    for (const auto& name : problem_names()) {
      const auto& p = get_problem(name);
      for (std::uint64_t s = 0; s < 20; ++s) {
        const auto state = observed_study(p, 2 * p.dim() + 2 + s % 5, 500 + s);
        const auto models = fit_models(state);
        const Bounds unit = Bounds::unit_cube(static_cast<Eigen::Index>(p.dim()));
        const double penalty = penalty_from_scan(models.objective, unit, 1000, 2.0, s);
        const auto fs = fantasies(models, 32, s, penalty);
        ++total;
        bool all = true;
        for (const auto& inc : fs.incumbents) all = all && inc.has_value();
        if (!all) continue;
        ++used;
        for (Eigen::Index i = 0; i < fs.points.rows(); ++i) {
          worst = std::max(worst, nei::nei(fs.points.row(i).transpose(), fs));
        }
      }
    }
    report(5, "NEI <= 1e-8 at observed points", worst <= 1e-8 && used > 0,
           fmt("max NEI at observed points %.3g over %d/%d datasets with all incumbents present", worst, used,
               total));
  }

  // 6: analytic gradients against central differences.
  {
    double worst_eix = 0.0, worst_nei = 0.0;
    int points = 0;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& name : problem_names()) {
      const auto& p = get_problem(name);
      const auto state = observed_study(p, 2 * p.dim() + 4, 60);
      const auto models = fit_models(state);
      const Bounds unit = Bounds::unit_cube(static_cast<Eigen::Index>(p.dim()));
      const double penalty = penalty_from_scan(models.objective, unit, 1000, 2.0, 3);
      const auto fs = fantasies(models, 32, 9, penalty);
      const auto inc = observed_incumbent(models);
      for (int i = 0; i < 50; ++i, ++points) {
        Vector x(static_cast<Eigen::Index>(p.dim()));
        for (auto& c : x) c = u(rng);
        MomentGradients g;
        const auto in = moments(models, x, inc, penalty, &g);
        worst_eix = std::max(worst_eix, fd_error([&](const Vector& y) { return eix(moments(models, y, inc, penalty, nullptr)); },
                                                 x, eix_gradient(in, g)));
        worst_nei = std::max(worst_nei, fd_error([&](const Vector& y) { return nei::nei(y, fs); }, x, nei_gradient(x, fs)));
      }
    }
    report(6, "EIx and NEI gradients match finite differences", worst_eix <= 1e-4 && worst_nei <= 1e-4,
           fmt("max relative error EIx %.3g, NEI %.3g over %d points", worst_eix, worst_nei, points));
  }

  // 7: GP posterior against the explicit-inverse formulas.
  {
    double worst_mean = 0.0, worst_cov = 0.0, worst_interp = 0.0;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
      const Eigen::Index n = 1 + t % 10, d = 1 + t % 4;
      const bool exact = t % 3 == 0;
      NoisyDataset data{Matrix(n, d), Vector(n), Vector(n)};
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < d; ++k) data.points(i, k) = u(rng);
        data.means(i) = 2.0 * u(rng) - 1.0;
        data.noise_sds(i) = exact ? 0.0 : 0.5 * u(rng);
      }
      KernelParams kp{Vector::Constant(d, 0.2 + 0.4 * u(rng)), 0.5 + u(rng), 0.3 * u(rng)};
      const GPModel model(kp, data);
      Matrix q(6, d);
      for (auto& c : q.reshaped()) c = u(rng);
      Matrix kxx(n, n), kxq(n, 6), kqq(6, 6);
      auto k = [&](const Vector& a, const Vector& b) {
        const double r = ((a - b).array() / kp.lengthscales.array()).matrix().norm();
        return kp.signal_variance * (1 + std::sqrt(5.0) * r + 5.0 / 3.0 * r * r) * std::exp(-std::sqrt(5.0) * r);
      };
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) kxx(i, j) = k(data.points.row(i), data.points.row(j));
        for (Eigen::Index j = 0; j < 6; ++j) kxq(i, j) = k(data.points.row(i), q.row(j));
      }
      for (Eigen::Index i = 0; i < 6; ++i) {
        for (Eigen::Index j = 0; j < 6; ++j) kqq(i, j) = k(q.row(i), q.row(j));
      }
      const Matrix inv = (kxx + Matrix(data.noise_sds.array().square().matrix().asDiagonal())).inverse();
      const Vector mean = (kxq.transpose() * inv * (data.means.array() - kp.mean_constant).matrix()).array() +
                          kp.mean_constant;
      const Matrix cov = kqq - kxq.transpose() * inv * kxq;
      const auto post = model.posterior(q);
      worst_mean = std::max(worst_mean, (post.mean - mean).cwiseAbs().maxCoeff());
      worst_cov = std::max(worst_cov, (post.cov - cov).cwiseAbs().maxCoeff());
      if (exact) {
        const auto at = model.posterior(data.points);
        worst_interp = std::max(worst_interp, (at.mean - data.means).cwiseAbs().maxCoeff());
      }
    }
    report(7, "GP posterior matches dense formulas", worst_mean <= 1e-8 && worst_cov <= 1e-8 && worst_interp <= 1e-6,
           fmt("max |mean| err %.3g, max |cov| err %.3g, interpolation err %.3g over 100 datasets", worst_mean,
               worst_cov, worst_interp));
  }

  // 8: (0, k) property of one-dimensional projections.
  {
    bool pass = true;
    int checked = 0;
    for (std::optional<std::uint64_t> seed : {std::optional<std::uint64_t>(), std::optional<std::uint64_t>(1),
                                               std::optional<std::uint64_t>(12345)}) {
      SobolGenerator gen(6, seed);
      const Matrix pts = gen.draw(1024);
      for (int k = 0; k <= 10; ++k) {
        const Eigen::Index n = Eigen::Index(1) << k;
        for (Eigen::Index dim = 0; dim < 6; ++dim) {
          std::vector<int> counts(static_cast<std::size_t>(n), 0);
          for (Eigen::Index i = 0; i < n; ++i) {
            ++counts[static_cast<std::size_t>(std::floor(pts(i, dim) * static_cast<double>(n)))];
          }
          for (int c : counts) pass = pass && c == 1;
          ++checked;
        }
      }
    }
    report(8, "Sobol one-dimensional projections are (0,k)-nets", pass,
           fmt("%d (sequence, k, dimension) cases, k <= 10, d <= 6", checked));
  }

  // 9: identification rules.
  {
    bool exact = true;
    const auto er = identify_expected_reduction({TrialSummary{0, 0.0, 0.1, {{0.0, 1.0}}},
                                                 TrialSummary{1, 0.5, 0.1, {{0.0, 1.0}}}},
                                                1.0);
    exact = exact && er.trial == 0 && er.score == 0.5;
    const auto er1 = identify_expected_reduction({TrialSummary{3, 0.7, 0.1, {{0.4, 1.0}}}}, -5.0);
    exact = exact && er1.trial == 3;
    const auto cf = identify_confident_feasible({TrialSummary{0, 0.2, 0.1, {{0.0, 1.0}}}}, 0.5);
    exact = exact && cf.has_value() && cf->trial == 0;
    exact = exact && !identify_confident_feasible({TrialSummary{0, 0.2, 0.1, {{0.0, 1.0}}}}, 0.05).has_value();
    const auto two = identify_confident_feasible({TrialSummary{0, 0.2, 0.1, {{-9.0, 1.0}}},
                                                  TrialSummary{1, -0.3, 0.1, {{-9.0, 1.0}}}},
                                                 0.05);
    exact = exact && two.has_value() && two->trial == 1;

    const auto* a = find_row(final_rows, "hartmann6", FantasyMode::noisy_ei);
    const auto* b = find_row(final_rows, "hartmann6", FantasyMode::plug_in);
    const bool as_good = a->identified_value.mean <= b->identified_value.mean + b->identified_value.sem;
    const bool as_feasible =
        a->identified_feasible.mean >= b->identified_feasible.mean - b->identified_feasible.sem;
    report(9, "identification rules", exact && as_good && as_feasible,
           fmt("hand cases %s; Hartmann6 identified value NEI %.4f +- %.4f vs %.4f +- %.4f, "
               "feasible fraction NEI %.2f +- %.2f vs %.2f +- %.2f",
               exact ? "exact" : "WRONG", a->identified_value.mean, a->identified_value.sem,
               b->identified_value.mean, b->identified_value.sem, a->identified_feasible.mean,
               a->identified_feasible.sem, b->identified_feasible.mean, b->identified_feasible.sem));
  }

  // 10: reruns are byte-identical.
  {
    const bool qmc_same = to_csv(run_qmc_study(qopt)) == to_csv(q.result);
    OptBenchmarkOptions small = oopt;
    small.replicates = 2;
    const std::string first = to_csv(run_opt_benchmark(small));
    const bool opt_same = to_csv(run_opt_benchmark(small)) == first;
    report(10, "reruns with the same seed give byte-identical CSV", qmc_same && opt_same,
           fmt("integration study %s, closed-loop benchmark %s", qmc_same ? "identical" : "DIFFERENT",
               opt_same ? "identical" : "DIFFERENT"));
  }

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
