#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "noisyei/acq.hpp"
#include "noisyei/bench.hpp"
#include "noisyei/errors.hpp"
#include "noisyei/normal.hpp"

using namespace nei;

namespace {

constexpr double kPhi0 = 0.398942280401432678;

MetricModels random_models(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, std::size_t j,
                           double noise) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) x(i, k) = u(rng);
  }
  auto make = [&](double phase, double shift) {
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = std::sin(4.0 * x.row(i).sum() + phase) + shift;
    Vector tau = Vector::Constant(n, noise);
    KernelParams p{Vector::Constant(d, 0.3), 1.0, shift};
    return GPModel(p, NoisyDataset{x, y, tau});
  };
  MetricModels models{make(0.0, 0.0), {}};
  for (std::size_t c = 0; c < j; ++c) models.constraints.push_back(make(1.0 + static_cast<double>(c), -0.2));
  return models;
}

FantasySet qmc_fantasies(const MetricModels& models, const Matrix& pending, std::size_t count,
                         std::uint64_t seed, double penalty,
                         FantasyMode mode = FantasyMode::noisy_ei) {
  SobolGenerator gen(fantasy_dimension(models, pending.rows()), seed);
  return prepare_fantasies(models, pending, count, gen, penalty, mode);
}

EIxInputs inputs_at(const MetricModels& models, const Vector& x, std::optional<double> incumbent,
                    double penalty, MomentGradients* grads = nullptr) {
  EIxInputs in;
  const auto f = models.objective.predict_with_gradient(x);
  in.mu_f = f.mean;
  in.sigma_f = std::sqrt(f.variance);
  in.incumbent = incumbent;
  in.penalty_m = penalty;
  if (grads) {
    grads->mu_f = f.mean_grad;
    grads->sigma_f = in.sigma_f > 0 ? Vector(f.variance_grad / (2.0 * in.sigma_f)) : Vector::Zero(x.size());
  }
  for (const auto& c : models.constraints) {
    const auto g = c.predict_with_gradient(x);
    const double sd = std::max(std::sqrt(g.variance), kMinConstraintSd);
    in.constraints.push_back({g.mean, sd});
    if (grads) {
      grads->mu_c.push_back(g.mean_grad);
      grads->sigma_c.push_back(g.variance > 0 ? Vector(g.variance_grad / (2.0 * sd)) : Vector::Zero(x.size()));
    }
  }
  return in;
}

// Best feasible observed objective when every observation is exact.
std::optional<double> exact_incumbent(const MetricModels& models) {
  std::optional<double> best;
  const auto& y = models.objective.data().means;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    bool ok = true;
    for (const auto& c : models.constraints) ok = ok && c.data().means(i) <= 0.0;
    if (ok && (!best || y(i) < *best)) best = y(i);
  }
  return best;
}

}  // namespace

TEST_CASE("ei_analytic") {
  // Monte Carlo oracle for mu = best, sigma = 1.
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  const int draws = 2000000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double imp = std::max(0.0, -z(rng));
    sum += imp;
    sum2 += imp * imp;
  }
  const double mc = sum / draws;
  const double se = std::sqrt((sum2 / draws - mc * mc) / draws);
  CHECK(std::abs(ei_analytic(0.3, 1.0, 0.3) - mc) < 4.0 * se);
  CHECK(ei_analytic(0.3, 1.0, 0.3) == doctest::Approx(kPhi0).epsilon(1e-14));

  CHECK(ei_analytic(-1.0, 0.0, 1.0) == 2.0);
  CHECK(ei_analytic(3.0, 0.0, 1.0) == 0.0);
  CHECK(ei_analytic(11.0, 1.0, 1.0) < 1e-10);
  CHECK(ei_analytic(11.0, 1.0, 1.0) >= 0.0);
  CHECK_THROWS_AS(ei_analytic(std::nan(""), 1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(ei_analytic(0.0, -1.0, 0.0), InvalidArgument);
}

TEST_CASE("prob_feasible") {
  CHECK(prob_feasible(0.0, 2.0) == 0.5);
  CHECK(prob_feasible(-3.0, 1.0) == doctest::Approx(0.998650101968369905).epsilon(1e-13));
  CHECK(prob_feasible(5.0, 1.0) == doctest::Approx(2.86651571879193911e-7).epsilon(1e-10));
  CHECK_THROWS_AS(prob_feasible(0.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(prob_feasible(0.0, -1.0), InvalidArgument);
}

TEST_CASE("eix examples") {
  EIxInputs a;
  a.mu_f = 2.0;
  a.sigma_f = 0.7;
  a.constraints = {{0.0, 1.0}};
  a.penalty_m = 10.0;
  CHECK(eix(a) == doctest::Approx(4.0).epsilon(1e-15));

  EIxInputs b;
  b.mu_f = 0.0;
  b.sigma_f = 1e-14;
  b.constraints = {{-50.0, 1.0}};
  b.incumbent = 1.0;
  CHECK(eix(b) == doctest::Approx(1.0).epsilon(1e-12));
  b.sigma_f = 0.0;
  CHECK(eix(b) == 1.0);

  EIxInputs c;
  c.sigma_f = 1.0;
  c.constraints = {{0.0, 1.0}};
  c.incumbent = 0.0;
  CHECK(eix(c) == doctest::Approx(0.5 * kPhi0).epsilon(1e-14));

  // The infeasibility branch can be negative.
  a.mu_f = 12.0;
  CHECK(eix(a) < 0.0);

  EIxInputs bad = c;
  bad.sigma_f = -1.0;
  CHECK_THROWS_AS(eix(bad), InvalidArgument);
  bad = c;
  bad.penalty_m = INFINITY;
  CHECK_THROWS_AS(eix(bad), InvalidArgument);
}

TEST_CASE("eix grows linearly in M on the infeasibility branch") {
  EIxInputs in;
  in.mu_f = 0.5;
  in.sigma_f = 0.3;
  in.constraints = {{0.2, 0.5}, {-0.1, 0.4}};
  double prev = -INFINITY;
  for (double m = -5.0; m <= 5.0; m += 0.25) {
    in.penalty_m = m;
    const double v = eix(in);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("eix_gradient matches finite differences on GP surrogates") {
  std::mt19937_64 rng(21);
  const auto models = random_models(rng, 8, 2, 2, 0.1);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  const double h = 1e-5;
  for (int t = 0; t < 100; ++t) {
    Vector x(2);
    x << u(rng), u(rng);
    for (std::optional<double> inc : {std::optional<double>(-0.3), std::optional<double>()}) {
      MomentGradients g;
      const auto in = inputs_at(models, x, inc, 2.0, &g);
      const Vector grad = eix_gradient(in, g);
      for (Eigen::Index k = 0; k < 2; ++k) {
        Vector xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        const double fd = (eix(inputs_at(models, xp, inc, 2.0)) - eix(inputs_at(models, xm, inc, 2.0))) / (2 * h);
        CHECK(std::abs(fd - grad(k)) <= 1e-4 * std::max(1e-3, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("constant constraint moments contribute nothing to the gradient") {
  EIxInputs in;
  in.mu_f = 0.1;
  in.sigma_f = 0.4;
  in.incumbent = 0.2;
  in.constraints = {{-0.3, 0.5}};
  MomentGradients g;
  g.mu_f = Vector::Constant(2, 0.7);
  g.sigma_f = Vector::Constant(2, -0.2);
  g.mu_c = {Vector::Zero(2)};
  g.sigma_c = {Vector::Zero(2)};
  const Vector with = eix_gradient(in, g);
  EIxInputs bare = in;
  bare.constraints.clear();
  MomentGradients bg = g;
  bg.mu_c.clear();
  bg.sigma_c.clear();
  const Vector without = eix_gradient(bare, bg);
  CHECK((with - prob_feasible(-0.3, 0.5) * without).norm() < 1e-15);
}

TEST_CASE("exact observations make every fantasy the data") {
  std::mt19937_64 rng(30);
  const auto models = random_models(rng, 6, 2, 1, 0.0);
  const auto fs = qmc_fantasies(models, Matrix(0, 2), 16, 4, 3.0);
  const auto inc = exact_incumbent(models);
  for (std::size_t k = 0; k < fs.sample_count(); ++k) {
    for (std::size_t m = 0; m < 2; ++m) {
      const Vector& obs = m == 0 ? models.objective.data().means : models.constraints[0].data().means;
      CHECK((fs.metrics[m].values.col(static_cast<Eigen::Index>(k)) - obs).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(fs.incumbents[k].has_value() == inc.has_value());
    if (inc) CHECK(*fs.incumbents[k] == doctest::Approx(*inc).epsilon(1e-9));
  }
}

TEST_CASE("unconstrained incumbents are per-fantasy minima") {
  std::mt19937_64 rng(31);
  const auto models = random_models(rng, 7, 2, 0, 0.3);
  Matrix pending(2, 2);
  pending << 0.3, 0.3, 0.7, 0.1;
  const auto fs = qmc_fantasies(models, pending, 32, 5, 3.0);
  REQUIRE(fs.points.rows() == 9);
  for (std::size_t k = 0; k < fs.sample_count(); ++k) {
    REQUIRE(fs.incumbents[k].has_value());
    const double mn = fs.metrics[0].values.col(static_cast<Eigen::Index>(k)).minCoeff();
    CHECK(*fs.incumbents[k] == doctest::Approx(mn).epsilon(1e-8));
  }
}

TEST_CASE("fraction of fantasies without an incumbent matches the orthant probability") {
  Matrix x(1, 1);
  x << 0.5;
  KernelParams p{Vector::Constant(1, 0.3), 1.0, 0.0};
  Vector y(1), c(1), tau(1);
  y << 0.0;
  c << 0.4;
  tau << 0.8;
  MetricModels models{GPModel(p, NoisyDataset{x, y, tau}), {GPModel(p, NoisyDataset{x, c, tau})}};
  // Posterior of the latent constraint value: N(m, s^2); P(no feasible point) = Phi(m / s).
  const double s2 = 1.0 - 1.0 / (1.0 + 0.64);
  const double m = 0.4 / (1.0 + 0.64);
  const double want = normal_cdf(m / std::sqrt(s2));
  const std::size_t n = 4096;
  const auto fs = qmc_fantasies(models, Matrix(0, 1), n, 8, 3.0);
  double absent = 0.0;
  for (const auto& inc : fs.incumbents) absent += inc.has_value() ? 0.0 : 1.0;
  absent /= static_cast<double>(n);
  const double se = std::sqrt(want * (1.0 - want) / static_cast<double>(n));
  CHECK(std::abs(absent - want) < 3.0 * se);
}

TEST_CASE("NEI vanishes at observed points") {
  std::mt19937_64 rng(40);
  for (int t = 0; t < 20; ++t) {
    const auto models = random_models(rng, 6, 2, t % 3, 0.05 + 0.1 * (t % 4));
    const auto fs = qmc_fantasies(models, Matrix(0, 2), 32, static_cast<std::uint64_t>(t), 3.0);
    const bool all = std::all_of(fs.incumbents.begin(), fs.incumbents.end(),
                                 [](const auto& v) { return v.has_value(); });
    if (!all) continue;
    for (Eigen::Index i = 0; i < fs.points.rows(); ++i) {
      CHECK(nei::nei(fs.points.row(i).transpose(), fs) <= 1e-8);
    }
  }
}

TEST_CASE("NEI equals EIx without noise") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 5; ++t) {
    const auto models = random_models(rng, 7, 2, t % 2 + (t == 4 ? 1 : 0), 0.0);
    const double penalty = penalty_from_scan(models.objective, Bounds::unit_cube(2), 1000, 2.0, 9);
    const auto fs = qmc_fantasies(models, Matrix(0, 2), 8, 3, penalty);
    const auto inc = exact_incumbent(models);
    for (int i = 0; i < 100; ++i) {
      Vector x(2);
      x << u(rng), u(rng);
      CHECK(std::abs(nei::nei(x, fs) - eix(inputs_at(models, x, inc, penalty))) <= 1e-8);
    }
  }
}

TEST_CASE("NEI approaches EIx as the noise vanishes") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto noisy = random_models(rng, 7, 2, 1, 1e-8);
  const auto inc = exact_incumbent(noisy);
  const auto fs = qmc_fantasies(noisy, Matrix(0, 2), 16, 3, 2.5);
  for (int i = 0; i < 100; ++i) {
    Vector x(2);
    x << u(rng), u(rng);
    const double a = nei::nei(x, fs), b = eix(inputs_at(noisy, x, inc, 2.5));
    CHECK(std::abs(a - b) <= 1e-4 * std::max(std::abs(b), 1e-6));
  }
}

TEST_CASE("QMC NEI agrees with a brute-force posterior Monte Carlo oracle") {
  // Three noisy observations, one constraint.
  Matrix x(3, 1);
  x << 0.2, 0.5, 0.8;
  KernelParams p{Vector::Constant(1, 0.3), 1.0, 0.0};
  Vector y(3), c(3), tau(3);
  y << 0.3, -0.2, 0.1;
  c << -0.5, 0.3, -0.1;
  tau << 0.3, 0.2, 0.4;
  MetricModels models{GPModel(p, NoisyDataset{x, y, tau}), {GPModel(p, NoisyDataset{x, c, tau})}};
  const double penalty = 2.0;
  Vector q(1);
  q << 0.35;
  const auto fs = qmc_fantasies(models, Matrix(0, 1), 10000, 12, penalty);
  const double qmc = nei::nei(q, fs);

  // Oracle: joint posterior of the latent values by explicit inverse, then
  // the noiseless conditional at q in closed form for each draw.
  const Matrix k = kernel_matrix(x, x, p);
  const Matrix kinv = k.inverse();
  const Matrix noisy_inv = (k + Matrix(tau.array().square().matrix().asDiagonal())).inverse();
  const Matrix post_cov = k - k * noisy_inv * k;
  const Vector kq = kernel_matrix(x, q.transpose(), p).col(0);
  const Vector wq = kinv * kq;
  const double var_q = std::max(0.0, 1.0 - kq.dot(wq));
  Eigen::LLT<Matrix> llt(post_cov);
  const Matrix l = llt.matrixL();
  const Vector mf = k * noisy_inv * y, mc = k * noisy_inv * c;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> z(0.0, 1.0);
  const int draws = 1000000;
  double sum = 0.0;
  Vector e(3);
  for (int i = 0; i < draws; ++i) {
    for (int j = 0; j < 3; ++j) e(j) = z(rng);
    const Vector f = mf + l * e;
    for (int j = 0; j < 3; ++j) e(j) = z(rng);
    const Vector g = mc + l * e;
    std::optional<double> inc;
    for (int j = 0; j < 3; ++j) {
      if (g(j) <= 0.0 && (!inc || f(j) < *inc)) inc = f(j);
    }
    EIxInputs in;
    in.mu_f = wq.dot(f);
    in.sigma_f = std::sqrt(var_q);
    in.constraints = {{wq.dot(g), std::max(std::sqrt(var_q), kMinConstraintSd)}};
    in.incumbent = inc;
    in.penalty_m = penalty;
    sum += eix(in);
  }
  const double oracle = sum / draws;
  CHECK(std::abs(qmc - oracle) <= 0.01 * std::abs(oracle));
}

TEST_CASE("NEI gradient matches finite differences") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  const double h = 1e-5;
  for (int t = 0; t < 3; ++t) {
    const auto models = random_models(rng, 6, 2, static_cast<std::size_t>(t), 0.2);
    Matrix pending(1, 2);
    pending << 0.5, 0.5;
    const auto fs = qmc_fantasies(models, pending, 16, 6, 2.0);
    for (int i = 0; i < 50; ++i) {
      Vector x(2);
      x << u(rng), u(rng);
      const Vector g = nei_gradient(x, fs);
      for (Eigen::Index k = 0; k < 2; ++k) {
        Vector xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        const double fd = (nei::nei(xp, fs) - nei::nei(xm, fs)) / (2 * h);
        CHECK(std::abs(fd - g(k)) <= 1e-4 * std::max(1e-3, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("single exact fantasy gradient equals the EIx gradient") {
  std::mt19937_64 rng(44);
  const auto models = random_models(rng, 5, 2, 1, 0.0);
  const auto fs = qmc_fantasies(models, Matrix(0, 2), 1, 2, 2.0);
  const auto inc = exact_incumbent(models);
  Vector x(2);
  x << 0.37, 0.61;
  MomentGradients g;
  const auto in = inputs_at(models, x, inc, 2.0, &g);
  CHECK((nei_gradient(x, fs) - eix_gradient(in, g)).norm() < 1e-8);
}

TEST_CASE("mirror-symmetric data gives no gradient across the axis") {
  Matrix x(4, 1);
  x << 0.2, 0.4, 0.6, 0.8;
  Vector y(4), tau = Vector::Zero(4);
  y << 0.5, -0.1, -0.1, 0.5;
  KernelParams p{Vector::Constant(1, 0.2), 1.0, 0.0};
  MetricModels models{GPModel(p, NoisyDataset{x, y, tau}), {}};
  const auto fs = qmc_fantasies(models, Matrix(0, 1), 4, 1, 2.0);
  Vector mid(1);
  mid << 0.5;
  CHECK(std::abs(nei_gradient(mid, fs)(0)) < 1e-10);
}

TEST_CASE("optimize_acquisition finds the interior peak of a 1-d surface") {
  Matrix x(3, 1);
  x << 0.1, 0.45, 0.9;
  Vector y(3), tau = Vector::Zero(3);
  y << 1.0, 0.0, 1.2;
  KernelParams p{Vector::Constant(1, 0.2), 1.0, 0.5};
  MetricModels models{GPModel(p, NoisyDataset{x, y, tau}), {}};
  const auto fs = qmc_fantasies(models, Matrix(0, 1), 1, 1, 3.0);
  AcqOptimizerOptions opt;
  opt.bounds = Bounds::unit_cube(1);
  opt.seed = 3;
  opt.avoid = fs.points;
  const auto best = optimize_acquisition(fs, opt);
  double grid_x = 0.0, grid_v = -1.0;
  for (int i = 0; i <= 10000; ++i) {
    Vector g(1);
    g << i / 10000.0;
    const double v = nei::nei(g, fs);
    if (v > grid_v) grid_v = v, grid_x = g(0);
  }
  CHECK(std::abs(best.x(0) - grid_x) < 1e-3);
  CHECK(best.value >= grid_v - 1e-9);
  // First-order condition at an interior optimum.
  if (best.x(0) > 1e-3 && best.x(0) < 1.0 - 1e-3) CHECK(nei_gradient(best.x, fs).norm() <= 1e-5);
}

TEST_CASE("optimize_acquisition on a flat surface") {
  AcqOptimizerOptions opt;
  opt.bounds = Bounds::unit_cube(2);
  opt.restarts = 4;
  opt.scan_points = 64;
  AcquisitionFn zero = [](const Vector& x, Vector* g) {
    if (g) *g = Vector::Zero(x.size());
    return 0.0;
  };
  const auto best = optimize_acquisition(zero, opt);
  CHECK(best.value == 0.0);
  CHECK(best.x.size() == 2);

  AcquisitionFn broken = [](const Vector& x, Vector* g) {
    if (g) *g = Vector::Zero(x.size());
    return std::nan("");
  };
  CHECK_THROWS_AS(optimize_acquisition(broken, opt), OptimizationFailure);
}

TEST_CASE("more restarts never lower the optimum") {
  std::mt19937_64 rng(45);
  const auto models = random_models(rng, 8, 2, 1, 0.2);
  const auto fs = qmc_fantasies(models, Matrix(0, 2), 16, 2, 2.0);
  AcqOptimizerOptions opt;
  opt.bounds = Bounds::unit_cube(2);
  opt.seed = 11;
  opt.avoid = fs.points;
  double prev = -INFINITY;
  for (std::size_t r : {1, 2, 4, 8, 16}) {
    opt.restarts = r;
    const double v = optimize_acquisition(fs, opt).value;
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("q = 1 batch equals a single optimizer call") {
  std::mt19937_64 rng(46);
  const auto models = random_models(rng, 6, 2, 1, 0.2);
  BatchOptions b;
  b.bounds = Bounds::unit_cube(2);
  b.q = 1;
  b.samples = 16;
  b.restarts = 5;
  b.seed = 99;
  const Matrix batch = generate_batch(models, Matrix(0, 2), b);

  const double penalty = penalty_from_scan(models.objective, b.bounds, b.scan_points, b.penalty_sigma,
                                           batch_penalty_seed(b.seed));
  const auto fs = qmc_fantasies(models, Matrix(0, 2), b.samples, batch_fantasy_seed(b.seed, 0), penalty);
  AcqOptimizerOptions opt;
  opt.bounds = b.bounds;
  opt.restarts = b.restarts;
  opt.seed = batch_optimizer_seed(b.seed, 0);
  opt.avoid = fs.points;
  const auto best = optimize_acquisition(fs, opt);
  CHECK(batch.rows() == 1);
  CHECK(batch.row(0).transpose() == best.x);
}

TEST_CASE("batches do not replicate points") {
  Matrix x(4, 1);
  x << 0.1, 0.3, 0.7, 0.9;
  Vector y(4), tau = Vector::Constant(4, 0.1);
  y << 0.8, 0.1, 0.1, 0.8;
  KernelParams p{Vector::Constant(1, 0.2), 1.0, 0.5};
  MetricModels models{GPModel(p, NoisyDataset{x, y, tau}), {}};
  BatchOptions b;
  b.bounds = Bounds::unit_cube(1);
  b.q = 2;
  b.samples = 16;
  b.restarts = 5;
  const Matrix batch = generate_batch(models, Matrix(0, 1), b);
  REQUIRE(batch.rows() == 2);
  CHECK(std::abs(batch(0, 0) - batch(1, 0)) >= 1e-3);
  CHECK_THROWS_AS(generate_batch(models, Matrix(0, 1), [&] { auto c = b; c.q = 0; return c; }()),
                  InvalidArgument);
}

TEST_CASE("a pending point at the argmax pushes the next candidate away") {
  const auto setup = make_qmc_setup(get_problem("gramacy"), 0, 5, 0);
  BatchOptions b;
  b.bounds = Bounds::unit_cube(2);
  b.samples = 32;
  b.seed = 5;
  const Matrix first = generate_batch(setup.models, Matrix(0, 2), b);
  const Matrix second = generate_batch(setup.models, first, b);
  CHECK((second.row(0) - first.row(0)).norm() >= 0.05);
}

TEST_CASE("plug-in and NEI batches coincide without noise") {
  std::mt19937_64 rng(47);
  const auto models = random_models(rng, 6, 2, 1, 0.0);
  BatchOptions b;
  b.bounds = Bounds::unit_cube(2);
  b.q = 3;
  b.samples = 8;
  b.restarts = 4;
  b.seed = 12;
  CHECK(generate_batch(models, Matrix(0, 2), b) == heuristic_ei_batch(models, Matrix(0, 2), b));
}

TEST_CASE("plug-in incumbents use posterior means") {
  Matrix x(1, 2);
  x << 0.4, 0.6;
  Vector y(1), c(1), tau(1);
  y << 1.5;
  c << -2.0;
  tau << 0.5;
  KernelParams p{Vector::Constant(2, 0.3), 1.0, 0.0};
  MetricModels models{GPModel(p, NoisyDataset{x, y, tau}), {GPModel(p, NoisyDataset{x, c, tau})}};
  const auto fs = qmc_fantasies(models, Matrix(0, 2), 8, 1, 4.0, FantasyMode::plug_in);
  const double mu = models.objective.predict(x.row(0).transpose()).mean;
  for (const auto& inc : fs.incumbents) {
    REQUIRE(inc.has_value());
    CHECK(*inc == doctest::Approx(mu).epsilon(1e-10));
  }

  // Every observation infeasible in expectation: the penalty branch applies.
  c << 2.0;
  MetricModels infeasible{GPModel(p, NoisyDataset{x, y, tau}), {GPModel(p, NoisyDataset{x, c, tau})}};
  const auto gs = qmc_fantasies(infeasible, Matrix(0, 2), 8, 1, 4.0, FantasyMode::plug_in);
  for (const auto& inc : gs.incumbents) CHECK_FALSE(inc.has_value());
  Vector q(2);
  q << 0.1, 0.1;
  const auto fit = gs.model(0, 0).predict(q);
  const auto cfit = gs.model(1, 0).predict(q);
  const double expect = (4.0 - fit.mean) * prob_feasible(cfit.mean, std::sqrt(cfit.variance));
  CHECK(nei::nei(q, gs) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("fantasy preparation validates its inputs") {
  std::mt19937_64 rng(48);
  const auto models = random_models(rng, 4, 2, 1, 0.1);
  SobolGenerator wrong(3, 1);
  CHECK_THROWS_AS(prepare_fantasies(models, Matrix(0, 2), 4, wrong, 1.0), InvalidArgument);
  SobolGenerator right(fantasy_dimension(models, 0), 1);
  CHECK_THROWS_AS(prepare_fantasies(models, Matrix(0, 2), 0, right, 1.0), InvalidArgument);
  CHECK_THROWS_AS(prepare_fantasies(models, Matrix(0, 2), 4, right, INFINITY), InvalidArgument);
}
