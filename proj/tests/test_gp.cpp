#include <cmath>
#include <random>

#include "doctest.h"
#include "noisyei/errors.hpp"
#include "noisyei/gp.hpp"

using namespace nei;

namespace {

// Independent Matérn 5/2 and dense-formula GP posterior (explicit inverse).
double oracle_kernel(const Vector& a, const Vector& b, const KernelParams& p) {
  long double r2 = 0.0L;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const long double t = (a(k) - b(k)) / p.lengthscales(k);
    r2 += t * t;
  }
  const long double r = std::sqrt(r2);
  const long double s5 = std::sqrt(5.0L);
  return static_cast<double>(p.signal_variance * (1.0L + s5 * r + 5.0L / 3.0L * r2) * std::exp(-s5 * r));
}

Matrix oracle_gram(const Matrix& a, const Matrix& b, const KernelParams& p) {
  Matrix k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = oracle_kernel(a.row(i).transpose(), b.row(j).transpose(), p);
  }
  return k;
}

MVNPosterior oracle_posterior(const NoisyDataset& data, const KernelParams& p, const Matrix& q) {
  Matrix kxx = oracle_gram(data.points, data.points, p);
  kxx.diagonal() += data.noise_sds.array().square().matrix();
  const Matrix inv = kxx.inverse();
  const Matrix kxq = oracle_gram(data.points, q, p);
  MVNPosterior out;
  out.mean = (kxq.transpose() * inv * (data.means.array() - p.mean_constant).matrix()).array() + p.mean_constant;
  out.cov = oracle_gram(q, q, p) - kxq.transpose() * inv * kxq;
  return out;
}

struct Fixture {
  NoisyDataset data;
  KernelParams params;
};

Fixture random_fixture(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double noise) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Fixture f;
  f.data.points.resize(n, d);
  f.data.means.resize(n);
  f.data.noise_sds.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) f.data.points(i, k) = u(rng);
    f.data.means(i) = std::sin(3.0 * f.data.points.row(i).sum()) + 0.3 * u(rng);
    f.data.noise_sds(i) = noise * u(rng);
  }
  f.params.lengthscales = Vector::Constant(d, 0.4) + 0.3 * Vector::Random(d).cwiseAbs();
  f.params.signal_variance = 0.5 + u(rng);
  f.params.mean_constant = 0.2;
  return f;
}

}  // namespace

TEST_CASE("matern52 closed-form values") {
  KernelParams p{Vector::Constant(1, 1.0), 1.0, 0.0};
  Vector a(1), b(1);
  a << 0.3;
  CHECK(matern52(a, a, p) == 1.0);
  b << 1.3;
  // Frozen from the long-double oracle: (1 + sqrt 5 + 5/3) exp(-sqrt 5).
  CHECK(oracle_kernel(a, b, p) == doctest::Approx(0.523994108831820311).epsilon(1e-15));
  CHECK(matern52(a, b, p) == doctest::Approx(0.523994108831820311).epsilon(1e-14));
  CHECK(matern52(a, b, p) == matern52(b, a, p));
  b << 100.3;
  CHECK(matern52(a, b, p) < 1e-30);

  KernelParams p3{Vector::Constant(3, 0.7), 2.5, 0.0};
  Vector x(3), y(3);
  x << 0.1, 0.2, 0.3;
  CHECK(matern52(x, x, p3) == 2.5);
  CHECK_THROWS_AS(matern52(a, x, p3), InvalidArgument);
}

TEST_CASE("posterior equals the dense-formula oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 1 + trial % 10;
    const Eigen::Index d = 1 + trial % 3;
    const double noise = trial % 2 ? 0.3 : 0.05;
    auto f = random_fixture(rng, n, d, noise);
    GPModel model(f.params, f.data);
    REQUIRE(model.jitter() == 0.0);
    const Matrix q = Matrix::Random(5, d).cwiseAbs();
    const auto got = model.posterior(q);
    const auto want = oracle_posterior(f.data, f.params, q);
    CHECK((got.mean - want.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((got.cov - want.cov).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((got.cov - got.cov.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const auto p = model.predict(q.row(i).transpose());
      CHECK(p.mean == doctest::Approx(want.mean(i)).epsilon(1e-10));
      CHECK(p.variance >= 0.0);
      CHECK(p.variance <= f.params.signal_variance + 1e-6);
    }
  }
}

TEST_CASE("n=3, d=1 example against the oracle") {
  NoisyDataset data{Matrix(3, 1), Vector(3), Vector(3)};
  data.points << 0.1, 0.5, 0.9;
  data.means << 1.0, -0.5, 0.25;
  data.noise_sds << 0.1, 0.2, 0.05;
  KernelParams p{Vector::Constant(1, 0.3), 1.5, 0.1};
  GPModel model(p, data);
  Matrix q(4, 1);
  q << 0.0, 0.3, 0.5, 1.0;
  const auto got = model.posterior(q);
  const auto want = oracle_posterior(data, p, q);
  CHECK((got.mean - want.mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((got.cov - want.cov).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("noiseless interpolation and prior reversion") {
  std::mt19937_64 rng(5);
  auto f = random_fixture(rng, 8, 2, 0.0);
  GPModel model(f.params, f.data);
  const auto post = model.posterior(f.data.points);
  for (Eigen::Index i = 0; i < 8; ++i) {
    CHECK(std::abs(post.mean(i) - f.data.means(i)) <= 1e-6 * std::max(1.0, std::abs(f.data.means(i))));
    CHECK(post.cov(i, i) <= 1e-8 * f.params.signal_variance);
  }
  Vector far = Vector::Constant(2, 20.0 * f.params.lengthscales.maxCoeff() + 2.0);
  const auto p = model.predict(far);
  CHECK(std::abs(p.mean - f.params.mean_constant) < 1e-6);
  CHECK(std::abs(p.variance - f.params.signal_variance) < 1e-6);
}

TEST_CASE("posterior_with_training agrees with the standard joint posterior") {
  std::mt19937_64 rng(8);
  auto f = random_fixture(rng, 6, 2, 0.4);
  GPModel model(f.params, f.data);
  const Matrix extra = Matrix::Random(3, 2).cwiseAbs();
  Matrix all(9, 2);
  all << f.data.points, extra;
  const auto joint = model.posterior_with_training(extra);
  const auto want = oracle_posterior(f.data, f.params, all);
  CHECK((joint.mean - want.mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((joint.cov - want.cov).cwiseAbs().maxCoeff() < 1e-8);

  // Exact observations have exactly zero posterior spread.
  auto g = random_fixture(rng, 5, 2, 0.0);
  GPModel exact(g.params, g.data);
  const auto z = exact.posterior_with_training(Matrix(0, 2));
  CHECK(z.mean == g.data.means);
  CHECK(z.cov.isZero(0.0));
}

TEST_CASE("condition_noiseless") {
  KernelParams p{Vector::Constant(2, 0.3), 1.0, 0.0};
  Matrix one(1, 2);
  one << 0.4, 0.6;
  Vector v(1);
  v << 2.5;
  const auto m1 = condition_noiseless(p, one, v);
  CHECK(m1.predict(one.row(0).transpose()).mean == doctest::Approx(2.5).epsilon(1e-12));

  std::mt19937_64 rng(9);
  auto f = random_fixture(rng, 6, 2, 0.0);
  GPModel base(f.params, f.data);
  const auto post = base.posterior(f.data.points);
  const auto cond = condition_noiseless(f.params, f.data.points, post.mean);
  const Matrix q = Matrix::Random(7, 2).cwiseAbs();
  const auto a = base.posterior(q), b = cond.posterior(q);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-8);
  const auto held = oracle_posterior(cond.data(), f.params, q);
  CHECK((b.mean - held.mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((b.cov - held.cov).cwiseAbs().maxCoeff() < 1e-8);

  CHECK_THROWS_AS(condition_noiseless(p, one, Vector::Zero(2)), InvalidArgument);
}

TEST_CASE("duplicate noiseless points never crash") {
  NoisyDataset data{Matrix(2, 1), Vector(2), Vector::Zero(2)};
  data.points << 0.5, 0.5;
  data.means << 1.0, 2.0;
  KernelParams p{Vector::Constant(1, 0.3), 1.0, 0.0};
  try {
    GPModel model(p, data);
    CHECK(model.jitter() > 0.0);
    CHECK(std::isfinite(model.predict(Vector::Constant(1, 0.2)).mean));
  } catch (const Error&) {
    CHECK(true);
  }
  try {
    const auto fitted = fit_map(data, Bounds::unit_cube(1));
    CHECK(fitted.signal_variance > 0.0);
  } catch (const Error&) {
    CHECK(true);
  }
}

TEST_CASE("predict_with_gradient matches finite differences") {
  std::mt19937_64 rng(10);
  auto f = random_fixture(rng, 9, 3, 0.2);
  GPModel model(f.params, f.data);
  const double h = 1e-5;
  for (int t = 0; t < 20; ++t) {
    const Vector x = Vector::Random(3).cwiseAbs();
    const auto g = model.predict_with_gradient(x);
    for (Eigen::Index k = 0; k < 3; ++k) {
      Vector xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      const auto pp = model.predict(xp), pm = model.predict(xm);
      const double dm = (pp.mean - pm.mean) / (2 * h);
      const double dv = (pp.variance - pm.variance) / (2 * h);
      CHECK(std::abs(dm - g.mean_grad(k)) <= 1e-4 * std::max(1.0, std::abs(dm)));
      CHECK(std::abs(dv - g.variance_grad(k)) <= 1e-4 * std::max(1.0, std::abs(dv)));
    }
  }
}

TEST_CASE("log marginal likelihood gradient matches finite differences") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10; ++t) {
    auto f = random_fixture(rng, 12, 2, 0.3);
    auto eval = [&](const Vector& theta) {
      KernelParams p{theta.head(2).array().exp(), std::exp(theta(2)), f.params.mean_constant};
      return log_marginal_likelihood(f.data, p);
    };
    Vector theta(3);
    theta << std::log(f.params.lengthscales(0)), std::log(f.params.lengthscales(1)), std::log(f.params.signal_variance);
    const auto base = eval(theta);
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < 3; ++k) {
      Vector tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      const double fd = (eval(tp).value - eval(tm).value) / (2 * h);
      CHECK(std::abs(fd - base.gradient(k)) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }

    FitOptions opts;
    auto map_eval = [&](const Vector& th) {
      KernelParams p{th.head(2).array().exp(), std::exp(th(2)), f.params.mean_constant};
      return log_map_objective(f.data, p, 1.0, opts);
    };
    const auto mb = map_eval(theta);
    for (Eigen::Index k = 0; k < 3; ++k) {
      Vector tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      const double fd = (map_eval(tp).value - map_eval(tm).value) / (2 * h);
      CHECK(std::abs(fd - mb.gradient(k)) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("fit_map recovers the lengthscale of GP-sampled data") {
  // n = 60 draws from a GP with lengthscale 0.2, variance 1, noise 0.01.
  const Eigen::Index n = 60;
  KernelParams truth{Vector::Constant(1, 0.2), 1.0, 0.0};
  Matrix x(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  Matrix k = oracle_gram(x, x, truth);
  k.diagonal().array() += 1e-10;
  const Matrix l = k.llt().matrixL();
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Vector e(n);
    for (Eigen::Index i = 0; i < n; ++i) e(i) = z(rng);
    Vector y = l * e;
    for (Eigen::Index i = 0; i < n; ++i) y(i) += 0.01 * z(rng);
    NoisyDataset data{x, y, Vector::Constant(n, 0.01)};
    FitOptions opts;
    opts.seed = seed;
    const auto fitted = fit_map(data, Bounds::unit_cube(1), opts);
    const double ell = fitted.lengthscales(0);
    if (ell > 0.1 && ell < 0.4) ++recovered;
  }
  CHECK(recovered >= 4);
}

TEST_CASE("fit_map edge cases") {
  NoisyDataset flat{Matrix(4, 1), Vector::Constant(4, 3.0), Vector::Zero(4)};
  flat.points << 0.1, 0.4, 0.6, 0.9;
  const auto fitted = fit_map(flat, Bounds::unit_cube(1));
  FitOptions defaults;
  CHECK(fitted.signal_variance < 1.0);
  CHECK(fitted.signal_variance >= defaults.min_signal_variance);
  CHECK(fitted.mean_constant == doctest::Approx(3.0));

  NoisyDataset one{Matrix::Zero(1, 1), Vector::Zero(1), Vector::Zero(1)};
  CHECK_THROWS_AS(fit_map(one, Bounds::unit_cube(1)), InsufficientData);

  NoisyDataset bad = flat;
  bad.means(2) = std::nan("");
  CHECK_THROWS_AS(fit_map(bad, Bounds::unit_cube(1)), InvalidArgument);

  NoisyDataset neg = flat;
  neg.noise_sds(0) = -1.0;
  CHECK_THROWS_AS(fit_map(neg, Bounds::unit_cube(1)), InvalidArgument);
}

TEST_CASE("fit_map is deterministic and reports native units") {
  std::mt19937_64 rng(12);
  auto f = random_fixture(rng, 10, 2, 0.1);
  // Same data on a stretched box: lengthscales scale with the box.
  NoisyDataset stretched = f.data;
  stretched.points.col(0) *= 10.0;
  Bounds unit = Bounds::unit_cube(2);
  Bounds wide{Vector::Zero(2), Vector(2)};
  wide.upper << 10.0, 1.0;
  const auto a = fit_map(f.data, unit), b = fit_map(f.data, unit), c = fit_map(stretched, wide);
  CHECK(a.lengthscales == b.lengthscales);
  CHECK(a.signal_variance == b.signal_variance);
  CHECK(c.lengthscales(0) == doctest::Approx(10.0 * a.lengthscales(0)).epsilon(1e-6));
  CHECK(c.lengthscales(1) == doctest::Approx(a.lengthscales(1)).epsilon(1e-6));
}

TEST_CASE("argument validation") {
  KernelParams p{Vector::Constant(2, 0.3), 1.0, 0.0};
  NoisyDataset data{Matrix::Random(3, 2), Vector::Zero(3), Vector::Zero(3)};
  GPModel model(p, data);
  CHECK_THROWS_AS(model.posterior(Matrix(0, 2)), InvalidArgument);
  CHECK_THROWS_AS(model.predict(Vector::Zero(3)), InvalidArgument);
  KernelParams bad{Vector::Constant(2, -1.0), 1.0, 0.0};
  CHECK_THROWS_AS(GPModel(bad, data), InvalidArgument);
  NoisyDataset ragged{Matrix::Random(3, 2), Vector::Zero(2), Vector::Zero(3)};
  CHECK_THROWS_AS(GPModel(p, ragged), InvalidArgument);
}
