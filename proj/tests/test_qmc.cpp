#include <cmath>
#include <set>

#include "doctest.h"
#include "noisyei/errors.hpp"
#include "noisyei/normal.hpp"
#include "noisyei/qmc.hpp"

using namespace nei;

namespace {

constexpr double kShift = 1.0 / 8589934592.0;  // 2^-33, half an output ulp

// Counts of points per dyadic interval of width 2^-k in coordinate j.
std::vector<int> dyadic_counts(const Matrix& pts, Eigen::Index j, int k) {
  std::vector<int> counts(std::size_t{1} << k, 0);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    counts[static_cast<std::size_t>(std::floor(pts(i, j) * std::ldexp(1.0, k)))]++;
  }
  return counts;
}

}  // namespace

TEST_CASE("unscrambled Sobol reproduces the reference sequence") {
  SobolGenerator gen(1, std::nullopt, 1);
  const Matrix p = sobol_points(gen, 3);
  CHECK(p(0, 0) - kShift == 0.5);
  CHECK(p(1, 0) - kShift == 0.75);
  CHECK(p(2, 0) - kShift == 0.25);

  // Standard 2-d sequence: (0,0), (.5,.5), (.75,.25), (.25,.75).
  SobolGenerator two(2, std::nullopt);
  const Matrix q = two.draw(4);
  Matrix expected(4, 2);
  expected << 0, 0, 0.5, 0.5, 0.75, 0.25, 0.25, 0.75;
  CHECK((q.array() - kShift).matrix() == expected);
}

TEST_CASE("points stay strictly inside the unit cube") {
  for (std::optional<std::uint64_t> seed : {std::optional<std::uint64_t>{}, std::optional<std::uint64_t>{7}}) {
    SobolGenerator gen(5, seed);
    const Matrix p = gen.draw(1024);
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.maxCoeff() < 1.0);
  }
}

TEST_CASE("one-dimensional projections are (0,k)-nets") {
  for (std::optional<std::uint64_t> seed :
       {std::optional<std::uint64_t>{}, std::optional<std::uint64_t>{1}, std::optional<std::uint64_t>{99}}) {
    for (int d = 1; d <= 6; ++d) {
      for (int k = 0; k <= 10; ++k) {
        SobolGenerator gen(static_cast<std::size_t>(d), seed);
        const Matrix p = gen.draw(std::size_t{1} << k);
        for (Eigen::Index j = 0; j < d; ++j) {
          for (int c : dyadic_counts(p, j, k)) REQUIRE(c == 1);
        }
      }
    }
  }
}

TEST_CASE("scrambling changes points but keeps equidistribution") {
  SobolGenerator a(2, 1), b(2, 2);
  const Matrix pa = a.draw(64), pb = b.draw(64);
  CHECK((pa - pb).cwiseAbs().maxCoeff() > 1e-3);
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(dyadic_counts(pa, j, 6) == dyadic_counts(pb, j, 6));
}

TEST_CASE("generators are deterministic and resumable") {
  SobolGenerator a(4, 5), b(4, 5);
  const Matrix first = a.draw(10);
  CHECK(first == b.draw(10));
  const Matrix rest = a.draw(6);
  SobolGenerator c(4, 5);
  const Matrix all = c.draw(16);
  CHECK(all.topRows(10) == first);
  CHECK(all.bottomRows(6) == rest);

  SobolGenerator skipped(4, 5, 10);
  CHECK(skipped.draw(6) == rest);

  UniformRandomSource u1(3, 9), u2(3, 9);
  CHECK(u1.draw(5) == u2.draw(5));
}

TEST_CASE("dimension limits and argument errors") {
  CHECK(SobolGenerator::max_dimension() >= 200);
  CHECK_NOTHROW(SobolGenerator(SobolGenerator::max_dimension(), 1));
  CHECK_THROWS_AS(SobolGenerator(SobolGenerator::max_dimension() + 1, 1), UnsupportedDimension);
  CHECK_THROWS_AS(SobolGenerator(0, 1), InvalidArgument);
  SobolGenerator gen(2, 1);
  CHECK_THROWS_AS(sobol_points(gen, 0), InvalidArgument);
}

TEST_CASE("mvn_qmc moments") {
  SUBCASE("zero covariance returns the mean") {
    Vector mean(3);
    mean << 1, -2, 3;
    SobolGenerator gen(3, 4);
    const auto s = mvn_qmc(mean, Matrix::Zero(3, 3), 16, gen);
    for (Eigen::Index i = 0; i < s.samples.rows(); ++i) CHECK(s.samples.row(i) == mean.transpose());
  }
  SUBCASE("identity covariance") {
    Vector mean(2);
    mean << 0.3, -0.7;
    SobolGenerator gen(2, 11);
    const auto s = mvn_qmc(mean, Matrix::Identity(2, 2), 1024, gen);
    const Vector m = s.samples.colwise().mean().transpose();
    CHECK((m - mean).cwiseAbs().maxCoeff() < 0.01);
    const Matrix centered = s.samples.rowwise() - m.transpose();
    const Matrix cov = centered.transpose() * centered / 1023.0;
    CHECK((cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.05);
  }
  SUBCASE("diagonal covariance") {
    Matrix cov = Matrix::Zero(2, 2);
    cov(0, 0) = 4;
    cov(1, 1) = 9;
    SobolGenerator gen(2, 12);
    const auto s = mvn_qmc(Vector::Zero(2), cov, 1024, gen);
    const Matrix centered = s.samples.rowwise() - s.samples.colwise().mean();
    const Vector var = centered.array().square().colwise().sum() / 1023.0;
    CHECK(var(0) == doctest::Approx(4.0).epsilon(0.05));
    CHECK(var(1) == doctest::Approx(9.0).epsilon(0.05));
  }
}

TEST_CASE("mvn_qmc inverse transform recovers the normal scores") {
  Matrix cov(3, 3);
  cov << 2.0, 0.6, 0.2, 0.6, 1.0, 0.3, 0.2, 0.3, 0.5;
  Vector mean(3);
  mean << 1, 2, 3;
  SobolGenerator gen(3, 21);
  const auto s = mvn_qmc(mean, cov, 64, gen);
  SobolGenerator replay(3, 21);
  const Matrix t = replay.draw(64);
  for (Eigen::Index i = 0; i < 64; ++i) {
    const Vector z = s.source_factor.triangularView<Eigen::Lower>().solve((s.samples.row(i).transpose() - mean));
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(z(j) - inv_normal_cdf(t(i, j))) < 1e-8);
  }
  CHECK((s.source_factor * s.source_factor.transpose() - cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mvn_qmc rejects malformed covariances") {
  SobolGenerator gen(2, 1);
  Matrix asym(2, 2);
  asym << 1, 0.5, 0.1, 1;
  CHECK_THROWS_AS(mvn_qmc(Vector::Zero(2), asym, 4, gen), InvalidArgument);
  CHECK_THROWS_AS(mvn_qmc(Vector::Zero(3), Matrix::Identity(2, 2), 4, gen), InvalidArgument);
}

TEST_CASE("QMC beats MC on a smooth Gaussian integrand") {
  // E[exp(0.1 * sum z_j)] over z ~ N(0, I_8) equals exp(8 * 0.005).
  const int d = 8;
  const double exact = std::exp(d * 0.005);
  for (std::size_t n : {32, 64, 128}) {
    double qmc_err = 0.0, mc_err = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      SobolGenerator q(d, s);
      UniformRandomSource r(d, s);
      auto estimate = [&](const Matrix& u) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < u.rows(); ++i) {
          double z = 0.0;
          for (Eigen::Index j = 0; j < d; ++j) z += 0.1 * inv_normal_cdf(u(i, j));
          total += std::exp(z);
        }
        return total / static_cast<double>(u.rows());
      };
      qmc_err += std::abs(estimate(q.draw(n)) - exact);
      mc_err += std::abs(estimate(r.draw(n)) - exact);
    }
    CHECK(qmc_err <= mc_err);
  }
}

TEST_CASE("mix_seed separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 100; ++s) seen.insert(mix_seed(42, s));
  CHECK(seen.size() == 100);
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
}
