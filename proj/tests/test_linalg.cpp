#include "doctest.h"
#include "noisyei/errors.hpp"
#include "noisyei/linalg.hpp"

using namespace nei;

TEST_CASE("jittered_cholesky uses no jitter on well-conditioned matrices") {
  Matrix a(3, 3);
  a << 4, 2, 0.4, 2, 3, 0.5, 0.4, 0.5, 2;
  const auto f = jittered_cholesky(a, 1.0);
  CHECK(f.jitter == 0.0);
  CHECK((f.lower * f.lower.transpose() - a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((f.lower.diagonal().array() > 0).all());
  CHECK(f.lower.isLowerTriangular());
}

TEST_CASE("jittered_cholesky repairs a singular matrix") {
  Matrix a = Matrix::Ones(3, 3);  // rank one
  const auto f = jittered_cholesky(a, 1.0);
  CHECK(f.jitter >= kJitterStart);
  CHECK(f.jitter <= kJitterMax);
  Matrix repaired = a;
  repaired.diagonal().array() += f.jitter;
  CHECK((f.lower * f.lower.transpose() - repaired).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("jittered_cholesky gives up on indefinite matrices") {
  Matrix a(2, 2);
  a << 1, 0, 0, -1;
  CHECK_THROWS_AS(jittered_cholesky(a, 1.0), ConditioningError);
}

TEST_CASE("psd_factor handles semidefinite input") {
  Matrix zero = Matrix::Zero(3, 3);
  CHECK(psd_factor(zero, 1e-12).isZero());

  Matrix a(3, 3);
  a << 1, 1, 0, 1, 1, 0, 0, 0, 2;  // singular but PSD
  const Matrix l = psd_factor(a, 1e-12);
  CHECK((l * l.transpose() - a).cwiseAbs().maxCoeff() < 1e-12);

  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(psd_factor(bad, 1e-12), ConditioningError);
}

TEST_CASE("triangular solves") {
  Matrix l(2, 2);
  l << 2, 0, 1, 3;
  Matrix b(2, 1);
  b << 4, 11;
  Matrix x = b;
  solve_lower_in_place(l, x);
  CHECK((l * x - b).norm() < 1e-14);
  Matrix y = b;
  solve_upper_transposed_in_place(l, y);
  CHECK((l.transpose() * y - b).norm() < 1e-14);
}
