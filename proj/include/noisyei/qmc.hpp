#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "noisyei/linalg.hpp"

namespace nei {

/// A stream of points in the open unit cube.
class PointSource {
 public:
  virtual ~PointSource() = default;
  virtual std::size_t dimension() const = 0;
  /// Next `count` points, one per row.
  virtual Matrix draw(std::size_t count) = 0;
};

/// Sobol sequence on Joe-Kuo direction numbers, optionally scrambled.
///
/// Scrambling is a nested-uniform (Owen-style) scramble realized with a
/// hashed permutation of the bit-reversed index digits, followed by a
/// random digital shift; both are keyed per coordinate by `scramble_seed`.
/// Every emitted coordinate is offset by 2^-33 so that it lies strictly
/// inside (0, 1).
class SobolGenerator final : public PointSource {
 public:
  static constexpr int kBits = 32;

  /// `scramble_seed == std::nullopt` yields the plain (unscrambled) sequence.
  SobolGenerator(std::size_t dimension, std::optional<std::uint64_t> scramble_seed,
                 std::size_t skip = 0);

  static std::size_t max_dimension();

  std::size_t dimension() const override { return dimension_; }
  std::optional<std::uint64_t> scramble_seed() const { return seed_; }
  std::size_t skip() const { return skip_; }
  /// Index of the next point in the underlying (unskipped) sequence.
  std::uint64_t position() const { return index_; }

  Matrix draw(std::size_t count) override;

  /// Raw 32-bit digits of the next point (scrambled if configured).
  std::vector<std::uint32_t> next_digits();

 private:
  void advance();

  std::size_t dimension_;
  std::optional<std::uint64_t> seed_;
  std::size_t skip_;
  std::vector<std::uint32_t> directions_;  // dimension_ x kBits, row-major
  std::vector<std::uint32_t> state_;
  std::vector<std::uint32_t> scramble_keys_;
  std::vector<std::uint32_t> shifts_;
  std::uint64_t index_ = 0;
};

/// Ordinary Monte Carlo uniforms; the drop-in replacement that turns the
/// quasi-Monte Carlo estimators into plain Monte Carlo.
class UniformRandomSource final : public PointSource {
 public:
  UniformRandomSource(std::size_t dimension, std::uint64_t seed);
  std::size_t dimension() const override { return dimension_; }
  Matrix draw(std::size_t count) override;

 private:
  std::size_t dimension_;
  std::mt19937_64 rng_;
};

/// Convenience wrapper around SobolGenerator::draw.
Matrix sobol_points(SobolGenerator& gen, std::size_t count);

/// Draws from N(mean, A A^T) obtained as A * inv_normal_cdf(t) + mean.
struct MVNSampleSet {
  Matrix samples;       // N x dim, one draw per row
  Matrix normals;       // N x dim, the transformed unit-cube points
  Vector source_mean;
  Matrix source_factor; // lower-triangular A
};

/// Samples N(mean, cov) through the unit-cube transform with the given point
/// source. `cov` must be symmetric positive semi-definite; it is factored
/// with `psd_factor` at a tolerance of 1e-12 times its largest diagonal entry.
MVNSampleSet mvn_qmc(const Vector& mean, const Matrix& cov, std::size_t count,
                     PointSource& source);

/// Same transform with a precomputed factor.
MVNSampleSet mvn_from_factor(const Vector& mean, const Matrix& factor, std::size_t count,
                             PointSource& source);

/// 64-bit mixing function used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace nei
