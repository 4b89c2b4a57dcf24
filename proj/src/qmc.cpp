#include "noisyei/qmc.hpp"

#include <bit>
#include <sstream>

#include "noisyei/errors.hpp"
#include "noisyei/normal.hpp"
#include "noisyei/sobol_directions.hpp"

namespace nei {
namespace {

constexpr double kTwoPow32 = 4294967296.0;

std::uint32_t reverse_bits(std::uint32_t x) {
  x = ((x >> 1) & 0x55555555u) | ((x & 0x55555555u) << 1);
  x = ((x >> 2) & 0x33333333u) | ((x & 0x33333333u) << 2);
  x = ((x >> 4) & 0x0F0F0F0Fu) | ((x & 0x0F0F0F0Fu) << 4);
  x = ((x >> 8) & 0x00FF00FFu) | ((x & 0x00FF00FFu) << 8);
  return (x >> 16) | (x << 16);
}

// Hash-based permutation of the bit-reversed digits (Burley 2020). Each
// output bit depends only on the same and lower input bits, which after the
// reversal is exactly a nested uniform scramble of the leading digits.
std::uint32_t nested_scramble(std::uint32_t x, std::uint32_t key) {
  x = reverse_bits(x);
  x ^= x * 0x3d20adeau;
  x += key;
  x *= (key >> 16) | 1u;
  x ^= x * 0x05526c56u;
  x ^= x * 0x53a22864u;
  return reverse_bits(x);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t SobolGenerator::max_dimension() { return detail::kSobolTableDimensions; }

SobolGenerator::SobolGenerator(std::size_t dimension, std::optional<std::uint64_t> scramble_seed,
                               std::size_t skip)
    : dimension_(dimension), seed_(scramble_seed), skip_(skip) {
  if (dimension == 0) throw InvalidArgument("SobolGenerator: dimension must be positive");
  if (dimension > max_dimension()) {
    std::ostringstream msg;
    msg << "SobolGenerator: dimension " << dimension << " exceeds the direction-number table ("
        << max_dimension() << ")";
    throw UnsupportedDimension(msg.str());
  }
  directions_.assign(dimension * kBits, 0u);
  for (std::size_t d = 0; d < dimension; ++d) {
    std::uint32_t* v = &directions_[d * kBits];
    const auto& row = detail::kSobolDirections[d];
    if (d == 0) {
      for (int j = 0; j < kBits; ++j) v[j] = 1u;
    } else {
      const int degree = static_cast<int>(row.degree);
      for (int j = 0; j < degree; ++j) v[j] = row.initial[static_cast<std::size_t>(j)];
      for (int j = degree; j < kBits; ++j) {
        std::uint32_t next = v[j - degree];
        std::uint32_t pow2 = 1u;
        for (int k = 0; k < degree; ++k) {
          pow2 <<= 1;
          if ((row.polynomial >> (degree - 1 - k)) & 1u) next ^= pow2 * v[j - k - 1];
        }
        v[j] = next;
      }
    }
    for (int j = 0; j < kBits; ++j) v[j] <<= (kBits - 1 - j);
  }
  state_.assign(dimension, 0u);
  if (seed_) {
    scramble_keys_.resize(dimension);
    shifts_.resize(dimension);
    for (std::size_t d = 0; d < dimension; ++d) {
      const std::uint64_t h = mix_seed(*seed_, d);
      scramble_keys_[d] = static_cast<std::uint32_t>(h);
      shifts_[d] = static_cast<std::uint32_t>(h >> 32);
    }
  }
  for (std::size_t i = 0; i < skip_; ++i) advance();
}

void SobolGenerator::advance() {
  // Gray-code ordering: point i+1 flips the direction at the lowest zero bit of i.
  const int c = std::countr_one(index_);
  if (c >= kBits) throw UnsupportedDimension("SobolGenerator: sequence exhausted (2^32 points)");
  const std::uint32_t* v = directions_.data();
  for (std::size_t d = 0; d < dimension_; ++d) state_[d] ^= v[d * kBits + static_cast<std::size_t>(c)];
  ++index_;
}

std::vector<std::uint32_t> SobolGenerator::next_digits() {
  std::vector<std::uint32_t> out(state_);
  if (seed_) {
    for (std::size_t d = 0; d < dimension_; ++d) {
      out[d] = nested_scramble(out[d], scramble_keys_[d]) ^ shifts_[d];
    }
  }
  advance();
  return out;
}

Matrix SobolGenerator::draw(std::size_t count) {
  Matrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dimension_));
  for (std::size_t i = 0; i < count; ++i) {
    const auto digits = next_digits();
    for (std::size_t d = 0; d < dimension_; ++d) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          (static_cast<double>(digits[d]) + 0.5) / kTwoPow32;
    }
  }
  return out;
}

Matrix sobol_points(SobolGenerator& gen, std::size_t count) {
  if (count == 0) throw InvalidArgument("sobol_points: count must be at least 1");
  return gen.draw(count);
}

UniformRandomSource::UniformRandomSource(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), rng_(seed) {
  if (dimension == 0) throw InvalidArgument("UniformRandomSource: dimension must be positive");
}

Matrix UniformRandomSource::draw(std::size_t count) {
  Matrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dimension_));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index d = 0; d < out.cols(); ++d) {
      // 53 random bits, centered in their cell so 0 and 1 never occur
      out(i, d) = (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
    }
  }
  return out;
}

MVNSampleSet mvn_from_factor(const Vector& mean, const Matrix& factor, std::size_t count,
                             PointSource& source) {
  const Eigen::Index dim = mean.size();
  if (factor.rows() != dim || factor.cols() != dim) {
    throw InvalidArgument("mvn_qmc: factor dimensions do not match the mean");
  }
  if (count == 0) throw InvalidArgument("mvn_qmc: sample count must be at least 1");
  if (source.dimension() != static_cast<std::size_t>(dim)) {
    throw InvalidArgument("mvn_qmc: point source dimension does not match the mean");
  }
  MVNSampleSet out;
  out.normals = source.draw(count);
  for (Eigen::Index i = 0; i < out.normals.rows(); ++i) {
    for (Eigen::Index d = 0; d < dim; ++d) out.normals(i, d) = inv_normal_cdf(out.normals(i, d));
  }
  out.samples = out.normals * factor.transpose();
  out.samples.rowwise() += mean.transpose();
  out.source_mean = mean;
  out.source_factor = factor;
  return out;
}

MVNSampleSet mvn_qmc(const Vector& mean, const Matrix& cov, std::size_t count,
                     PointSource& source) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw InvalidArgument("mvn_qmc: covariance dimensions do not match the mean");
  }
  if (!cov.isApprox(cov.transpose(), 1e-10) && cov.norm() > 0.0) {
    throw InvalidArgument("mvn_qmc: covariance is not symmetric");
  }
  const double scale = cov.size() > 0 ? cov.diagonal().maxCoeff() : 0.0;
  return mvn_from_factor(mean, psd_factor(cov, 1e-12 * std::max(scale, 0.0)), count, source);
}

}  // namespace nei
