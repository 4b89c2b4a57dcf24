#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace nei::detail {

inline constexpr std::size_t kSobolTableDimensions = 2048;
inline constexpr std::size_t kSobolMaxDegree = 15;

/// One row of the Joe-Kuo direction-number table. `polynomial` carries the
/// leading and trailing coefficient bits; `degree` is its degree.
struct SobolDirection {
  std::uint32_t polynomial;
  std::uint32_t degree;
  std::array<std::uint32_t, kSobolMaxDegree> initial;
};

extern const std::array<SobolDirection, kSobolTableDimensions> kSobolDirections;

}  // namespace nei::detail
