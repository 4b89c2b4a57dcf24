#pragma once

namespace nei {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kInvSqrt2 = 0.707106781186547524400844362105;

double normal_pdf(double z);

/// Standard normal CDF, accurate in the tails through erfc.
double normal_cdf(double z);

/// Standard normal quantile (Wichura's AS241, ~1e-16 relative accuracy).
/// Throws DomainError unless 0 < u < 1.
double inv_normal_cdf(double u);

}  // namespace nei
