#pragma once

#include <cmath>

namespace arhmm {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

inline double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// Standard normal CDF via erfc; relative accuracy holds deep into both tails.
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

// Upper tail P(Z > z), kept separate so 1 - cdf cancellation never occurs.
inline double norm_sf(double z) { return 0.5 * std::erfc(z * 0.70710678118654752440); }

inline double norm_logpdf(double z) { return -0.5 * (kLog2Pi + z * z); }

// Difference Phi(b) - Phi(a) for a <= b without cancellation on either side.
inline double norm_cdf_diff(double a, double b) {
  if (a > b) return -norm_cdf_diff(b, a);
  if (a + b > 0.0) return norm_sf(a) - norm_sf(b);
  return norm_cdf(b) - norm_cdf(a);
}

}  // namespace arhmm
