#pragma once

#include <cstdint>

#include "arhmm/model.hpp"

namespace testsup {

// Three-regime daily equity-return models used across the tests: annualized
// percent parameters mapped to daily log-return scale by
//   mu_daily = mu_ann / (100 * 252),  sigma_daily = sigma_ann / (100 * sqrt(252)).
arhmm::ArhmmModel table2_ar1();  // autoregressive variant
arhmm::ArhmmModel table2_ar0();  // memoryless (phi = 0) variant

// Black-Scholes reference prices in "total volatility" form: vol_total is the
// standard deviation of log S_n / S_0 and disc the discount factor to
// maturity.  Written against erfc directly, independent of the library.
double bs_call(double s, double k, double vol_total, double disc);
double bs_put(double s, double k, double vol_total, double disc);
double bs_call_delta(double s, double k, double vol_total, double disc);

// Random stable model for property tests: spectral radius of each phi below
// 0.8, covariances SPD, Q strictly positive rows, eta0 uniform.  Scale
// loosely matches daily returns when scale = 0.01.
arhmm::ArhmmModel make_random_model(int l, int d, std::uint64_t seed, double scale = 0.01);

// Relative gap |a - b| / max(|a|, |b|, floor).
double rel_gap(double a, double b, double floor = 1e-300);

}  // namespace testsup
