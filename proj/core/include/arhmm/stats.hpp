#pragma once

#include <cstddef>
#include <vector>

namespace arhmm {

// Descriptive summary used by the hedging-error and trading-P&L reports.
// volatility is the population standard deviation, so
// rmse^2 == mean^2 + volatility^2 holds exactly; kurtosis is the raw moment
// ratio m4/m2^2 (3 for a normal), not excess.
struct SummaryStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double volatility = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
  double min = 0.0;
  double var_1 = 0.0;   // 1% empirical quantile
  double var_99 = 0.0;  // 99% empirical quantile
  double max = 0.0;
  double rmse = 0.0;    // sqrt(mean of squares)
};

// Empirical quantile with linear interpolation between order statistics
// (h = (n-1) p convention); data must be nonempty.
double quantile(std::vector<double> data, double p);

SummaryStats summarize(const std::vector<double>& data);

}  // namespace arhmm
