#include "arhmm/stats.hpp"

#include <algorithm>
#include <cmath>

#include "arhmm/types.hpp"

namespace arhmm {

double quantile(std::vector<double> data, double p) {
  if (data.empty()) throw validation_error("quantile of an empty sample");
  if (p < 0.0 || p > 1.0) throw validation_error("quantile level must be in [0, 1]");
  std::sort(data.begin(), data.end());
  double h = (static_cast<double>(data.size()) - 1.0) * p;
  std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= data.size()) return data.back();
  double frac = h - static_cast<double>(lo);
  return data[lo] + frac * (data[lo + 1] - data[lo]);
}

SummaryStats summarize(const std::vector<double>& data) {
  if (data.empty()) throw validation_error("summary of an empty sample");
  SummaryStats s;
  s.count = data.size();
  double n = static_cast<double>(data.size());

  double sum = 0.0, sum_sq = 0.0;
  for (double x : data) {
    sum += x;
    sum_sq += x * x;
  }
  s.mean = sum / n;
  s.rmse = std::sqrt(sum_sq / n);

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : data) {
    double c = x - s.mean;
    double c2 = c * c;
    m2 += c2;
    m3 += c2 * c;
    m4 += c2 * c2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.volatility = std::sqrt(m2);
  s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  s.kurtosis = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;

  std::vector<double> sorted(data);
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  auto interp = [&](double p) {
    double h = (n - 1.0) * p;
    std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
  };
  s.median = interp(0.5);
  s.var_1 = interp(0.01);
  s.var_99 = interp(0.99);
  return s;
}

}  // namespace arhmm
