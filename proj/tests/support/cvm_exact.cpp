#include "cvm_exact.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace testsup {

double cvm_by_rectangles(const arhmm::Mat& u) {
  const long n = u.rows();
  const int d = static_cast<int>(u.cols());
  if (n < 1 || d < 1) throw std::invalid_argument("cvm_by_rectangles: empty sample");

  std::vector<std::vector<double>> breaks(d);
  for (int j = 0; j < d; ++j) {
    std::vector<double>& b = breaks[j];
    b.push_back(0.0);
    for (long t = 0; t < n; ++t) b.push_back(u(t, j));
    b.push_back(1.0);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
  }

  std::vector<int> cell(d, 0);
  long double acc = 0.0L;
  while (true) {
    long double vol = 1.0L, lin = 1.0L, sq = 1.0L;
    for (int j = 0; j < d; ++j) {
      double a = breaks[j][cell[j]], b = breaks[j][cell[j] + 1];
      vol *= b - a;
      lin *= 0.5 * (b * b - a * a);
      sq *= (b * b * b - a * a * a) / 3.0;
    }
    long count = 0;
    for (long t = 0; t < n; ++t) {
      bool in = true;
      for (int j = 0; j < d && in; ++j) in = u(t, j) <= breaks[j][cell[j]];
      count += in;
    }
    long double f = static_cast<long double>(count) / n;
    acc += f * f * vol - 2.0L * f * lin + sq;

    int pos = d - 1;
    while (pos >= 0 && ++cell[pos] == static_cast<int>(breaks[pos].size()) - 1)
      cell[pos--] = 0;
    if (pos < 0) break;
  }
  return static_cast<double>(n * acc);
}

}  // namespace testsup
