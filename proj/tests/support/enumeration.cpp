#include "enumeration.hpp"

#include <cmath>
#include <stdexcept>

namespace testsup {

namespace {

// Plain-formula Gaussian density, deliberately via inverse/determinant rather
// than the library's cached Cholesky.
double dens(const arhmm::ArhmmModel& m, int j, const arhmm::Vec& y_prev,
            const arhmm::Vec& y) {
  const arhmm::RegimeParams& r = m.regime(j);
  arhmm::Vec mean = r.mu + r.phi * (y_prev - r.mu);
  arhmm::Mat inv = r.cov.inverse();
  double det = r.cov.determinant();
  arhmm::Vec e = y - mean;
  double quad = e.dot(inv * e);
  double norm = std::pow(2.0 * M_PI, -0.5 * m.dim()) / std::sqrt(det);
  return norm * std::exp(-0.5 * quad);
}

}  // namespace

EnumerationResult enumerate_posteriors(const arhmm::ArhmmModel& m, const arhmm::Mat& y) {
  const int l = m.num_regimes();
  const long n = y.rows();
  if (n < 2) throw std::invalid_argument("enumerate_posteriors needs n >= 2");

  // Per-step conditional densities f[t](j) = f_j(y_t | y_{t-1}), t = 1..n-1.
  arhmm::Mat f(n - 1, l);
  for (long t = 1; t < n; ++t)
    for (int j = 0; j < l; ++j)
      f(t - 1, j) = dens(m, j, y.row(t - 1).transpose(), y.row(t).transpose());

  // Odometer over regime paths (tau_0, ..., tau_{n-1}).
  std::vector<int> tau(static_cast<size_t>(n), 0);
  EnumerationResult out;
  out.eta = arhmm::Mat::Zero(n - 1, l);
  out.lambda = arhmm::Mat::Zero(n, l);
  out.lambda2.assign(static_cast<size_t>(n - 1), arhmm::Mat::Zero(l, l));

  // prefix(t-1, i) accumulates the weight of (tau_0..tau_t, y_1..y_t) with
  // tau_t = i; every prefix is hit once per suffix assignment, a constant
  // multiplicity per t that cancels in the normalization.  Full-path weights
  // feed lambda, Lambda and the total.
  arhmm::Mat prefix = arhmm::Mat::Zero(n - 1, l);
  long double total = 0.0L;

  while (true) {
    long double w = static_cast<long double>(m.eta0()(tau[0]));
    for (long t = 1; t < n && w > 0.0L; ++t) {
      w *= static_cast<long double>(m.q()(tau[t - 1], tau[t]));
      if (w == 0.0L) break;
      w *= static_cast<long double>(f(t - 1, tau[t]));
      prefix(t - 1, tau[t]) += static_cast<double>(w);
    }
    if (w > 0.0L) {
      total += w;
      double wd = static_cast<double>(w);
      for (long t = 0; t < n; ++t) out.lambda(t, tau[t]) += wd;
      for (long t = 0; t + 1 < n; ++t) out.lambda2[t](tau[t], tau[t + 1]) += wd;
    }

    // advance the odometer
    long pos = n - 1;
    while (pos >= 0 && ++tau[pos] == l) tau[pos--] = 0;
    if (pos < 0) break;
  }

  if (!(total > 0.0L)) throw std::runtime_error("all regime paths have zero weight");

  for (long t = 0; t < n - 1; ++t) {
    out.eta.row(t) = prefix.row(t) / prefix.row(t).sum();
    out.lambda2[t] /= static_cast<double>(total);
  }
  out.lambda /= static_cast<double>(total);
  out.log_lik = static_cast<double>(std::log(total));
  return out;
}

}  // namespace testsup
