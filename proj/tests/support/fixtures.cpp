#include "fixtures.hpp"

#include <cmath>
#include <random>

namespace testsup {

namespace {

arhmm::ArhmmModel daily_model(const double mu_ann[3], const double sig_ann[3],
                              const double phi[3], const arhmm::Mat& q) {
  std::vector<arhmm::RegimeParams> regs(3);
  for (int i = 0; i < 3; ++i) {
    double mu = mu_ann[i] / (100.0 * 252.0);
    double sd = sig_ann[i] / (100.0 * std::sqrt(252.0));
    regs[i].mu = arhmm::Vec::Constant(1, mu);
    regs[i].phi = arhmm::Mat::Constant(1, 1, phi[i]);
    regs[i].cov = arhmm::Mat::Constant(1, 1, sd * sd);
  }
  return arhmm::ArhmmModel(std::move(regs), q, arhmm::Vec::Constant(3, 1.0 / 3.0));
}

}  // namespace

arhmm::ArhmmModel table2_ar1() {
  const double mu[3] = {34.89, 6.99, -21.60};
  const double sig[3] = {3.34, 11.03, 18.95};
  const double phi[3] = {-0.14, 0.03, -0.19};
  arhmm::Mat q(3, 3);
  q << 0.00, 0.96, 0.04,
       0.32, 0.68, 0.00,
       0.00, 0.04, 0.96;
  return daily_model(mu, sig, phi, q);
}

arhmm::ArhmmModel table2_ar0() {
  const double mu[3] = {31.41, 13.88, -17.23};
  const double sig[3] = {2.18, 10.09, 18.02};
  const double phi[3] = {0.0, 0.0, 0.0};
  arhmm::Mat q(3, 3);
  q << 0.00, 0.92, 0.08,
       0.17, 0.83, 0.00,
       0.00, 0.03, 0.97;
  return daily_model(mu, sig, phi, q);
}

namespace {
double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
}  // namespace

double bs_call(double s, double k, double vol_total, double disc) {
  double kd = k * disc;
  if (vol_total <= 0.0) return std::max(0.0, s - kd);
  double d1 = std::log(s / kd) / vol_total + 0.5 * vol_total;
  double d2 = d1 - vol_total;
  return s * std_normal_cdf(d1) - kd * std_normal_cdf(d2);
}

double bs_put(double s, double k, double vol_total, double disc) {
  double kd = k * disc;
  if (vol_total <= 0.0) return std::max(0.0, kd - s);
  double d1 = std::log(s / kd) / vol_total + 0.5 * vol_total;
  double d2 = d1 - vol_total;
  return kd * std_normal_cdf(-d2) - s * std_normal_cdf(-d1);
}

double bs_call_delta(double s, double k, double vol_total, double disc) {
  double kd = k * disc;
  if (vol_total <= 0.0) return s > kd ? 1.0 : 0.0;
  double d1 = std::log(s / kd) / vol_total + 0.5 * vol_total;
  return std_normal_cdf(d1);
}

arhmm::ArhmmModel make_random_model(int l, int d, std::uint64_t seed, double scale) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<arhmm::RegimeParams> regs(static_cast<size_t>(l));
  for (auto& r : regs) {
    r.mu = arhmm::Vec::NullaryExpr(d, [&](long) { return scale * (unif(gen) - 0.5); });
    arhmm::Mat raw = arhmm::Mat::NullaryExpr(d, d, [&](long, long) { return gauss(gen); });
    // rescale to a random spectral radius in (0.05, 0.8)
    double rho = std::sqrt((raw * raw.transpose()).eigenvalues().cwiseAbs().maxCoeff());
    double target = 0.05 + 0.75 * unif(gen);
    r.phi = raw * (rho > 0 ? target / rho : 0.0);
    arhmm::Mat half = arhmm::Mat::NullaryExpr(d, d, [&](long, long) { return gauss(gen); });
    r.cov = scale * scale *
            (half * half.transpose() + 0.25 * arhmm::Mat::Identity(d, d));
  }

  arhmm::Mat q(l, l);
  for (int i = 0; i < l; ++i) {
    double row = 0.0;
    for (int j = 0; j < l; ++j) {
      q(i, j) = 0.05 + unif(gen);
      row += q(i, j);
    }
    q.row(i) /= row;
  }
  arhmm::Vec eta0 = arhmm::Vec::Constant(l, 1.0 / l);
  return arhmm::ArhmmModel(std::move(regs), std::move(q), std::move(eta0));
}

double rel_gap(double a, double b, double floor) {
  double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

}  // namespace testsup
