#include <algorithm>
#include <cmath>
#include <limits>

#include "arhmm/gaussian.hpp"
#include "arhmm/hedge.hpp"

namespace arhmm::hedge {

// Exponentially tilted truncated Gaussian moments
//   M(theta)   = E[e^{theta Z} 1{a < Z <= b}],  Z ~ N(mu, sigma^2)
//   M'(theta)  = E[Z e^{theta Z} 1{...}],  M''(theta) = E[Z^2 e^{theta Z} 1{...}]
// computed from shifted-CDF differences; kappa(x) = (x - mu)/sigma - theta*sigma.
TruncGaussMoments truncated_gaussian_moments(double theta, double mu, double sigma, double a,
                                             double b) {
  if (!(sigma > 0.0)) throw validation_error("truncated moments need sigma > 0");
  if (!(a <= b)) throw validation_error("truncated moments need a <= b");
  TruncGaussMoments out{0.0, 0.0, 0.0};
  if (a == b) return out;

  auto kappa = [&](double x) {
    if (std::isinf(x)) return x;
    return (x - mu) / sigma - theta * sigma;
  };
  double ka = kappa(a), kb = kappa(b);
  auto zphi = [](double z) { return std::isinf(z) ? 0.0 : z * norm_pdf(z); };
  double dc = norm_cdf_diff(ka, kb);        // Phi(kb) - Phi(ka) >= 0
  double dp = norm_pdf(kb) - norm_pdf(ka);  // phi(kb) - phi(ka)
  double dn2 = -zphi(kb) + zphi(ka);        // N''(kb) - N''(ka), N'' = -z phi(z)
  double logpref = theta * mu + 0.5 * theta * theta * sigma * sigma;
  double mts = mu + theta * sigma * sigma;

  if (logpref < 700.0) {
    double pref = std::exp(logpref);
    out.m = pref * dc;
    out.m1 = mts * out.m - sigma * pref * dp;
    out.m2 = sigma * sigma * out.m + mts * out.m1 + sigma * pref * (sigma * dn2 - mts * dp);
  } else {
    // huge tilt prefactor: assemble each term in log space
    auto scaled = [&](double v) {
      if (v == 0.0) return 0.0;
      double lv = logpref + std::log(std::abs(v));
      if (lv > 709.0) throw numeric_error("tilted truncated moment overflows");
      return std::copysign(std::exp(lv), v);
    };
    out.m = scaled(dc);
    out.m1 = mts * out.m - sigma * scaled(dp);
    out.m2 = sigma * sigma * out.m + mts * out.m1 + scaled(sigma * (sigma * dn2 - mts * dp));
  }
  return out;
}

LinCoeffs linear_cell(double x0, double x1, double f0, double f1) {
  if (!(x1 > x0)) throw validation_error("linear_cell needs x1 > x0");
  LinCoeffs c;
  c.b = (f1 - f0) / (x1 - x0);
  c.a = f0 - x0 * c.b;
  return c;
}

// Coefficients of a + b1 s + b2 z + b3 s z matching the four corner values
// of the bilinear interpolant on [s0,s1] x [z0,z1].
BilinCoeffs bilinear_cell(double s0, double s1, double z0, double z1, double f00, double f10,
                          double f01, double f11) {
  if (!(s1 > s0) || !(z1 > z0)) throw validation_error("bilinear_cell needs a proper cell");
  double ds = s1 - s0, dz = z1 - z0;
  double b10 = f10 - f00;
  double b01 = f01 - f00;
  double b11 = f11 - f10 - f01 + f00;
  BilinCoeffs c;
  c.b3 = b11 / (ds * dz);
  c.b1 = b10 / ds - c.b3 * z0;
  c.b2 = b01 / dz - c.b3 * s0;
  c.a = f00 - (b10 / ds) * s0 - (b01 / dz) * z0 + c.b3 * s0 * z0;
  return c;
}

Payoff Payoff::call(double strike) {
  if (!(strike >= 0.0)) throw validation_error("call strike must be >= 0");
  Payoff p;
  p.kind = OptionKind::call;
  p.strike = strike;
  return p;
}

Payoff Payoff::put(double strike) {
  if (!(strike >= 0.0)) throw validation_error("put strike must be >= 0");
  Payoff p;
  p.kind = OptionKind::put;
  p.strike = strike;
  return p;
}

double Payoff::raw(double s) const {
  if (custom) return custom(s);
  if (kind == OptionKind::call) return std::max(0.0, s - strike);
  return std::max(0.0, strike - s);
}

double Payoff::discounted(double s_disc, double beta_n) const {
  if (custom) return beta_n * custom(s_disc / beta_n);
  if (kind == OptionKind::call) return std::max(0.0, s_disc - beta_n * strike);
  return std::max(0.0, beta_n * strike - s_disc);
}

std::vector<double> constant_rates(int n_steps, double r) {
  if (n_steps < 1) throw validation_error("n_steps must be positive");
  return std::vector<double>(static_cast<std::size_t>(n_steps), r);
}

}  // namespace arhmm::hedge
