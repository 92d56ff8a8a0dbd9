#include "arhmm/gof.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <vector>

#include "arhmm/filter.hpp"
#include "arhmm/gaussian.hpp"
#include "arhmm/parallel.hpp"
#include "arhmm/rng.hpp"

namespace arhmm {

// Rosenblatt transform of the one-step conditional law under the filter.
// Coordinate 1 mixes the regime marginals with the predictive weights
// W_{t-1}; coordinate 2 (d == 2) conditions each regime on the first
// coordinate and reweights by the regime's first-margin density.
Mat rosenblatt_transform(const ArhmmModel& m, const Mat& y) {
  int d = m.dim();
  int l = m.num_regimes();
  if (d > 2) throw validation_error("rosenblatt_transform supports d <= 2");
  if (y.cols() != d) throw validation_error("series dimension mismatch");
  long n = y.rows();
  if (n < 2) throw validation_error("rosenblatt_transform needs at least 2 observations");

  FilterResult fr = filter_path(m, y);
  Mat u(n - 1, d);

  // Per-regime first-margin and conditional pieces, independent of t.
  std::vector<double> sd1(l), beta(l), sd2c(l);
  for (int i = 0; i < l; ++i) {
    const Mat& c = m.regime(i).cov;
    double v1 = c(0, 0);
    if (v1 <= 0.0) throw numeric_error("degenerate first margin in regime covariance");
    sd1[i] = std::sqrt(v1);
    if (d == 2) {
      double v2 = c(1, 1);
      double rho2 = c(0, 1) * c(0, 1) / (v1 * v2);
      if (!(rho2 < 1.0))
        throw numeric_error("singular regime covariance in Rosenblatt conditional");
      beta[i] = c(0, 1) / v1;
      sd2c[i] = std::sqrt(v2 * (1.0 - rho2));
    }
  }

  Vec w(l), logf1(l);
  Mat mu_t(l, d);
  for (long t = 1; t < n; ++t) {
    w = m.q().transpose() * fr.states[t - 1].eta;
    Vec yp = y.row(t - 1).transpose();
    double u1 = 0.0;
    for (int i = 0; i < l; ++i) {
      mu_t.row(i) = m.cond_mean(i, yp).transpose();
      u1 += w(i) * norm_cdf((y(t, 0) - mu_t(i, 0)) / sd1[i]);
    }
    u(t - 1, 0) = u1;
    if (d == 2) {
      // weights w_i f_{i,1}(y1) with a shared max-log scale
      double mx = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < l; ++i) {
        double z = (y(t, 0) - mu_t(i, 0)) / sd1[i];
        logf1(i) = -0.5 * z * z - std::log(sd1[i]);
        if (w(i) > 0.0) mx = std::max(mx, logf1(i) + std::log(w(i)));
      }
      if (!std::isfinite(mx)) throw numeric_error("vanishing first-margin density");
      double num = 0.0, den = 0.0;
      for (int i = 0; i < l; ++i) {
        if (w(i) <= 0.0) continue;
        double wi = std::exp(logf1(i) + std::log(w(i)) - mx);
        // cond mean of coord 2 given coord 1: mu_2|1 = m_2 + beta (y1 - m_1)
        double m2 = mu_t(i, 1) + beta[i] * (y(t, 0) - mu_t(i, 0));
        den += wi;
        num += wi * norm_cdf((y(t, 1) - m2) / sd2c[i]);
      }
      if (den <= 0.0) throw numeric_error("vanishing first-margin density");
      u(t - 1, 1) = num / den;
    }
  }
  return u;
}

// Closed-form Cramer-von Mises statistic for a sample in [0,1]^d against
// the independence copula (uniform law).
double cvm_statistic(const Mat& u) {
  long n = u.rows();
  int d = static_cast<int>(u.cols());
  if (n < 1 || d < 1) throw validation_error("cvm_statistic needs a nonempty sample");
  for (long t = 0; t < n; ++t)
    for (int q = 0; q < d; ++q)
      if (!(u(t, q) >= 0.0 && u(t, q) <= 1.0))
        throw validation_error("cvm_statistic sample outside [0,1]");

  double cross = 0.0;
  for (long t = 0; t < n; ++t) {
    for (long k = 0; k < n; ++k) {
      double p = 1.0;
      for (int q = 0; q < d; ++q) p *= 1.0 - std::max(u(t, q), u(k, q));
      cross += p;
    }
  }
  double mid = 0.0;
  for (long t = 0; t < n; ++t) {
    double p = 1.0;
    for (int q = 0; q < d; ++q) p *= 1.0 - u(t, q) * u(t, q);
    mid += p;
  }
  double nn = static_cast<double>(n);
  return cross / nn - mid / std::pow(2.0, d - 1) + nn / std::pow(3.0, d);
}

namespace {

// One bootstrap replicate: simulate from the fitted model with the same
// length, refit with the same policy, return the refit CvM statistic.
double replicate_statistic(const ArhmmModel& fitted, const Vec& start_mean, const Vec& nu,
                           long n, int l, const GofConfig& cfg, std::uint64_t k) {
  std::mt19937_64 gen = substream(cfg.seed, stream_tag::kBootstrap, k);
  int tau0 = sample_regime(nu, gen);
  SimulatedPath path =
      simulate_path(fitted, start_mean, tau0, static_cast<int>(cfg.burn_in + n), gen);
  Mat yk = path.y.bottomRows(n);

  EmConfig em = cfg.em;
  em.seed = mix64(mix64(cfg.seed ^ 0x9e3779b97f4a7c15ull) ^ (k + 1));
  EmResult fit = em_fit(yk, l, em);
  return cvm_statistic(rosenblatt_transform(fit.model, yk));
}

}  // namespace

GofResult parametric_bootstrap(const Mat& y, int l, const GofConfig& cfg, ArhmmModel* fitted) {
  if (cfg.n_boot < 1) throw validation_error("n_boot must be positive");
  if (y.cols() > 2) throw validation_error("goodness-of-fit supports d <= 2");

  EmResult fit = em_fit(y, l, cfg.em);
  Mat u = rosenblatt_transform(fit.model, y);
  double s_n = cvm_statistic(u);

  StationaryMoments sm = stationary_moments(fit.model);
  long n = y.rows();

  std::vector<double> stats(cfg.n_boot);
  std::vector<char> ok(cfg.n_boot, 0);
  parallel_for(cfg.n_boot, cfg.threads, [&](int k) {
    try {
      stats[k] = replicate_statistic(fit.model, sm.mean, sm.nu, n, l, cfg,
                                     static_cast<std::uint64_t>(k));
      ok[k] = 1;
    } catch (const numeric_error&) {
      ok[k] = 0;  // dropped replicate
    }
  });

  int used = 0, exceed = 0;
  for (int k = 0; k < cfg.n_boot; ++k) {
    if (!ok[k]) continue;
    ++used;
    if (stats[k] > s_n) ++exceed;
  }
  int dropped = cfg.n_boot - used;
  if (static_cast<double>(dropped) > cfg.max_drop_frac * cfg.n_boot)
    throw numeric_error("parametric bootstrap dropped too many replicates");

  GofResult r;
  r.s_n = s_n;
  r.p_value = used > 0 ? static_cast<double>(exceed) / used : 0.0;
  r.n_boot_used = used;
  r.n_dropped = dropped;
  r.log_lik = fit.log_lik;
  r.em_iterations = fit.iterations;
  if (fitted) *fitted = fit.model;
  return r;
}

RegimeSelection select_num_regimes(const Mat& y, int l_max, const GofConfig& cfg) {
  if (l_max < 1) throw validation_error("l_max must be positive");
  RegimeSelection sel;
  for (int l = 1; l <= l_max; ++l) {
    sel.per_l.push_back(parametric_bootstrap(y, l, cfg));
    if (sel.per_l.back().p_value > 0.05) {
      sel.selected_l = l;
      break;
    }
  }
  return sel;
}

}  // namespace arhmm
