#include "arhmm/estimate.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>

#include "arhmm/rng.hpp"

namespace arhmm {

namespace {

double spectral_radius(const Mat& phi) {
  if (phi.rows() == 1) return std::abs(phi(0, 0));
  Eigen::EigenSolver<Mat> es(phi, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

SmoothedQuantities e_step(const ArhmmModel& m, const Mat& y) {
  const int l = m.num_regimes();
  const Eigen::Index n = y.rows();
  FilterResult fwd = filter_path(m, y);  // validates n >= 2 and dimensions

  SmoothedQuantities sq;
  sq.log_lik = fwd.log_lik;
  sq.lambda.resize(n, l);
  sq.eta_bar.resize(n, l);
  sq.big_lambda.resize(n - 1);

  // Backward variables, renormalized each step: scales cancel in every ratio
  // below as long as numerator and denominator share the same step's scale.
  Vec ebar = Vec::Constant(l, 1.0 / l);
  sq.eta_bar.row(n - 1) = ebar.transpose();
  sq.lambda.row(n - 1) = fwd.states[n - 1].eta.transpose();

  Vec f(l), logf(l), u(l);
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    const Vec& eta_t = fwd.states[t].eta;
    for (int j = 0; j < l; ++j)
      logf[j] = m.log_cond_density(j, y.row(t).transpose(), y.row(t + 1).transpose());
    double mf = logf.maxCoeff();  // common factor, cancels in all ratios
    for (int j = 0; j < l; ++j) f[j] = std::exp(logf[j] - mf);

    for (int i = 0; i < l; ++i) {
      double s = 0.0;
      for (int j = 0; j < l; ++j) s += m.q()(i, j) * ebar[j] * f[j];
      u[i] = s;
    }
    double denom = eta_t.dot(u);
    if (!(denom > 0.0) || !std::isfinite(denom))
      throw numeric_error("smoother underflowed at step " + std::to_string(t));

    Mat& lam2 = sq.big_lambda[t];
    lam2.resize(l, l);
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j)
        lam2(i, j) = eta_t[i] * m.q()(i, j) * ebar[j] * f[j] / denom;
    sq.lambda.row(t) = (eta_t.cwiseProduct(u) / denom).transpose();

    ebar = u / u.sum();
    sq.eta_bar.row(t) = ebar.transpose();
  }
  return sq;
}

ArhmmModel m_step(const ArhmmModel& prev, const Mat& y, const SmoothedQuantities& sq,
                  bool fix_phi_zero) {
  const int l = prev.num_regimes();
  const int d = prev.dim();
  const Eigen::Index n = y.rows();
  if (sq.lambda.rows() != n || sq.lambda.cols() != l)
    throw validation_error("smoothed quantities do not match the series/model");

  // Transition matrix: expected counts over the n-1 transitions.
  Mat q(l, l);
  for (int i = 0; i < l; ++i) {
    double denom = 0.0;
    for (Eigen::Index t = 0; t + 1 < n; ++t) denom += sq.lambda(t, i);
    if (denom <= 1e-12)
      throw numeric_error("regime " + std::to_string(i) +
                          " received no posterior weight (degenerate fit)");
    for (int j = 0; j < l; ++j) {
      double num = 0.0;
      for (Eigen::Index t = 0; t + 1 < n; ++t) num += sq.big_lambda[t](i, j);
      q(i, j) = num / denom;
    }
    q.row(i) /= q.row(i).sum();  // identity holds exactly; kill rounding
  }

  std::vector<RegimeParams> regimes(l);
  for (int i = 0; i < l; ++i) {
    // Emission weights cover t = 1..n-1 (the factors with a density term).
    double wsum = 0.0;
    for (Eigen::Index t = 1; t < n; ++t) wsum += sq.lambda(t, i);
    if (wsum <= 1e-12)
      throw numeric_error("regime " + std::to_string(i) +
                          " received no emission weight (degenerate fit)");

    Vec ybar = Vec::Zero(d), yund = Vec::Zero(d);
    for (Eigen::Index t = 1; t < n; ++t) {
      double w = sq.lambda(t, i) / wsum;
      ybar += w * y.row(t).transpose();
      yund += w * y.row(t - 1).transpose();
    }
    Mat sxx = Mat::Zero(d, d), sxy = Mat::Zero(d, d), syy = Mat::Zero(d, d);
    for (Eigen::Index t = 1; t < n; ++t) {
      double w = sq.lambda(t, i) / wsum;
      Vec cy = y.row(t).transpose() - ybar;
      Vec cx = y.row(t - 1).transpose() - yund;
      sxx += w * cx * cx.transpose();
      sxy += w * cy * cx.transpose();
      syy += w * cy * cy.transpose();
    }

    RegimeParams r;
    if (fix_phi_zero) {
      r.phi = Mat::Zero(d, d);
      r.mu = ybar;
      r.cov = syy;
    } else {
      Eigen::FullPivLU<Mat> lu(sxx);
      lu.setThreshold(1e-13);
      if (!lu.isInvertible())
        throw numeric_error("regime " + std::to_string(i) +
                            ": regressor Gram matrix is singular");
      // phi = Sxy Sxx^{-1}; solve on the transposed system.
      r.phi = lu.solve(sxy.transpose()).transpose();
      double rho = spectral_radius(r.phi);
      if (rho >= 1.0) r.phi *= 0.99 / rho;  // project back into the stable region
      Mat imphi = Mat::Identity(d, d) - r.phi;
      r.mu = imphi.colPivHouseholderQr().solve(ybar - r.phi * yund);
      r.cov = syy - r.phi * sxy.transpose() - sxy * r.phi.transpose() +
              r.phi * sxx * r.phi.transpose();
    }
    r.cov = 0.5 * (r.cov + r.cov.transpose());
    Eigen::LLT<Mat> llt(r.cov);
    if (llt.info() != Eigen::Success || r.cov.diagonal().minCoeff() <= 0.0)
      throw numeric_error("regime " + std::to_string(i) +
                          ": residual covariance is not positive definite");
    regimes[i] = std::move(r);
  }
  return ArhmmModel(std::move(regimes), std::move(q), prev.eta0());
}

namespace {

// Volatility-bucket initial values: rank observations by distance from the
// sample mean and cut into l equal groups, so buckets are ordered by spread.
ArhmmModel initial_model(const Mat& y, int l, std::uint64_t seed, int restart) {
  const Eigen::Index n = y.rows();
  const int d = static_cast<int>(y.cols());
  Vec mean = y.colwise().mean().transpose();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::vector<double> score(n);
  for (Eigen::Index t = 0; t < n; ++t)
    score[t] = (y.row(t).transpose() - mean).norm();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return score[a] < score[b]; });

  double total_var = 0.0;
  for (Eigen::Index t = 0; t < n; ++t)
    total_var += (y.row(t).transpose() - mean).squaredNorm();
  total_var /= std::max<Eigen::Index>(1, n) * d;
  double ridge = std::max(1e-12, 1e-4 * total_var);

  std::mt19937_64 gen = substream(seed, stream_tag::kEmInit, restart);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);

  std::vector<RegimeParams> regimes(l);
  for (int i = 0; i < l; ++i) {
    Eigen::Index lo = n * i / l, hi = n * (i + 1) / l;
    if (hi <= lo) hi = lo + 1;
    Vec mu = Vec::Zero(d);
    for (Eigen::Index t = lo; t < hi; ++t) mu += y.row(order[t]).transpose();
    mu /= double(hi - lo);
    Mat cov = Mat::Zero(d, d);
    for (Eigen::Index t = lo; t < hi; ++t) {
      Vec c = y.row(order[t]).transpose() - mu;
      cov += c * c.transpose();
    }
    cov /= double(hi - lo);
    cov += ridge * Mat::Identity(d, d);
    if (restart > 0) {
      for (int k = 0; k < d; ++k) mu[k] += 0.5 * std::sqrt(cov(k, k)) * normal(gen);
      cov *= std::exp(unif(gen));
    }
    regimes[i] = RegimeParams{mu, Mat::Zero(d, d), cov};
  }
  Mat q;
  if (l == 1) {
    q = Mat::Ones(1, 1);
  } else {
    q = Mat::Constant(l, l, 0.1 / (l - 1));
    q.diagonal().setConstant(0.9);
  }
  return ArhmmModel(std::move(regimes), std::move(q));
}

struct EmStageResult {
  ArhmmModel model;
  double log_lik;
  int iterations;
  bool converged;
  std::vector<double> trace;
};

EmStageResult run_em_stage(ArhmmModel model, const Mat& y, const EmConfig& cfg,
                           bool fix_phi_zero) {
  EmStageResult st{std::move(model), -std::numeric_limits<double>::infinity(), 0,
                   false, {}};
  for (int it = 0; it < cfg.max_iter; ++it) {
    SmoothedQuantities sq = e_step(st.model, y);
    double gain = sq.log_lik - st.log_lik;
    st.log_lik = sq.log_lik;
    st.trace.push_back(sq.log_lik);
    if (it > 0 && gain < cfg.tol) {
      st.converged = true;
      break;
    }
    st.model = m_step(st.model, y, sq, fix_phi_zero);
    st.iterations++;
  }
  return st;
}

}  // namespace

EmResult em_fit(const Mat& y, int l, const EmConfig& cfg) {
  if (l < 1) throw validation_error("number of regimes must be >= 1");
  if (y.rows() < 2) throw validation_error("estimation needs at least two observations");
  if (y.cols() < 1) throw validation_error("series must have at least one column");

  std::string last_error;
  for (int restart = 0; restart <= cfg.max_restarts; ++restart) {
    try {
      ArhmmModel init = initial_model(y, l, cfg.seed, restart);
      EmResult out;
      out.restarts = restart;
      if (cfg.fix_phi_zero) {
        EmStageResult st = run_em_stage(std::move(init), y, cfg, true);
        out.model = std::move(st.model);
        out.log_lik = st.log_lik;
        out.iterations = st.iterations;
        out.converged = st.converged;
        out.log_lik_trace = std::move(st.trace);
      } else if (cfg.warm_start) {
        // Fit the phi = 0 submodel first, then release phi from that point.
        EmStageResult warm = run_em_stage(std::move(init), y, cfg, true);
        EmStageResult full = run_em_stage(std::move(warm.model), y, cfg, false);
        out.model = std::move(full.model);
        out.log_lik = full.log_lik;
        out.iterations = warm.iterations + full.iterations;
        out.converged = full.converged;
        out.log_lik_trace = std::move(warm.trace);
        out.log_lik_trace.insert(out.log_lik_trace.end(), full.trace.begin(),
                                 full.trace.end());
      } else {
        EmStageResult st = run_em_stage(std::move(init), y, cfg, false);
        out.model = std::move(st.model);
        out.log_lik = st.log_lik;
        out.iterations = st.iterations;
        out.converged = st.converged;
        out.log_lik_trace = std::move(st.trace);
      }
      if (cfg.sort_regimes) out.model = sort_regimes_by_volatility(out.model);
      return out;
    } catch (const numeric_error& e) {
      last_error = e.what();  // degenerate fit: jitter the start and retry
    }
  }
  throw numeric_error("EM failed after " + std::to_string(cfg.max_restarts + 1) +
                      " starts: " + last_error);
}

ArhmmModel sort_regimes_by_volatility(const ArhmmModel& m) {
  const int l = m.num_regimes();
  std::vector<int> order(l);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    double va = m.regime(a).cov.trace(), vb = m.regime(b).cov.trace();
    if (va != vb) return va < vb;
    return m.regime(a).mu[0] < m.regime(b).mu[0];
  });
  std::vector<RegimeParams> regimes(l);
  Mat q(l, l);
  Vec eta0(l);
  for (int i = 0; i < l; ++i) {
    regimes[i] = m.regime(order[i]);
    eta0[i] = m.eta0()[order[i]];
    for (int j = 0; j < l; ++j) q(i, j) = m.q()(order[i], order[j]);
  }
  return ArhmmModel(std::move(regimes), std::move(q), std::move(eta0));
}

double chi_squared_upper_tail(double x, int df) {
  if (x <= 0.0) return 1.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

LrtResult likelihood_ratio_test(double loglik_null, double loglik_alt, int l, int d) {
  if (l < 1 || d < 1) throw validation_error("invalid l or d for the test");
  LrtResult out;
  out.stat = -2.0 * (loglik_null - loglik_alt);
  out.df = (d == 1) ? l : l * d * d;
  if (out.stat < 0.0) {
    out.negative_stat = true;  // alternative fit worse than the null: no evidence
    out.stat = 0.0;
    out.p_value = 1.0;
    return out;
  }
  out.p_value = chi_squared_upper_tail(out.stat, out.df);
  return out;
}

}  // namespace arhmm
