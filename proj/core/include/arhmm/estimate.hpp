#pragma once

#include <cstdint>
#include <vector>

#include "arhmm/filter.hpp"
#include "arhmm/model.hpp"
#include "arhmm/types.hpp"

namespace arhmm {

// Smoothed regime posteriors for a series of n observations (first one
// burn-in, as in the filter):
//   lambda.row(t)[i]   = P(tau_t = i | Y_0..Y_{n-1})            t = 0..n-1
//   big_lambda[t](i,j) = P(tau_t = i, tau_{t+1} = j | Y_0..Y_{n-1}), t = 0..n-2
// eta_bar holds the per-step renormalized backward variables; their common
// scale cancels everywhere they are used.
struct SmoothedQuantities {
  Mat lambda;
  std::vector<Mat> big_lambda;
  Mat eta_bar;
  double log_lik = 0.0;
};

// Forward-backward pass.  Satisfies sum_j big_lambda[t](i,j) = lambda(t,i).
SmoothedQuantities e_step(const ArhmmModel& m, const Mat& y);

// Exact M-step update given smoothed posteriors: per-regime weighted
// least-squares for (mu, phi, cov) and row-normalized expected transition
// counts for Q.  fix_phi_zero freezes phi at 0 (plain HMM update).  A regime
// whose total weight or regressor Gram matrix degenerates raises
// numeric_error.  A phi update that leaves the stability region is shrunk
// back onto it (phi <- 0.99 phi / rho(phi)).
ArhmmModel m_step(const ArhmmModel& prev, const Mat& y,
                  const SmoothedQuantities& sq, bool fix_phi_zero = false);

struct EmConfig {
  int max_iter = 500;
  double tol = 1e-6;          // stop when the log-likelihood gain drops below
  bool fix_phi_zero = false;  // estimate the phi = 0 (HMM) submodel
  bool warm_start = true;     // fit the HMM first, then release phi
  std::uint64_t seed = 0;     // deterministic init jitter and restarts
  int max_restarts = 3;       // on degenerate regimes
  bool sort_regimes = true;   // order by emission volatility on exit
};

struct EmResult {
  ArhmmModel model;
  double log_lik = 0.0;
  int iterations = 0;    // total M-steps taken (including warm start)
  bool converged = false;
  int restarts = 0;
  std::vector<double> log_lik_trace;  // one entry per iteration, nondecreasing
};

// Maximum-likelihood fit with l regimes.  Initial values come from a
// volatility-bucket split of the data (Q diagonal 0.9, phi 0); restarts jitter
// that seed.  Monotone in log-likelihood by construction of EM.
EmResult em_fit(const Mat& y, int l, const EmConfig& cfg = EmConfig());

// Stable deterministic regime order: increasing emission volatility
// (trace of cov), with mu as tie-break.  Returns the permuted model.
ArhmmModel sort_regimes_by_volatility(const ArhmmModel& m);

struct LrtResult {
  double stat = 0.0;    // D = -2 (loglik_null - loglik_alt)
  int df = 0;
  double p_value = 1.0;
  bool negative_stat = false;  // D < 0 was clamped to 0
};

// Likelihood-ratio test of the HMM (phi = 0) null against the autoregressive
// alternative; D is asymptotically chi-squared with l (d = 1) or l d^2
// degrees of freedom.
LrtResult likelihood_ratio_test(double loglik_null, double loglik_alt, int l, int d);

// Upper tail of the chi-squared distribution, exposed for reuse in reports.
double chi_squared_upper_tail(double x, int df);

}  // namespace arhmm
