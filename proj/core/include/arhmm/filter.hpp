#pragma once

#include <cstddef>
#include <vector>

#include "arhmm/model.hpp"
#include "arhmm/types.hpp"

namespace arhmm {

// Filtered regime probabilities after absorbing observation t:
//   eta[i] = P(tau_t = i | Y_0..Y_t).
// The first observation of a series (t = 0) is burn-in: it only conditions
// the density of Y_1, so its state carries the prior eta0 and log_lik 0.
struct FilterState {
  std::size_t t = 0;     // 0-based observation index
  Vec eta;               // filtered probabilities, length l
  double log_lik = 0.0;  // cumulative log f(Y_1..Y_t | Y_0)
};

// One Bayes update: predictive mixture weights W(i) = sum_j eta[j] Q_ji, then
//   eta'(i) proportional to f_i(y | y_prev) W(i),
// normalized by the one-step predictive density Z.  Products are accumulated
// in log space; an all-zero update (every regime underflows) raises
// numeric_error instead of returning NaNs.
FilterState filter_step(const ArhmmModel& m, const FilterState& s,
                        const Vec& y_prev, const Vec& y);

struct FilterResult {
  std::vector<FilterState> states;  // size n, entry t aligned with y.row(t)
  double log_lik = 0.0;             // total log-likelihood (n-1 factors)
};

// Runs the recursion over an n x d series (n >= 2).  states[0] holds the
// prior; states[t] for t >= 1 is the update on the pair (y_{t-1}, y_t).
FilterResult filter_path(const ArhmmModel& m, const Mat& y);

// Argmax of eta with deterministic lowest-index tie-breaking.
int most_probable_regime(const Vec& eta);

// Regime distribution k steps ahead: eta' Q^k (k >= 0).
Vec predict_regime(const Vec& eta, const Mat& q, int k);

// One-step predictive density f(y_next | Y_0..Y_t): sum_i f_i(y_next|y_last) W(i).
double predictive_density(const ArhmmModel& m, const Vec& eta, const Vec& y_last,
                          const Vec& y_next);

// log f(y_path_1..y_path_m | Y_0..Y_t) for a hypothetical continuation
// y_path (m x d) after y_last.  Forward recursion over regime marginals,
// O(m l^2), equivalent to summing the l^m regime paths.
double predictive_log_density_m(const ArhmmModel& m, const Vec& eta,
                                const Vec& y_last, const Mat& y_path);
double predictive_density_m(const ArhmmModel& m, const Vec& eta,
                            const Vec& y_last, const Mat& y_path);

}  // namespace arhmm
