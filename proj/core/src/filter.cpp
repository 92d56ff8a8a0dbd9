#include "arhmm/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace arhmm {

namespace {

// log-sum-exp with the max factored out; returns -inf for an all -inf input.
double log_sum_exp(const Vec& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace

FilterState filter_step(const ArhmmModel& m, const FilterState& s, const Vec& y_prev,
                        const Vec& y) {
  const int l = m.num_regimes();
  if (s.eta.size() != l) throw validation_error("filter state has wrong size");

  // predictive regime weights W(i) = sum_j eta(j) Q_ji
  Vec w = m.q().transpose() * s.eta;

  Vec log_terms(l);
  for (int i = 0; i < l; ++i) {
    if (w[i] <= 0.0) {
      log_terms[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    log_terms[i] = m.log_cond_density(i, y_prev, y) + std::log(w[i]);
  }

  double log_z = log_sum_exp(log_terms);
  if (!std::isfinite(log_z))
    throw numeric_error("filter update underflowed: observation has zero density "
                        "under every reachable regime");

  FilterState next;
  next.t = s.t + 1;
  next.eta = (log_terms.array() - log_z).exp();
  next.eta /= next.eta.sum();  // remove residual rounding
  next.log_lik = s.log_lik + log_z;
  return next;
}

FilterResult filter_path(const ArhmmModel& m, const Mat& y) {
  const Eigen::Index n = y.rows();
  if (n < 2) throw validation_error("filtering needs at least two observations");
  if (y.cols() != m.dim()) throw validation_error("series dimension mismatch");

  FilterResult out;
  out.states.reserve(n);
  FilterState s;
  s.t = 0;
  s.eta = m.eta0();
  s.log_lik = 0.0;
  out.states.push_back(s);
  for (Eigen::Index t = 1; t < n; ++t) {
    s = filter_step(m, s, y.row(t - 1).transpose(), y.row(t).transpose());
    out.states.push_back(s);
  }
  out.log_lik = s.log_lik;
  return out;
}

int most_probable_regime(const Vec& eta) {
  int best = 0;
  for (Eigen::Index i = 1; i < eta.size(); ++i)
    if (eta[i] > eta[best]) best = static_cast<int>(i);
  return best;
}

Vec predict_regime(const Vec& eta, const Mat& q, int k) {
  if (k < 0) throw validation_error("prediction horizon must be >= 0");
  Vec v = eta;
  for (int s = 0; s < k; ++s) v = q.transpose() * v;
  return v;
}

double predictive_density(const ArhmmModel& m, const Vec& eta, const Vec& y_last,
                          const Vec& y_next) {
  Vec w = m.q().transpose() * eta;
  double z = 0.0;
  for (int i = 0; i < m.num_regimes(); ++i)
    if (w[i] > 0.0) z += w[i] * m.cond_density(i, y_last, y_next);
  return z;
}

double predictive_log_density_m(const ArhmmModel& m, const Vec& eta, const Vec& y_last,
                                const Mat& y_path) {
  const Eigen::Index steps = y_path.rows();
  if (steps < 1) throw validation_error("predictive density needs at least one step");
  if (y_path.cols() != m.dim()) throw validation_error("path dimension mismatch");
  // Forward recursion over regime marginals; each step folds one transition
  // and one emission, so the full l^m regime-path sum is never formed.
  FilterState s;
  s.t = 0;
  s.eta = eta;
  s.log_lik = 0.0;
  Vec prev = y_last;
  for (Eigen::Index k = 0; k < steps; ++k) {
    s = filter_step(m, s, prev, y_path.row(k).transpose());
    prev = y_path.row(k).transpose();
  }
  return s.log_lik;
}

double predictive_density_m(const ArhmmModel& m, const Vec& eta, const Vec& y_last,
                            const Mat& y_path) {
  return std::exp(predictive_log_density_m(m, eta, y_last, y_path));
}

}  // namespace arhmm
