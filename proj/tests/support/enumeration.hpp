#pragma once

#include <vector>

#include "arhmm/model.hpp"

namespace testsup {

// Posterior quantities computed by summing over every regime path explicitly.
// Costs O(n * l^n); intended for n <= 10 or so.
struct EnumerationResult {
  arhmm::Mat eta;                  // (n-1) x l, row t-1 holds filtered eta_t
  arhmm::Mat lambda;               // n x l, row t holds smoothed lambda_t (t = 0..n-1)
  std::vector<arhmm::Mat> lambda2; // (n-1) entries, [t](i,j) = P(tau_t=i, tau_{t+1}=j | all)
  double log_lik = 0.0;            // log density of y_1..y_{n-1} given y_0
};

EnumerationResult enumerate_posteriors(const arhmm::ArhmmModel& m, const arhmm::Mat& y);

}  // namespace testsup
