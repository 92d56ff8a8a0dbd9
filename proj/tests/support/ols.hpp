#pragma once

#include "arhmm/types.hpp"

namespace testsup {

// Least-squares fit of Y_t = c + B Y_{t-1} + e_t via the normal equations on
// the stacked regressor [1, y_{t-1}], reported in the (mu, phi, cov)
// parameterization: phi = B, mu = (I - B)^{-1} c, cov = E'E / (n-1).
struct OlsFit {
  arhmm::Vec mu;
  arhmm::Mat phi;
  arhmm::Mat cov;
};

OlsFit ols_var1(const arhmm::Mat& y);

}  // namespace testsup
