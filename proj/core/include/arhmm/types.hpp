#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace arhmm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Bad inputs: shapes, ranges, stochastic-matrix violations, malformed files.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown: underflow to an all-zero filter, non-convergent EM,
// degenerate regimes, root-finding failures.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace arhmm
