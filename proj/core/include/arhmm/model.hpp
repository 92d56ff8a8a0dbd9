#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "arhmm/types.hpp"

namespace arhmm {

// One regime of the switching model: conditionally on regime j and the
// previous observation y, the next observation is
//   Y_t = mu + phi (y - mu) + eps,   eps ~ N(0, cov).
// phi = 0 recovers the plain (memoryless) hidden Markov mixture.
struct RegimeParams {
  Vec mu;   // d
  Mat phi;  // d x d, spectral radius < 1
  Mat cov;  // d x d, symmetric positive definite
};

// Regime-switching Gaussian autoregression: a Markov chain tau_t with l x l
// transition matrix Q drives which RegimeParams generates each observation.
// Construction validates shapes, stochasticity of Q and eta0, positive
// definiteness of each cov, and the per-regime stability bound rho(phi) < 1;
// violations raise validation_error.
class ArhmmModel {
 public:
  // Empty placeholder (dim 0, no regimes); only assignment makes it usable.
  ArhmmModel() = default;

  ArhmmModel(std::vector<RegimeParams> regimes, Mat q, Vec eta0 = Vec());

  // Test-only escape hatch: skips the positive-definiteness and stability
  // checks so degenerate inputs (zero covariance, unit roots) can be probed.
  // Densities on a non-SPD regime raise numeric_error.
  static ArhmmModel unchecked(std::vector<RegimeParams> regimes, Mat q,
                              Vec eta0 = Vec());

  int num_regimes() const { return static_cast<int>(regimes_.size()); }
  int dim() const { return dim_; }
  const RegimeParams& regime(int j) const { return regimes_[j]; }
  const std::vector<RegimeParams>& regimes() const { return regimes_; }
  const Mat& q() const { return q_; }
  const Vec& eta0() const { return eta0_; }

  // Lower Cholesky factor B_j of cov_j (PSD fallback for unchecked models).
  const Mat& chol(int j) const { return chol_[j]; }
  bool spd(int j) const { return spd_[j]; }

  Vec cond_mean(int j, const Vec& y_prev) const {
    const RegimeParams& r = regimes_[j];
    return r.mu + r.phi * (y_prev - r.mu);
  }

  double log_cond_density(int j, const Vec& y_prev, const Vec& y) const;
  double cond_density(int j, const Vec& y_prev, const Vec& y) const;

 private:
  void finalize(bool checked);

  std::vector<RegimeParams> regimes_;
  Mat q_;
  Vec eta0_;
  int dim_ = 0;
  std::vector<Mat> chol_;      // lower Cholesky (or PSD square root) of cov
  std::vector<Mat> cov_inv_;   // cached inverse for density evaluation
  std::vector<double> log_norm_;  // -0.5 (d log 2pi + log det cov)
  std::vector<bool> spd_;
};

// Density of Y_t given Y_{t-1} = y_prev and tau_t = j.  Free-function aliases
// of the members, convenient at call sites that read like the formulas.
double conditional_density(const ArhmmModel& m, int j, const Vec& y_prev, const Vec& y);
double conditional_log_density(const ArhmmModel& m, int j, const Vec& y_prev, const Vec& y);

// Unique stationary distribution nu of Q (nu' Q = nu', nu >= 0, sum 1).
// Raises numeric_error when the chain is not ergodic (null space of Q' - I is
// not one-dimensional, or the solution leaves the simplex).
Vec stationary_regime_dist(const Mat& q);

struct StationaryMoments {
  Vec nu;    // stationary regime distribution
  Vec mean;  // unconditional E[Y]
  Mat cov;   // unconditional Var[Y], fixed point of the moment map
  int iterations = 0;
};

// Unconditional moments of the stationary process.  The covariance solves
// A = B(A) + sum_i nu_i phi_i A phi_i'; the map is a contraction under the
// per-regime stability bound, iterated from 0 until the max-norm change is
// below tol (hard cap max_iter, numeric_error if reached).
StationaryMoments stationary_moments(const ArhmmModel& m, double tol = 1e-12,
                                     int max_iter = 100000);

struct SimulatedPath {
  Mat y;                    // n x d observations
  std::vector<int> regimes; // n regime labels (0-based)
};

// Simulates n steps forward from (y0, tau0): first the chain moves
// tau_{t-1} -> tau_t by a row of Q, then Y_t is drawn from regime tau_t
// conditionally on Y_{t-1}.  The returned arrays exclude (y0, tau0).
SimulatedPath simulate_path(const ArhmmModel& m, const Vec& y0, int tau0,
                            int n_steps, std::uint64_t seed);
SimulatedPath simulate_path(const ArhmmModel& m, const Vec& y0, int tau0,
                            int n_steps, std::mt19937_64& gen);

// One draw from a discrete distribution by cumulative inversion.
int sample_regime(const Vec& dist, std::mt19937_64& gen);

}  // namespace arhmm
