#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "arhmm/estimate.hpp"
#include "arhmm/model.hpp"
#include "arhmm/types.hpp"

namespace arhmm {

// Rosenblatt transform of a series under the model (d <= 2): row t-1 holds
// the conditional probability integral transform of observation t given the
// past,
//   U_t^(1) = sum_i W_{t-1}(i) F_{i,1}(y_t^(1)),
// and for d = 2 the second coordinate uses the regime-conditional
// distribution of y^(2) given y^(1) reweighted by the first-margin densities.
// Under the true model the rows are approximately iid uniform on (0,1)^d.
// Returns an (n-1) x d matrix (first observation is burn-in).
Mat rosenblatt_transform(const ArhmmModel& m, const Mat& y);

// Cramer-von Mises distance of rows of u (n x d, values in [0,1]) from the
// independence copula, n * integral (D_n(u) - prod u)^2 du, via the closed
// form with the double sum over observation pairs.
double cvm_statistic(const Mat& u);

struct GofConfig {
  int n_boot = 1000;
  std::uint64_t seed = 0;
  std::size_t threads = 0;    // 0 = hardware concurrency
  EmConfig em;                // fit/refit configuration
  int burn_in = 100;          // steps discarded at the start of each replicate
  double max_drop_frac = 0.05;  // abort if more replicates fail to refit
};

struct GofResult {
  double s_n = 0.0;        // statistic on the data under the fitted model
  double p_value = 1.0;    // fraction of bootstrap statistics above s_n
  int n_boot_used = 0;
  int n_dropped = 0;       // replicates whose refit failed
  double log_lik = 0.0;    // of the fitted model
  int em_iterations = 0;
};

// Parametric bootstrap of the CvM statistic: fit l regimes, transform, then
// simulate n_boot replicate paths from the fit (stationary-mean start,
// burn-in discarded), refit each with the same policy and recompute the
// statistic.  Replicates are independent substreams of `seed`, evaluated in
// parallel with deterministic output.  Returns the fitted model through
// `fitted` when non-null.
GofResult parametric_bootstrap(const Mat& y, int l, const GofConfig& cfg,
                               ArhmmModel* fitted = nullptr);

struct RegimeSelection {
  std::optional<int> selected_l;   // empty when no candidate passes
  std::vector<GofResult> per_l;    // results for l = 1..l_max in order
};

// Smallest l in 1..l_max whose bootstrap p-value exceeds 5%.
RegimeSelection select_num_regimes(const Mat& y, int l_max, const GofConfig& cfg);

}  // namespace arhmm
