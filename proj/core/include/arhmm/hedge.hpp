#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "arhmm/model.hpp"
#include "arhmm/stats.hpp"
#include "arhmm/types.hpp"

namespace arhmm {

enum class OptionKind { call, put };

namespace hedge {

// Moments of a Gaussian restricted to (a, b), X ~ N(mu, sigma^2):
//   m  = E[e^{theta X} 1(a < X < b)]
//   m1 = E[X e^{theta X} 1(a < X < b)]
//   m2 = E[X^2 e^{theta X} 1(a < X < b)]
// Closed forms from differentiating the truncated moment generating
// function; the exponential prefactor is assembled in log space and CDF
// differences avoid tail cancellation.  a = -inf / b = +inf are allowed.
struct TruncGaussMoments {
  double m = 0.0, m1 = 0.0, m2 = 0.0;
};
TruncGaussMoments truncated_gaussian_moments(double theta, double mu, double sigma,
                                             double a, double b);

// Interpolation primitives used by the table recursions (exposed for tests).
// linear_cell: f ~= a + b x on [x0, x1] matching the endpoints exactly.
struct LinCoeffs {
  double a = 0.0, b = 0.0;
};
LinCoeffs linear_cell(double x0, double x1, double f0, double f1);

// bilinear_cell: f ~= a + b1 s + b2 y + b3 s y on [s0,s1] x [y0,y1] matching
// the four corners exactly.
struct BilinCoeffs {
  double a = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0;
};
BilinCoeffs bilinear_cell(double s0, double s1, double y0, double y1,
                          double f00, double f10, double f01, double f11);

// Terminal claim on the underlying.  `raw` is the undiscounted payoff C(S_n);
// `discounted` evaluates the present-value payoff at a discounted spot,
// Psi_n(s) = beta_n C(s / beta_n) (max(0, s - beta_n K) for a call).
struct Payoff {
  OptionKind kind = OptionKind::call;
  double strike = 0.0;
  std::function<double(double)> custom;  // raw payoff; overrides kind when set

  static Payoff call(double strike);
  static Payoff put(double strike);

  double raw(double s_terminal) const;
  double discounted(double s_disc, double beta_n) const;
};

// Discretization and horizon for the backward tables.  The y grid carries the
// one-step return dimension; the s grid carries the discounted spot and must
// start at the sentinel s[0] = 0 (its top cell is open: values are held
// constant in s beyond the last node, and constant in y outside the y range).
// rates[t-1] is the per-period short rate over step t = 1..n_steps.
struct HedgeConfig {
  int n_steps = 0;
  std::vector<double> rates;
  Vec y_grid;
  Vec s_grid;
  std::size_t threads = 0;
};

std::vector<double> constant_rates(int n_steps, double r_per_period);

// Output of the backward induction.  All spot-indexed quantities live in
// discounted units.  Scalar tables (per t = 1..n, regime i, y node v):
//   a = E[zeta^2 g_{t+1}], b = E[zeta g_{t+1}], h = b / a,
//   g_t = E[g_{t+1}] - b h,     with zeta = e^{Y - r} - 1 and g_{n+1} = 1.
// Value tables: psi[t] (t = 0..n) and aa[t] (t = 1..n) on s x y nodes:
//   psi_{t-1} = E[psi_t (1 - h zeta)],   aa_t = E[psi_t zeta],
// with the boundary row psi_{t-1}(0,y,i) = Psi_n(0), aa_t(0,y,i) = h Psi_n(0).
class HedgeTables {
 public:
  ArhmmModel model;   // the hedger's model (d = 1)
  HedgeConfig cfg;
  Payoff payoff;
  std::vector<double> beta;  // beta[t] = exp(-sum_{u<=t} r_u), beta[0] = 1

  // scalar tables indexed [t][i*K + v], t = 1..n (index 0 unused)
  std::vector<std::vector<double>> g, a, b, h;
  // value tables indexed [t][(i*M + q)*K + v]; psi: t = 0..n, aa: t = 1..n
  std::vector<std::vector<double>> psi, aa;

  int n() const { return cfg.n_steps; }
  int K() const { return static_cast<int>(cfg.y_grid.size()); }
  int M() const { return static_cast<int>(cfg.s_grid.size()); }
  int L() const { return model.num_regimes(); }

  double g_at(int t, int i, int v) const { return g[t][i * K() + v]; }
  double a_at(int t, int i, int v) const { return a[t][i * K() + v]; }
  double b_at(int t, int i, int v) const { return b[t][i * K() + v]; }
  double h_at(int t, int i, int v) const { return h[t][i * K() + v]; }
  double psi_at(int t, int i, int q, int v) const {
    return psi[t][(static_cast<std::size_t>(i) * M() + q) * K() + v];
  }
  double aa_at(int t, int i, int q, int v) const {
    return aa[t][(static_cast<std::size_t>(i) * M() + q) * K() + v];
  }

  // Interpolated evaluation with the table conventions: linear / bilinear
  // inside the grids, constant beyond the edges.
  double scalar_eval(const std::vector<double>& tab, int i, double y) const;
  double value_eval(const std::vector<double>& tab, int i, double s, double y) const;
  double h_eval(int t, int i, double y) const { return scalar_eval(h[t], i, y); }
  double a_eval(int t, int i, double y) const { return scalar_eval(a[t], i, y); }
  double g_eval(int t, int i, double y) const { return scalar_eval(g[t], i, y); }
  double psi_eval(int t, int i, double s, double y) const { return value_eval(psi[t], i, s, y); }
  double aa_eval(int t, int i, double s, double y) const { return value_eval(aa[t], i, s, y); }
};

// Semi-exact backward induction: per node, the conditional expectations are
// sums over interpolation cells of exact truncated-Gaussian moments, so the
// only approximation is the piecewise-(bi)linear representation of the
// integrand.  Requires a d = 1 model.
HedgeTables backward_tables(const ArhmmModel& m, const HedgeConfig& cfg,
                            const Payoff& payoff);

// Monte Carlo variant of the same recursion: cell integrals are replaced by
// per-step sample averages over n_draws Gaussian innovations shared across
// regimes and nodes, rescaled so their sample mean and standard deviation
// match the conditional law exactly.
HedgeTables mc_backward_tables(const ArhmmModel& m, const HedgeConfig& cfg,
                               const Payoff& payoff, int n_draws,
                               std::uint64_t seed);

// Grid construction: ranges come from simulated percentiles of the one-step
// return law (y) and of the discounted terminal spot (s), widened to at least
// +-coverage stationary standard deviations of the highest-volatility regime.
// The s grid is geometrically spaced above its zero sentinel, which the table
// builder exploits to precompute all special-function evaluations.
struct GridSpec {
  int n_y = 101;
  int n_s = 201;
  double coverage = 5.0;
  std::uint64_t seed = 20240801;
  int n_sim = 200000;   // one-step sample for y percentiles
  int n_paths = 20000;  // terminal sample for s percentiles
  double align_s = 0.0;  // if > 0 and inside the range, shift so a node lands here
};
struct Grids {
  Vec y_grid;
  Vec s_grid;
};
Grids build_grids(const ArhmmModel& m, int n_steps, double s0,
                  const std::vector<double>& rates, const GridSpec& spec = GridSpec());

// Initial capital of the optimal strategy, C0 = psi_0(s0, y0, i) / g_1(y0, i),
// evaluated by table interpolation.  The blended variant averages the regime
// estimate with weights eta.
double price(const HedgeTables& tables, double s0, double y0, int regime);
double price_blended(const HedgeTables& tables, double s0, double y0, const Vec& eta);

// Optimal position in the risky asset over step t = 1..n given the state at
// t-1 (discounted spot s_prev, return y_prev, regime estimate, discounted
// portfolio value v_prev):
//   phi_t = (aa_t(s,y,i) / a_t(y,i) - v_prev h_t(y,i)) / s.
double hedge_weight(const HedgeTables& tables, int t, double s_prev, double y_prev,
                    int regime, double v_prev);

enum class RegimePolicy { most_probable, known };

// A competitor evaluated on the shared simulated paths: either the optimal
// tables or a Black-Scholes delta hedger with a fixed per-period volatility.
struct Strategy {
  enum class Kind { optimal, bs_delta };
  Kind kind = Kind::optimal;
  std::string name;
  const HedgeTables* tables = nullptr;  // optimal
  double bs_vol = 0.0;                  // bs_delta, per period
  Payoff payoff;                        // bs_delta (optimal uses tables->payoff)

  static Strategy optimal(std::string name, const HedgeTables* tables);
  static Strategy bs_delta(std::string name, const Payoff& payoff, double vol_per_period);
};

struct HedgeSimConfig {
  int n_paths = 10000;
  int n_steps = 0;
  std::vector<double> rates;  // must match any optimal strategy's tables
  double s0 = 100.0;
  std::uint64_t seed = 0;
  RegimePolicy policy = RegimePolicy::most_probable;
  int burn_in = 100;  // steps from the stationary mean to draw (y0, tau0)
  std::size_t threads = 0;
  bool store_weights = false;
};

struct StrategyResult {
  std::string name;
  std::vector<double> errors;  // discounted hedging error beta_n (C - V_n)
  std::vector<double> v0;      // initial capital per path
  Mat weights;                 // n_paths x n_steps when store_weights
  SummaryStats stats;          // summary of errors
};

// Simulates n_paths of the data-generating model and runs every strategy on
// the same paths with self-financing discounted accounting
//   v_t = v_{t-1} + phi_t (s_t - s_{t-1}).
// Optimal strategies filter regime probabilities under their own tables'
// model (policy most_probable), or read the simulator's true regimes (known).
// Path p draws from substream (seed, p): results are thread-count invariant.
std::vector<StrategyResult> simulate_hedging(const ArhmmModel& sim_model,
                                             const HedgeSimConfig& cfg,
                                             const std::vector<Strategy>& strategies);

StrategyResult simulate_hedging(const ArhmmModel& sim_model, const HedgeSimConfig& cfg,
                                const HedgeTables& tables);

}  // namespace hedge
}  // namespace arhmm
