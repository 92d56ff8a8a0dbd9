#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "arhmm/estimate.hpp"
#include "arhmm/hedge.hpp"
#include "arhmm/stats.hpp"
#include "arhmm/types.hpp"

namespace arhmm {
namespace backtest {

struct BsPriceDelta {
  double price = 0.0;
  double delta = 0.0;
};

// Black-Scholes price and delta with continuous rate and dividend yield
// (annualized inputs, t in years).  At vol -> 0 or t -> 0 the price collapses
// to the discounted forward intrinsic value.
BsPriceDelta black_scholes_price_delta(double s, double k, double vol, double rate,
                                       double div_yield, double t_years,
                                       OptionKind kind);

// Volatility solving price(vol) = mid to 1e-8, bisection bracketed by the
// no-arbitrage bounds; a mid outside those bounds raises validation_error.
double implied_vol(double mid, double s, double k, double rate, double div_yield,
                   double t_years, OptionKind kind);

struct PutCallPair {
  double strike = 0.0;
  double call_mid = 0.0;
  double put_mid = 0.0;
};

struct ImpliedForward {
  double forward = 0.0;          // F_n
  double strike_used = 0.0;      // the strike minimizing |call - put|
  double rate_per_period = 0.0;  // f_n = log(F_n / s0) / n
  double beta = 0.0;             // e^{-f_n}, one-period discount
};

// Forward implied by put-call parity, F = (C - P) e^{r n} + K, evaluated at
// the strike with the smallest |C - P|; f_n is the per-period rate that grows
// s0 to F over n periods (so beta^n F = s0).  `carry_rate` is the per-period
// rate compounding the C - P leg.  Empty input raises validation_error.
ImpliedForward implied_forward(double s0, const std::vector<PutCallPair>& pairs,
                               double carry_rate, int n_periods);

// Rescales a spot path and strike so the inception spot is 100.
struct Normalized {
  double scale = 0.0;  // 100 / s0
  double strike = 0.0;
  double s0 = 100.0;
};
Normalized normalize_to_100(double s0, double strike);

struct OptionQuote {
  std::string date;  // must match a returns row date
  OptionKind kind = OptionKind::call;
  double strike = 0.0;
  int maturity_days = 0;
  double mid = 0.0;
  double underlying_close = 0.0;
};

enum class StrategyKind {
  oh_arhmm,    // optimal hedging, fitted l-regime autoregressive model
  oh_hmm,      // optimal hedging, fitted l-regime phi = 0 model
  oh_bs,       // optimal hedging, single Gaussian regime
  bs_delta,    // delta hedging at the fitted stationary volatility
  bs_implied,  // delta hedging at the quote's implied volatility
};
std::string strategy_name(StrategyKind k);
StrategyKind strategy_from_name(const std::string& name);

struct BacktestConfig {
  std::vector<StrategyKind> strategies{StrategyKind::oh_arhmm, StrategyKind::oh_hmm,
                                       StrategyKind::oh_bs, StrategyKind::bs_delta,
                                       StrategyKind::bs_implied};
  int window_days = 2000;     // trailing estimation window ending at inception
  int regimes = 3;            // l for the fitted switching models
  double moneyness_lo = 0.9;  // strike / spot band; quotes outside are skipped
  double moneyness_hi = 1.1;
  double carry_rate = 0.0;    // per-period rate for the put-call parity leg
  double fallback_rate = 0.0; // per-period rate when no parity pair exists
  EmConfig em;
  hedge::GridSpec grids;
  std::size_t threads = 0;

  // Optional market re-quoting hook for the implied-vol hedger: mid price of
  // (kind, strike_normalized, periods_left) at step t of the quote's life,
  // given the normalized spot.  When absent the inception implied volatility
  // is held for the whole life of the trade.
  std::function<double(const OptionQuote&, int t, double spot_norm, int periods_left)>
      requote;
};

struct TradeRecord {
  std::string date;
  StrategyKind strategy = StrategyKind::oh_arhmm;
  OptionKind kind = OptionKind::call;
  double strike = 0.0;       // normalized to inception spot 100
  int maturity_days = 0;
  double market_mid = 0.0;   // normalized
  double model_price = 0.0;  // V0, normalized
  int side = 0;              // +1 sold at market, -1 bought, 0 no trade
  double hedging_error = 0.0;  // beta_n (C_n - V_n), discounted
  double pnl = 0.0;            // side * ((mid - V0) - hedging_error)
  double bias = 0.0;           // market_mid - model_price
};

struct StrategySummary {
  StrategyKind strategy;
  SummaryStats pnl;            // over executed trades (side != 0) only
  SummaryStats hedging_error;  // over every evaluated quote, traded or not
  double mean_bias = 0.0;      // over every evaluated quote
  int n_trades = 0;            // executed trades
};

struct BacktestResult {
  std::vector<TradeRecord> trades;          // quote-major, strategy-minor order
  std::vector<StrategySummary> summaries;   // one per configured strategy
  std::vector<std::string> skipped;         // quote date + reason, for the log
};

// Walks the quote list: for each quote, fits the models on the trailing
// return window ending at the inception date (never later data), prices the
// claim, trades against the market mid and hedges daily along the realized
// path to expiry.  Quotes lacking history, path coverage, a matching date, or
// moneyness inside the band are skipped and reported.  Fits are cached per
// inception date; quotes are processed in parallel with deterministic output.
BacktestResult run_backtest(const std::vector<std::string>& dates, const Mat& returns,
                            const std::vector<OptionQuote>& quotes,
                            const BacktestConfig& cfg);

}  // namespace backtest
}  // namespace arhmm
