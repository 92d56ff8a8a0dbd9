#pragma once

#include <string>
#include <vector>

#include "arhmm/backtest.hpp"
#include "arhmm/hedge.hpp"
#include "arhmm/model.hpp"
#include "arhmm/types.hpp"

namespace arhmm {

// Shortest text form that parses back to the same double.
std::string format_double(double x);

struct ReturnsSeries {
  std::vector<std::string> dates;  // one per row, ISO-8601 recommended
  Mat y;                           // n x d log-returns
};

// CSV with header `date,logret` (d = 1) or `date,logret_1,...,logret_d`.
// Extra columns after the return block are ignored on load.
ReturnsSeries load_returns_csv(const std::string& path);
void save_returns_csv(const std::string& path, const ReturnsSeries& series);

// Model JSON schema:
// {"d": int, "l": int,
//  "regimes": [{"mu": [...], "phi": [[...]], "cov": [[...]]}, ...],
//  "q": [[...]], "eta0": [...]}        (eta0 optional; uniform when absent)
// Loading validates through the ArhmmModel constructor and reports the exact
// violated constraint.
ArhmmModel load_model_json(const std::string& path);
void save_model_json(const std::string& path, const ArhmmModel& m);
ArhmmModel model_from_json_text(const std::string& text);
std::string model_to_json_text(const ArhmmModel& m);

// CSV with header `date,kind,strike,maturity_days,mid,underlying_close`;
// kind is `call` or `put`.
std::vector<backtest::OptionQuote> load_quotes_csv(const std::string& path);
void save_quotes_csv(const std::string& path,
                     const std::vector<backtest::OptionQuote>& quotes);

// Versioned binary cache of a full table set (magic + format version + JSON
// header with the model/config/payoff + raw arrays).  Loading re-validates
// the header and array sizes.
void save_hedge_tables(const std::string& path, const hedge::HedgeTables& tables);
hedge::HedgeTables load_hedge_tables(const std::string& path);

// CSV with one row per evaluated (quote, strategy) pair; header
// `date,strategy,kind,strike,maturity_days,market_mid,model_price,side,
//  hedging_error,pnl,bias`.  Round-trips exactly.
std::vector<backtest::TradeRecord> load_trades_csv(const std::string& path);
void save_trades_csv(const std::string& path,
                     const std::vector<backtest::TradeRecord>& trades);

// Hedging-error report in the usual table layout: one column per strategy,
// rows RMSE, Bias, VaR 1%, Median, VaR 99%, then trade counts and mean P&L.
std::string backtest_summary_csv(const backtest::BacktestResult& result);

// Simulated-hedging report: one column per strategy, rows Average, Median,
// Volatility, Skewness, Kurtosis, Minimum, VaR 1%, VaR 99%, Maximum, RMSE.
std::string hedge_sim_summary_csv(const std::vector<hedge::StrategyResult>& results);

}  // namespace arhmm
