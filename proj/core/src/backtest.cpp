#include "arhmm/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "arhmm/filter.hpp"
#include "arhmm/gaussian.hpp"
#include "arhmm/parallel.hpp"
#include "arhmm/rng.hpp"

namespace arhmm::backtest {

BsPriceDelta black_scholes_price_delta(double s, double k, double vol, double rate,
                                       double div_yield, double t_years, OptionKind kind) {
  if (!(s > 0.0) || !(k > 0.0)) throw validation_error("spot and strike must be positive");
  if (t_years < 0.0 || vol < 0.0) throw validation_error("negative maturity or volatility");
  double df = std::exp(-rate * t_years), qf = std::exp(-div_yield * t_years);
  BsPriceDelta out;
  if (vol <= 0.0 || t_years <= 0.0) {
    if (kind == OptionKind::call) {
      out.price = std::max(0.0, s * qf - k * df);
      out.delta = s * qf > k * df ? qf : 0.0;
    } else {
      out.price = std::max(0.0, k * df - s * qf);
      out.delta = s * qf < k * df ? -qf : 0.0;
    }
    return out;
  }
  double sig = vol * std::sqrt(t_years);
  double d1 = (std::log(s / k) + (rate - div_yield + 0.5 * vol * vol) * t_years) / sig;
  double d2 = d1 - sig;
  if (kind == OptionKind::call) {
    out.price = s * qf * norm_cdf(d1) - k * df * norm_cdf(d2);
    out.delta = qf * norm_cdf(d1);
  } else {
    out.price = k * df * norm_cdf(-d2) - s * qf * norm_cdf(-d1);
    out.delta = -qf * norm_cdf(-d1);
  }
  return out;
}

double implied_vol(double mid, double s, double k, double rate, double div_yield,
                   double t_years, OptionKind kind) {
  if (!(t_years > 0.0)) throw validation_error("implied vol needs t > 0");
  if (!std::isfinite(mid)) throw validation_error("mid must be finite");
  double lb = black_scholes_price_delta(s, k, 0.0, rate, div_yield, t_years, kind).price;
  double ub = kind == OptionKind::call ? s * std::exp(-div_yield * t_years)
                                       : k * std::exp(-rate * t_years);
  if (!(mid >= lb - 1e-12) || !(mid <= ub + 1e-12))
    throw validation_error("mid violates no-arbitrage bounds");
  double lo = 1e-9, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    double v = 0.5 * (lo + hi);
    double p = black_scholes_price_delta(s, k, v, rate, div_yield, t_years, kind).price;
    if (std::abs(p - mid) < 1e-10) return v;
    (p < mid ? lo : hi) = v;
    if (hi - lo < 1e-14) break;
  }
  return 0.5 * (lo + hi);
}

ImpliedForward implied_forward(double s0, const std::vector<PutCallPair>& pairs,
                               double carry_rate, int n_periods) {
  if (pairs.empty()) throw validation_error("implied_forward needs at least one pair");
  if (!(s0 > 0.0)) throw validation_error("s0 must be positive");
  if (n_periods < 1) throw validation_error("n_periods must be positive");
  const PutCallPair* best = &pairs.front();
  for (const PutCallPair& p : pairs)
    if (std::abs(p.call_mid - p.put_mid) < std::abs(best->call_mid - best->put_mid)) best = &p;
  ImpliedForward f;
  f.strike_used = best->strike;
  f.forward = (best->call_mid - best->put_mid) * std::exp(carry_rate * n_periods) + best->strike;
  if (!(f.forward > 0.0)) throw numeric_error("implied forward is not positive");
  f.rate_per_period = std::log(f.forward / s0) / n_periods;
  f.beta = std::exp(-f.rate_per_period);
  return f;
}

Normalized normalize_to_100(double s0, double strike) {
  if (!(s0 > 0.0)) throw validation_error("s0 must be positive");
  Normalized n;
  n.scale = 100.0 / s0;
  n.strike = strike * n.scale;
  n.s0 = 100.0;
  return n;
}

std::string strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::oh_arhmm: return "oh_arhmm";
    case StrategyKind::oh_hmm: return "oh_hmm";
    case StrategyKind::oh_bs: return "oh_bs";
    case StrategyKind::bs_delta: return "bs_delta";
    case StrategyKind::bs_implied: return "bs_implied";
  }
  throw validation_error("unknown strategy");
}

StrategyKind strategy_from_name(const std::string& name) {
  for (StrategyKind k : {StrategyKind::oh_arhmm, StrategyKind::oh_hmm, StrategyKind::oh_bs,
                         StrategyKind::bs_delta, StrategyKind::bs_implied})
    if (strategy_name(k) == name) return k;
  throw validation_error("unknown strategy '" + name +
                         "' (expected oh_arhmm|oh_hmm|oh_bs|bs_delta|bs_implied)");
}

namespace {

// models fitted on one inception date's trailing window
struct DateFit {
  bool ok = false;
  std::string error;
  ArhmmModel arhmm, hmm, gauss;
  Vec eta_arhmm, eta_hmm, eta_gauss;  // filtered at the window end
  double stat_vol = 0.0;              // per period, from the arhmm fit
  double y_last = 0.0;
};

struct QuotePlan {
  int quote = -1;
  long idx = -1;       // inception row in the returns series
  int fit_slot = -1;   // index into the fit cache
  double rate = 0.0;   // per-period
  bool has_pairs = false;
};

}  // namespace

BacktestResult run_backtest(const std::vector<std::string>& dates, const Mat& returns,
                            const std::vector<OptionQuote>& quotes,
                            const BacktestConfig& cfg) {
  if (returns.cols() != 1) throw validation_error("backtest requires univariate returns");
  if (dates.size() != static_cast<std::size_t>(returns.rows()))
    throw validation_error("dates and returns length mismatch");
  if (cfg.window_days < 10) throw validation_error("window_days too small");
  if (cfg.regimes < 1) throw validation_error("regimes must be positive");
  if (!(cfg.moneyness_lo < cfg.moneyness_hi)) throw validation_error("bad moneyness band");

  const long nrows = returns.rows();
  std::unordered_map<std::string, long> date_idx;
  for (long i = 0; i < nrows; ++i)
    if (!date_idx.emplace(dates[i], i).second)
      throw validation_error("duplicate date in returns series");

  BacktestResult out;

  // -- plan quotes, collecting skip reasons and the set of fit dates --
  std::vector<QuotePlan> plans;
  std::map<long, int> fit_slot_of_idx;
  std::map<std::pair<long, int>, std::vector<PutCallPair>> parity;
  {
    // put-call pairs per (inception row, maturity): match strikes exactly
    std::map<std::tuple<long, int, double>, std::pair<double, double>> legs;
    for (const OptionQuote& q : quotes) {
      auto it = date_idx.find(q.date);
      if (it == date_idx.end() || !(q.mid > 0.0) || !(q.strike > 0.0)) continue;
      auto key = std::make_tuple(it->second, q.maturity_days, q.strike);
      auto& leg = legs.try_emplace(key, 0.0, 0.0).first->second;
      (q.kind == OptionKind::call ? leg.first : leg.second) = q.mid;
    }
    for (const auto& [key, leg] : legs)
      if (leg.first > 0.0 && leg.second > 0.0)
        parity[{std::get<0>(key), std::get<1>(key)}].push_back(
            {std::get<2>(key), leg.first, leg.second});
  }

  for (int qi = 0; qi < static_cast<int>(quotes.size()); ++qi) {
    const OptionQuote& q = quotes[qi];
    auto skip = [&](const std::string& why) { out.skipped.push_back(q.date + ": " + why); };
    auto it = date_idx.find(q.date);
    if (it == date_idx.end()) {
      skip("no matching returns date");
      continue;
    }
    long idx = it->second;
    if (q.maturity_days < 1) {
      skip("maturity must be at least one period");
      continue;
    }
    if (!(q.mid > 0.0) || !(q.strike > 0.0) || !(q.underlying_close > 0.0)) {
      skip("nonpositive quote fields");
      continue;
    }
    if (idx - cfg.window_days + 1 < 0) {
      skip("insufficient estimation history");
      continue;
    }
    if (idx + q.maturity_days >= nrows) {
      skip("maturity extends beyond the returns series");
      continue;
    }
    double mny = q.strike / q.underlying_close;
    if (mny < cfg.moneyness_lo || mny > cfg.moneyness_hi) {
      skip("moneyness outside the band");
      continue;
    }
    QuotePlan p;
    p.quote = qi;
    p.idx = idx;
    auto slot = fit_slot_of_idx.emplace(idx, static_cast<int>(fit_slot_of_idx.size()));
    p.fit_slot = slot.first->second;
    p.rate = cfg.fallback_rate;
    auto pit = parity.find({idx, q.maturity_days});
    if (pit != parity.end()) {
      try {
        ImpliedForward fwd =
            implied_forward(q.underlying_close, pit->second, cfg.carry_rate, q.maturity_days);
        p.rate = fwd.rate_per_period;
        p.has_pairs = true;
      } catch (const numeric_error&) {
        out.skipped.push_back(q.date + ": degenerate implied forward, using fallback rate");
      }
    }
    plans.push_back(p);
  }

  // -- fit models per inception date (deterministic seeds by date order) --
  std::vector<long> fit_idx(fit_slot_of_idx.size());
  for (const auto& [idx, slot] : fit_slot_of_idx) fit_idx[slot] = idx;
  std::vector<DateFit> fits(fit_idx.size());
  parallel_for(fit_idx.size(), cfg.threads, [&](std::size_t s) {
    DateFit& f = fits[s];
    long idx = fit_idx[s];
    Mat window = returns.block(idx - cfg.window_days + 1, 0, cfg.window_days, 1);
    EmConfig em = cfg.em;
    em.seed = mix64(cfg.em.seed ^ (0x8f1bbcdcull + static_cast<std::uint64_t>(s) * 0x2545f491ull));
    try {
      f.arhmm = em_fit(window, cfg.regimes, em).model;
      EmConfig em0 = em;
      em0.fix_phi_zero = true;
      f.hmm = em_fit(window, cfg.regimes, em0).model;
      f.gauss = em_fit(window, 1, em0).model;
      f.eta_arhmm = filter_path(f.arhmm, window).states.back().eta;
      f.eta_hmm = filter_path(f.hmm, window).states.back().eta;
      f.eta_gauss = filter_path(f.gauss, window).states.back().eta;
      f.stat_vol = std::sqrt(stationary_moments(f.arhmm).cov(0, 0));
      f.y_last = window(cfg.window_days - 1, 0);
      f.ok = true;
    } catch (const std::exception& e) {
      f.error = e.what();
    }
  });

  // -- evaluate quotes --
  const int nstrat = static_cast<int>(cfg.strategies.size());
  std::vector<std::vector<TradeRecord>> per_quote(plans.size());
  std::vector<std::string> per_quote_skip(plans.size());
  parallel_for(plans.size(), cfg.threads, [&](std::size_t pi) {
    const QuotePlan& plan = plans[pi];
    const OptionQuote& q = quotes[plan.quote];
    const DateFit& fit = fits[plan.fit_slot];
    if (!fit.ok) {
      per_quote_skip[pi] = q.date + ": model fit failed (" + fit.error + ")";
      return;
    }
    const int n = q.maturity_days;
    const double f = plan.rate;
    Normalized nm = normalize_to_100(q.underlying_close, q.strike);
    double mid = q.mid * nm.scale;
    std::vector<double> rates = hedge::constant_rates(n, f);
    std::vector<double> beta(n + 1, 1.0);
    for (int t = 1; t <= n; ++t) beta[t] = beta[t - 1] * std::exp(-f);
    hedge::Payoff payoff =
        q.kind == OptionKind::call ? hedge::Payoff::call(nm.strike) : hedge::Payoff::put(nm.strike);

    // realized discounted path over the life of the trade
    std::vector<double> sd(n + 1), ypath(n + 1);
    sd[0] = 100.0;
    ypath[0] = fit.y_last;
    for (int t = 1; t <= n; ++t) {
      ypath[t] = returns(plan.idx + t, 0);
      sd[t] = sd[t - 1] * std::exp(ypath[t] - f);
    }
    double terminal = payoff.discounted(sd[n], beta[n]);

    auto make_record = [&](StrategyKind k, double v0, double err) {
      TradeRecord r;
      r.date = q.date;
      r.strategy = k;
      r.kind = q.kind;
      r.strike = nm.strike;
      r.maturity_days = n;
      r.market_mid = mid;
      r.model_price = v0;
      r.bias = mid - v0;
      r.side = mid > v0 ? 1 : (mid < v0 ? -1 : 0);
      r.hedging_error = err;
      r.pnl = r.side * ((mid - v0) - err);
      return r;
    };

    std::vector<TradeRecord>& recs = per_quote[pi];
    for (StrategyKind sk : cfg.strategies) {
      try {
        if (sk == StrategyKind::oh_arhmm || sk == StrategyKind::oh_hmm ||
            sk == StrategyKind::oh_bs) {
          const ArhmmModel& model = sk == StrategyKind::oh_arhmm
                                        ? fit.arhmm
                                        : (sk == StrategyKind::oh_hmm ? fit.hmm : fit.gauss);
          const Vec& eta0 = sk == StrategyKind::oh_arhmm
                                ? fit.eta_arhmm
                                : (sk == StrategyKind::oh_hmm ? fit.eta_hmm : fit.eta_gauss);
          hedge::GridSpec gs = cfg.grids;
          gs.align_s = beta[n] * nm.strike;
          hedge::Grids grids = hedge::build_grids(model, n, 100.0, rates, gs);
          hedge::HedgeConfig hc;
          hc.n_steps = n;
          hc.rates = rates;
          hc.y_grid = grids.y_grid;
          hc.s_grid = grids.s_grid;
          hc.threads = 1;  // quotes already run in parallel
          hedge::HedgeTables tables = hedge::backward_tables(model, hc, payoff);

          FilterState fs;
          fs.t = 0;
          fs.eta = eta0;
          int regime = most_probable_regime(fs.eta);
          double v = hedge::price(tables, 100.0, fit.y_last, regime);
          double v0 = v;
          Vec yprev(1), ycur(1);
          for (int t = 1; t <= n; ++t) {
            double w = hedge::hedge_weight(tables, t, sd[t - 1], ypath[t - 1], regime, v);
            v += w * (sd[t] - sd[t - 1]);
            if (t == n) break;
            yprev(0) = ypath[t - 1];
            ycur(0) = ypath[t];
            fs = filter_step(tables.model, fs, yprev, ycur);
            regime = most_probable_regime(fs.eta);
          }
          recs.push_back(make_record(sk, v0, terminal - v));
        } else if (sk == StrategyKind::bs_delta) {
          double vol = fit.stat_vol;
          double v = black_scholes_price_delta(100.0, nm.strike, vol, f, 0.0, n, q.kind).price;
          double v0 = v;
          for (int t = 1; t <= n; ++t) {
            double s_raw = sd[t - 1] / beta[t - 1];
            double delta =
                black_scholes_price_delta(s_raw, nm.strike, vol, f, 0.0, n - t + 1, q.kind).delta;
            v += delta * (sd[t] - sd[t - 1]);
          }
          recs.push_back(make_record(sk, v0, terminal - v));
        } else {  // bs_implied
          double vol = implied_vol(mid, 100.0, nm.strike, f, 0.0, n, q.kind);
          double v = mid;  // reproduces the market by construction
          for (int t = 1; t <= n; ++t) {
            double s_raw = sd[t - 1] / beta[t - 1];
            if (cfg.requote) {
              double mid_t = cfg.requote(q, t - 1, s_raw, n - t + 1);
              if (mid_t > 0.0) {
                try {
                  vol = implied_vol(mid_t, s_raw, nm.strike, f, 0.0, n - t + 1, q.kind);
                } catch (const validation_error&) {
                  // hold the previous volatility when the requote is unusable
                }
              }
            }
            double delta =
                black_scholes_price_delta(s_raw, nm.strike, vol, f, 0.0, n - t + 1, q.kind).delta;
            v += delta * (sd[t] - sd[t - 1]);
          }
          TradeRecord r = make_record(sk, mid, terminal - v);
          r.bias = 0.0;
          r.side = 0;
          r.pnl = 0.0;
          recs.push_back(r);
        }
      } catch (const std::exception& e) {
        per_quote_skip[pi] += q.date + ": " + strategy_name(sk) + " failed (" + e.what() + "); ";
      }
    }
  });

  for (std::size_t pi = 0; pi < plans.size(); ++pi) {
    for (TradeRecord& r : per_quote[pi]) out.trades.push_back(std::move(r));
    if (!per_quote_skip[pi].empty()) out.skipped.push_back(per_quote_skip[pi]);
  }

  for (int s = 0; s < nstrat; ++s) {
    StrategyKind sk = cfg.strategies[s];
    StrategySummary sum;
    sum.strategy = sk;
    std::vector<double> pnls, errs;
    double bias_acc = 0.0;
    long bias_n = 0;
    for (const TradeRecord& r : out.trades) {
      if (r.strategy != sk) continue;
      errs.push_back(r.hedging_error);
      bias_acc += r.bias;
      ++bias_n;
      if (r.side != 0) pnls.push_back(r.pnl);
    }
    sum.n_trades = static_cast<int>(pnls.size());
    sum.mean_bias = bias_n > 0 ? bias_acc / bias_n : 0.0;
    if (!pnls.empty()) sum.pnl = summarize(pnls);
    if (!errs.empty()) sum.hedging_error = summarize(errs);
    out.summaries.push_back(sum);
  }
  return out;
}

}  // namespace arhmm::backtest
