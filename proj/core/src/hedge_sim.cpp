#include <cmath>
#include <random>
#include <vector>

#include "arhmm/filter.hpp"
#include "arhmm/gaussian.hpp"
#include "arhmm/hedge.hpp"
#include "arhmm/parallel.hpp"
#include "arhmm/rng.hpp"

namespace arhmm::hedge {

Strategy Strategy::optimal(std::string name, const HedgeTables* tables) {
  Strategy s;
  s.kind = Kind::optimal;
  s.name = std::move(name);
  s.tables = tables;
  return s;
}

Strategy Strategy::bs_delta(std::string name, const Payoff& payoff, double vol_per_period) {
  Strategy s;
  s.kind = Kind::bs_delta;
  s.name = std::move(name);
  s.bs_vol = vol_per_period;
  s.payoff = payoff;
  return s;
}

namespace {

// Black-Scholes price/delta with m periods to expiry, per-period volatility
// and a discount factor D over the remaining periods (raw spot units).
struct BsQuote {
  double price, delta;
};

BsQuote bs_remaining(OptionKind kind, double s, double strike, double vol, int m, double disc) {
  double tv = vol * vol * m;
  double kd = strike * disc;
  BsQuote q;
  if (tv <= 0.0 || s <= 0.0) {
    if (kind == OptionKind::call) {
      q.price = std::max(0.0, s - kd);
      q.delta = s > kd ? 1.0 : 0.0;
    } else {
      q.price = std::max(0.0, kd - s);
      q.delta = s < kd ? -1.0 : 0.0;
    }
    return q;
  }
  double sig = std::sqrt(tv);
  double d1 = (std::log(s / kd) + 0.5 * tv) / sig;
  double d2 = d1 - sig;
  if (kind == OptionKind::call) {
    q.price = s * norm_cdf(d1) - kd * norm_cdf(d2);
    q.delta = norm_cdf(d1);
  } else {
    q.price = kd * norm_cdf(-d2) - s * norm_cdf(-d1);
    q.delta = -norm_cdf(-d1);
  }
  return q;
}

void validate_sim(const ArhmmModel& sim_model, const HedgeSimConfig& cfg,
                  const std::vector<Strategy>& strategies) {
  if (sim_model.dim() != 1) throw validation_error("hedging simulation requires d = 1");
  if (cfg.n_paths < 1) throw validation_error("n_paths must be positive");
  if (cfg.n_steps < 1) throw validation_error("n_steps must be positive");
  if (cfg.rates.size() != static_cast<std::size_t>(cfg.n_steps))
    throw validation_error("rates must have one entry per step");
  if (!(cfg.s0 > 0.0)) throw validation_error("s0 must be positive");
  if (cfg.burn_in < 0) throw validation_error("burn_in must be >= 0");
  if (strategies.empty()) throw validation_error("no strategies given");
  for (const Strategy& st : strategies) {
    if (st.kind == Strategy::Kind::optimal) {
      if (!st.tables) throw validation_error("optimal strategy without tables");
      if (st.tables->cfg.n_steps != cfg.n_steps)
        throw validation_error("tables horizon does not match the simulation");
      if (st.tables->cfg.rates != cfg.rates)
        throw validation_error("tables rates do not match the simulation");
      if (cfg.policy == RegimePolicy::known &&
          st.tables->model.num_regimes() != sim_model.num_regimes())
        throw validation_error("known-regime policy needs matching regime counts");
    } else {
      if (!(st.bs_vol > 0.0)) throw validation_error("bs_delta strategy needs vol > 0");
      if (st.payoff.custom)
        throw validation_error("bs_delta strategy supports call/put payoffs only");
      if (!(st.payoff.strike > 0.0)) throw validation_error("bs_delta strike must be positive");
    }
  }
}

}  // namespace

std::vector<StrategyResult> simulate_hedging(const ArhmmModel& sim_model,
                                             const HedgeSimConfig& cfg,
                                             const std::vector<Strategy>& strategies) {
  validate_sim(sim_model, cfg, strategies);
  const int n = cfg.n_steps;
  const int ns = static_cast<int>(strategies.size());
  StationaryMoments sm = stationary_moments(sim_model);

  std::vector<double> beta(n + 1, 1.0);
  for (int t = 1; t <= n; ++t) beta[t] = beta[t - 1] * std::exp(-cfg.rates[t - 1]);

  std::vector<StrategyResult> out(ns);
  for (int s = 0; s < ns; ++s) {
    out[s].name = strategies[s].name;
    out[s].errors.resize(cfg.n_paths);
    out[s].v0.resize(cfg.n_paths);
    if (cfg.store_weights) out[s].weights.setZero(cfg.n_paths, n);
  }

  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t p) {
    std::mt19937_64 gen = substream(cfg.seed, stream_tag::kHedgePath, p);
    int tau = sample_regime(sm.nu, gen);
    Vec y0 = sm.mean;
    if (cfg.burn_in > 0) {
      SimulatedPath burn = simulate_path(sim_model, y0, tau, cfg.burn_in, gen);
      y0 = burn.y.row(cfg.burn_in - 1).transpose();
      tau = burn.regimes.back();
    }
    SimulatedPath path = simulate_path(sim_model, y0, tau, n, gen);

    // discounted spot path
    std::vector<double> sd(n + 1);
    sd[0] = cfg.s0;
    for (int t = 1; t <= n; ++t) sd[t] = sd[t - 1] * std::exp(path.y(t - 1, 0) - cfg.rates[t - 1]);

    for (int s = 0; s < ns; ++s) {
      const Strategy& st = strategies[s];
      double v;
      if (st.kind == Strategy::Kind::optimal) {
        const HedgeTables& T = *st.tables;
        FilterState fs;
        fs.t = 0;
        fs.eta = T.model.eta0();
        int regime =
            cfg.policy == RegimePolicy::known ? tau : most_probable_regime(fs.eta);
        v = price(T, cfg.s0, y0(0), regime);
        out[s].v0[p] = v;
        Vec yprev(1), ycur(1);
        for (int t = 1; t <= n; ++t) {
          double yp = t == 1 ? y0(0) : path.y(t - 2, 0);
          double w = hedge_weight(T, t, sd[t - 1], yp, regime, v);
          v += w * (sd[t] - sd[t - 1]);
          if (cfg.store_weights) out[s].weights(p, t - 1) = w;
          if (t == n) break;
          if (cfg.policy == RegimePolicy::known) {
            regime = path.regimes[t - 1];
          } else {
            yprev(0) = yp;
            ycur(0) = path.y(t - 1, 0);
            fs = filter_step(T.model, fs, yprev, ycur);
            regime = most_probable_regime(fs.eta);
          }
        }
        out[s].errors[p] = T.payoff.discounted(sd[n], beta[n]) - v;
      } else {
        BsQuote q0 = bs_remaining(st.payoff.kind, cfg.s0, st.payoff.strike, st.bs_vol, n, beta[n]);
        v = q0.price;
        out[s].v0[p] = v;
        for (int t = 1; t <= n; ++t) {
          double s_raw = sd[t - 1] / beta[t - 1];
          BsQuote q = bs_remaining(st.payoff.kind, s_raw, st.payoff.strike, st.bs_vol,
                                   n - (t - 1), beta[n] / beta[t - 1]);
          v += q.delta * (sd[t] - sd[t - 1]);
          if (cfg.store_weights) out[s].weights(p, t - 1) = q.delta;
        }
        out[s].errors[p] = st.payoff.discounted(sd[n], beta[n]) - v;
      }
    }
  });

  for (int s = 0; s < ns; ++s) out[s].stats = summarize(out[s].errors);
  return out;
}

StrategyResult simulate_hedging(const ArhmmModel& sim_model, const HedgeSimConfig& cfg,
                                const HedgeTables& tables) {
  std::vector<Strategy> one{Strategy::optimal("optimal", &tables)};
  return simulate_hedging(sim_model, cfg, one)[0];
}

}  // namespace arhmm::hedge
