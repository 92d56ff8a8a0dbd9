// Command-line front end: estimate, filter, gof, simulate, hedge-tables,
// hedge-sim, backtest.  Every run is reproducible from its flags: identical
// invocations write byte-identical outputs, whatever --threads says.
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "arhmm/backtest.hpp"
#include "arhmm/estimate.hpp"
#include "arhmm/filter.hpp"
#include "arhmm/gof.hpp"
#include "arhmm/hedge.hpp"
#include "arhmm/io.hpp"
#include "arhmm/model.hpp"
#include "arhmm/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace arhmm;

namespace {

struct GlobalOpts {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

std::string default_out_dir() {
  const char* e = std::getenv("ARHMM_OUT_DIR");
  return (e && *e) ? std::string(e) : std::string(".");
}

void add_global(CLI::App* sub, GlobalOpts& g) {
  g.out_dir = default_out_dir();
  sub->add_option("--out-dir", g.out_dir,
                  "output directory (default $ARHMM_OUT_DIR or '.')");
  sub->add_option("--seed", g.seed, "RNG seed")->capture_default_str();
  sub->add_option("--threads", g.threads, "worker threads, 0 = all cores")
      ->capture_default_str();
}

std::string out_file(const GlobalOpts& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw validation_error("cannot open " + path + " for writing");
  f << text;
}

void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

OptionKind parse_kind(const std::string& s) {
  if (s == "call") return OptionKind::call;
  if (s == "put") return OptionKind::put;
  throw validation_error("--kind must be call or put");
}

// Closed EM knobs shared by estimate/gof/backtest.
struct EmOpts {
  int max_iter = 500;
  double tol = 1e-6;
  bool no_warm_start = false;
  bool no_sort = false;

  void add(CLI::App* sub) {
    sub->add_option("--max-iter", max_iter, "EM iteration cap")->capture_default_str();
    sub->add_option("--tol", tol, "EM log-likelihood gain tolerance")
        ->capture_default_str();
    sub->add_flag("--no-warm-start", no_warm_start, "skip the phi = 0 warm start");
    sub->add_flag("--no-sort", no_sort, "keep the raw regime order");
  }
  EmConfig config(std::uint64_t seed) const {
    EmConfig ec;
    ec.max_iter = max_iter;
    ec.tol = tol;
    ec.warm_start = !no_warm_start;
    ec.sort_regimes = !no_sort;
    ec.seed = seed;
    return ec;
  }
};

// Grid knobs shared by hedge-tables/hedge-sim/backtest.
struct GridOpts {
  hedge::GridSpec spec;
  void add(CLI::App* sub) {
    sub->add_option("--ny", spec.n_y, "return-grid nodes")->capture_default_str();
    sub->add_option("--ns", spec.n_s, "spot-grid nodes")->capture_default_str();
    sub->add_option("--coverage", spec.coverage, "grid range, stationary sigmas")
        ->capture_default_str();
    sub->add_option("--grid-seed", spec.seed, "seed of the range-finding sample")
        ->capture_default_str();
    sub->add_option("--grid-sim", spec.n_sim, "one-step draws for the y range")
        ->capture_default_str();
    sub->add_option("--grid-paths", spec.n_paths, "terminal draws for the s range")
        ->capture_default_str();
  }
};

int n_free_params(int l, int d, bool hmm) {
  int per_regime = d + (hmm ? 0 : d * d) + d * (d + 1) / 2;
  return l * per_regime + l * (l - 1);
}

void cmd_estimate(const GlobalOpts& g, const std::string& returns_path, int l, bool hmm,
                  bool lrt, const EmOpts& em) {
  ReturnsSeries series = load_returns_csv(returns_path);
  EmConfig ec = em.config(g.seed);
  ec.fix_phi_zero = hmm;
  EmResult fit = em_fit(series.y, l, ec);

  int n = static_cast<int>(series.y.rows());
  int d = static_cast<int>(series.y.cols());
  json rep;
  rep["regimes"] = l;
  rep["n_obs"] = n;
  rep["dim"] = d;
  rep["phi_fixed_zero"] = hmm;
  rep["log_lik"] = fit.log_lik;
  rep["iterations"] = fit.iterations;
  rep["converged"] = fit.converged;
  rep["restarts"] = fit.restarts;
  int k = n_free_params(l, d, hmm);
  rep["n_params"] = k;
  rep["aic"] = -2.0 * fit.log_lik + 2.0 * k;
  rep["bic"] = -2.0 * fit.log_lik + std::log(double(n - 1)) * k;
  rep["log_lik_trace"] = fit.log_lik_trace;
  if (lrt && !hmm) {
    EmConfig e0 = ec;
    e0.fix_phi_zero = true;
    EmResult null_fit = em_fit(series.y, l, e0);
    LrtResult t = likelihood_ratio_test(null_fit.log_lik, fit.log_lik, l, d);
    rep["lrt"] = {{"null_log_lik", null_fit.log_lik},
                  {"stat", t.stat},
                  {"df", t.df},
                  {"p_value", t.p_value},
                  {"negative_stat", t.negative_stat}};
  }

  std::string model_path = out_file(g, "model.json");
  save_model_json(model_path, fit.model);
  write_json(out_file(g, "fit_report.json"), rep);
  std::cout << "estimate: l=" << l << " loglik=" << format_double(fit.log_lik)
            << " iters=" << fit.iterations << (fit.converged ? "" : " NOT-CONVERGED")
            << " -> " << model_path << "\n";
}

void cmd_filter(const GlobalOpts& g, const std::string& returns_path,
                const std::string& model_path) {
  ArhmmModel m = load_model_json(model_path);
  ReturnsSeries series = load_returns_csv(returns_path);
  FilterResult fr = filter_path(m, series.y);

  std::string csv = "date";
  for (int i = 1; i <= m.num_regimes(); ++i) csv += ",eta_" + std::to_string(i);
  csv += ",map\n";
  for (std::size_t t = 0; t < fr.states.size(); ++t) {
    csv += series.dates[t];
    for (int i = 0; i < m.num_regimes(); ++i)
      csv += "," + format_double(fr.states[t].eta(i));
    csv += "," + std::to_string(most_probable_regime(fr.states[t].eta)) + "\n";
  }
  std::string out_path = out_file(g, "filtered.csv");
  write_text(out_path, csv);
  write_json(out_file(g, "filter_report.json"),
             json{{"log_lik", fr.log_lik},
                  {"n_obs", series.y.rows()},
                  {"regimes", m.num_regimes()}});
  std::cout << "filter: loglik=" << format_double(fr.log_lik) << " -> " << out_path
            << "\n";
}

void cmd_gof(const GlobalOpts& g, const std::string& returns_path, int l, int n_boot,
             int burn_in, double max_drop, const EmOpts& em) {
  ReturnsSeries series = load_returns_csv(returns_path);
  GofConfig cfg;
  cfg.n_boot = n_boot;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  cfg.em = em.config(g.seed);
  cfg.burn_in = burn_in;
  cfg.max_drop_frac = max_drop;
  ArhmmModel fitted;
  GofResult res = parametric_bootstrap(series.y, l, cfg, &fitted);

  save_model_json(out_file(g, "gof_model.json"), fitted);
  std::string out_path = out_file(g, "gof.json");
  write_json(out_path, json{{"regimes", l},
                            {"s_n", res.s_n},
                            {"p_value", res.p_value},
                            {"n_boot_used", res.n_boot_used},
                            {"n_dropped", res.n_dropped},
                            {"log_lik", res.log_lik},
                            {"em_iterations", res.em_iterations},
                            {"seed", g.seed}});
  std::cout << "gof: l=" << l << " s_n=" << format_double(res.s_n)
            << " p=" << format_double(res.p_value) << " -> " << out_path << "\n";
}

void cmd_simulate(const GlobalOpts& g, const std::string& model_path, int steps,
                  int burn_in, const std::string& start) {
  ArhmmModel m = load_model_json(model_path);
  StationaryMoments sm = stationary_moments(m);
  Vec start_dist = start == "prior" ? m.eta0() : sm.nu;
  std::mt19937_64 gen = substream(g.seed, stream_tag::kSimulate);
  int tau0 = sample_regime(start_dist, gen);
  SimulatedPath path = simulate_path(m, sm.mean, tau0, steps + burn_in, gen);

  ReturnsSeries series;
  series.y = path.y.bottomRows(steps);
  char buf[16];
  for (int t = 1; t <= steps; ++t) {
    std::snprintf(buf, sizeof(buf), "t%06d", t);
    series.dates.emplace_back(buf);
  }
  std::string ret_path = out_file(g, "simulated_returns.csv");
  save_returns_csv(ret_path, series);

  std::string reg = "date,regime\n";
  for (int t = 0; t < steps; ++t)
    reg += series.dates[t] + "," +
           std::to_string(path.regimes[path.regimes.size() - steps + t]) + "\n";
  write_text(out_file(g, "simulated_regimes.csv"), reg);
  std::cout << "simulate: " << steps << " steps (burn-in " << burn_in << ") -> "
            << ret_path << "\n";
}

struct ContractOpts {
  int steps = 0;
  double strike = 0.0;
  double spot = 100.0;
  double rate = 0.01;  // annual, continuous
  double ppy = 252.0;  // periods per year
  std::string kind = "call";

  void add(CLI::App* sub, bool need_steps = true) {
    auto* s = sub->add_option("--steps", steps, "hedging periods to expiry");
    if (need_steps) s->required();
    sub->add_option("--strike", strike, "strike, same units as --spot")->required();
    sub->add_option("--spot", spot, "spot at inception")->capture_default_str();
    sub->add_option("--rate", rate, "annual continuous short rate")
        ->capture_default_str();
    sub->add_option("--periods-per-year", ppy, "periods per year for --rate")
        ->capture_default_str();
    sub->add_option("--kind", kind, "call or put")->capture_default_str();
  }
  double rate_per_period() const { return rate / ppy; }
  std::vector<double> rates() const {
    return hedge::constant_rates(steps, rate_per_period());
  }
  hedge::Payoff payoff() const {
    return parse_kind(kind) == OptionKind::call ? hedge::Payoff::call(strike)
                                                : hedge::Payoff::put(strike);
  }
};

hedge::HedgeTables build_tables(const ArhmmModel& m, const ContractOpts& c,
                                const GridOpts& grid, std::size_t threads,
                                int mc_draws, std::uint64_t mc_seed) {
  std::vector<double> rates = c.rates();
  hedge::GridSpec spec = grid.spec;
  if (spec.align_s == 0.0) {
    double beta_n = 1.0;
    for (double r : rates) beta_n *= std::exp(-r);
    spec.align_s = beta_n * c.strike;
  }
  hedge::Grids grids = hedge::build_grids(m, c.steps, c.spot, rates, spec);
  hedge::HedgeConfig cfg;
  cfg.n_steps = c.steps;
  cfg.rates = rates;
  cfg.y_grid = grids.y_grid;
  cfg.s_grid = grids.s_grid;
  cfg.threads = threads;
  if (mc_draws > 0) return hedge::mc_backward_tables(m, cfg, c.payoff(), mc_draws, mc_seed);
  return hedge::backward_tables(m, cfg, c.payoff());
}

void cmd_hedge_tables(const GlobalOpts& g, const std::string& model_path,
                      const ContractOpts& c, const GridOpts& grid, int mc_draws) {
  ArhmmModel m = load_model_json(model_path);
  hedge::HedgeTables tables = build_tables(m, c, grid, g.threads, mc_draws, g.seed);

  StationaryMoments sm = stationary_moments(m);
  double y0 = sm.mean(0);
  json prices = json::array();
  for (int i = 0; i < m.num_regimes(); ++i)
    prices.push_back(hedge::price(tables, c.spot, y0, i));
  std::string bin_path = out_file(g, "hedge_tables.bin");
  save_hedge_tables(bin_path, tables);
  double c0 = hedge::price_blended(tables, c.spot, y0, sm.nu);
  write_json(out_file(g, "hedge_tables.json"),
             json{{"kind", c.kind},
                  {"strike", c.strike},
                  {"spot", c.spot},
                  {"steps", c.steps},
                  {"rate_per_period", c.rate_per_period()},
                  {"method", mc_draws > 0 ? "mc" : "semi-exact"},
                  {"c0_by_regime", prices},
                  {"c0_stationary", c0},
                  {"y_nodes", tables.K()},
                  {"s_nodes", tables.M()}});
  std::cout << "hedge-tables: C0=" << format_double(c0) << " (" << tables.M() << "x"
            << tables.K() << " nodes) -> " << bin_path << "\n";
}

void cmd_hedge_sim(const GlobalOpts& g, const std::string& model_path,
                   std::vector<std::string> hedge_model_paths, const ContractOpts& c,
                   const GridOpts& grid, int n_paths, int burn_in,
                   const std::string& policy, bool no_bs, int mc_draws) {
  ArhmmModel sim_model = load_model_json(model_path);
  if (hedge_model_paths.empty()) hedge_model_paths.push_back(model_path);

  // one table set (plus an optional MC twin) per hedging model
  std::vector<hedge::HedgeTables> tables;
  std::vector<std::string> names;
  for (const std::string& p : hedge_model_paths) {
    ArhmmModel hm = p == model_path ? sim_model : load_model_json(p);
    std::string stem = fs::path(p).stem().string();
    tables.push_back(build_tables(hm, c, grid, g.threads, 0, g.seed));
    names.push_back("oh_" + stem);
    if (mc_draws > 0) {
      tables.push_back(build_tables(hm, c, grid, g.threads, mc_draws, g.seed));
      names.push_back("oh_" + stem + "_mc");
    }
  }

  std::vector<hedge::Strategy> strategies;
  StationaryMoments sm = stationary_moments(sim_model);
  if (!no_bs) {
    double vol = std::sqrt(sm.cov(0, 0));
    strategies.push_back(hedge::Strategy::bs_delta("bs_delta", c.payoff(), vol));
  }
  for (std::size_t i = 0; i < tables.size(); ++i)
    strategies.push_back(hedge::Strategy::optimal(names[i], &tables[i]));

  hedge::HedgeSimConfig cfg;
  cfg.n_paths = n_paths;
  cfg.n_steps = c.steps;
  cfg.rates = c.rates();
  cfg.s0 = c.spot;
  cfg.seed = g.seed;
  cfg.policy = policy == "known" ? hedge::RegimePolicy::known
                                 : hedge::RegimePolicy::most_probable;
  cfg.burn_in = burn_in;
  cfg.threads = g.threads;
  std::vector<hedge::StrategyResult> results =
      hedge::simulate_hedging(sim_model, cfg, strategies);

  std::string csv_path = out_file(g, "hedge_sim_stats.csv");
  write_text(csv_path, hedge_sim_summary_csv(results));
  json rep;
  rep["n_paths"] = n_paths;
  rep["steps"] = c.steps;
  rep["policy"] = policy;
  rep["seed"] = g.seed;
  json per = json::array();
  for (const hedge::StrategyResult& r : results) {
    double v0 = 0.0;
    for (double v : r.v0) v0 += v;
    v0 /= static_cast<double>(r.v0.size());
    per.push_back(json{{"name", r.name},
                       {"mean_v0", v0},
                       {"rmse", r.stats.rmse},
                       {"mean_error", r.stats.mean}});
  }
  rep["strategies"] = per;
  write_json(out_file(g, "hedge_sim_report.json"), rep);

  std::cout << "hedge-sim: " << n_paths << " paths";
  for (const hedge::StrategyResult& r : results)
    std::cout << "  " << r.name << " rmse=" << format_double(r.stats.rmse);
  std::cout << " -> " << csv_path << "\n";
}

void cmd_backtest(const GlobalOpts& g, const std::string& returns_path,
                  const std::string& quotes_path, int window, int regimes,
                  const std::string& strategies_csv, const std::string& band,
                  double carry_rate, double fallback_rate, const EmOpts& em,
                  const GridOpts& grid) {
  backtest::BacktestConfig cfg;
  cfg.window_days = window;
  cfg.regimes = regimes;
  cfg.carry_rate = carry_rate;
  cfg.fallback_rate = fallback_rate;
  cfg.em = em.config(g.seed);
  cfg.grids = grid.spec;
  cfg.threads = g.threads;

  auto parse_part = [&](const std::string& s) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
      throw validation_error("--moneyness-band must look like 0.9:1.1");
    return v;
  };
  auto colon = band.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == band.size())
    throw validation_error("--moneyness-band must look like 0.9:1.1");
  cfg.moneyness_lo = parse_part(band.substr(0, colon));
  cfg.moneyness_hi = parse_part(band.substr(colon + 1));

  if (!strategies_csv.empty()) {
    cfg.strategies.clear();
    std::stringstream ss(strategies_csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) cfg.strategies.push_back(backtest::strategy_from_name(tok));
    if (cfg.strategies.empty()) throw validation_error("--strategies is empty");
  }

  ReturnsSeries series = load_returns_csv(returns_path);
  std::vector<backtest::OptionQuote> quotes = load_quotes_csv(quotes_path);
  backtest::BacktestResult res =
      backtest::run_backtest(series.dates, series.y, quotes, cfg);

  save_trades_csv(out_file(g, "backtest_trades.csv"), res.trades);
  std::string sum_path = out_file(g, "backtest_summary.csv");
  write_text(sum_path, backtest_summary_csv(res));

  // running P&L per strategy in trade order, long format for plotting
  std::string pnl = "date,strategy,pnl,cum_pnl\n";
  std::map<backtest::StrategyKind, double> cum;
  for (const backtest::TradeRecord& t : res.trades) {
    cum[t.strategy] += t.pnl;
    pnl += t.date + "," + backtest::strategy_name(t.strategy) + "," +
           format_double(t.pnl) + "," + format_double(cum[t.strategy]) + "\n";
  }
  write_text(out_file(g, "backtest_pnl.csv"), pnl);

  std::string log;
  for (const std::string& s : res.skipped) log += s + "\n";
  write_text(out_file(g, "backtest_skipped.log"), log);

  std::size_t evaluated = res.summaries.empty()
                              ? 0
                              : res.trades.size() / res.summaries.size();
  std::cout << "backtest: " << evaluated << " quotes evaluated, " << res.skipped.size()
            << " skipped -> " << sum_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime-switching autoregressive time-series models and optimal hedging"};
  app.set_version_flag("--version", "arhmm 1.0.0");
  app.require_subcommand(1);

  // estimate
  GlobalOpts est_g;
  std::string est_returns;
  int est_l = 2;
  bool est_hmm = false, est_lrt = false;
  EmOpts est_em;
  CLI::App* est = app.add_subcommand("estimate", "fit an l-regime model by EM");
  est->add_option("returns", est_returns, "returns CSV")->required();
  est->add_option("--regimes", est_l, "number of regimes")->required();
  est->add_flag("--hmm", est_hmm, "freeze phi at 0");
  est->add_flag("--lrt", est_lrt, "also fit the phi = 0 null and report the LRT");
  est_em.add(est);
  add_global(est, est_g);
  est->callback([&] { cmd_estimate(est_g, est_returns, est_l, est_hmm, est_lrt, est_em); });

  // filter
  GlobalOpts fil_g;
  std::string fil_returns, fil_model;
  CLI::App* fil = app.add_subcommand("filter", "filtered regime probabilities");
  fil->add_option("returns", fil_returns, "returns CSV")->required();
  fil->add_option("--model", fil_model, "model JSON")->required();
  add_global(fil, fil_g);
  fil->callback([&] { cmd_filter(fil_g, fil_returns, fil_model); });

  // gof
  GlobalOpts gof_g;
  std::string gof_returns;
  int gof_l = 2, gof_nboot = 1000, gof_burn = 100;
  double gof_drop = 0.05;
  EmOpts gof_em;
  CLI::App* gof = app.add_subcommand("gof", "Cramer-von Mises test, parametric bootstrap");
  gof->add_option("returns", gof_returns, "returns CSV")->required();
  gof->add_option("--regimes", gof_l, "number of regimes")->required();
  gof->add_option("--nboot", gof_nboot, "bootstrap replicates")->capture_default_str();
  gof->add_option("--burn-in", gof_burn, "replicate burn-in steps")->capture_default_str();
  gof->add_option("--max-drop-frac", gof_drop, "tolerated refit failures")
      ->capture_default_str();
  gof_em.add(gof);
  add_global(gof, gof_g);
  gof->callback([&] {
    cmd_gof(gof_g, gof_returns, gof_l, gof_nboot, gof_burn, gof_drop, gof_em);
  });

  // simulate
  GlobalOpts sim_g;
  std::string sim_model, sim_start = "stationary";
  int sim_steps = 0, sim_burn = 100;
  CLI::App* sim = app.add_subcommand("simulate", "draw a path from a model");
  sim->add_option("--model", sim_model, "model JSON")->required();
  sim->add_option("--steps", sim_steps, "observations to keep")->required();
  sim->add_option("--burn-in", sim_burn, "discarded leading steps")->capture_default_str();
  sim->add_option("--start", sim_start, "initial regime law: stationary or prior")
      ->capture_default_str();
  add_global(sim, sim_g);
  sim->callback([&] { cmd_simulate(sim_g, sim_model, sim_steps, sim_burn, sim_start); });

  // hedge-tables
  GlobalOpts ht_g;
  std::string ht_model;
  ContractOpts ht_c;
  GridOpts ht_grid;
  int ht_mc = 0;
  CLI::App* ht = app.add_subcommand("hedge-tables", "backward-induction table build");
  ht->add_option("--model", ht_model, "model JSON (d = 1)")->required();
  ht_c.add(ht);
  ht_grid.add(ht);
  ht->add_option("--mc", ht_mc, "Monte Carlo draws per step (0 = semi-exact)")
      ->capture_default_str();
  add_global(ht, ht_g);
  ht->callback([&] { cmd_hedge_tables(ht_g, ht_model, ht_c, ht_grid, ht_mc); });

  // hedge-sim
  GlobalOpts hs_g;
  std::string hs_model, hs_policy = "filtered";
  std::vector<std::string> hs_hedge_models;
  ContractOpts hs_c;
  GridOpts hs_grid;
  int hs_paths = 10000, hs_burn = 100, hs_mc = 0;
  bool hs_no_bs = false;
  CLI::App* hs = app.add_subcommand("hedge-sim", "simulated hedging comparison");
  hs->add_option("--model", hs_model, "data-generating model JSON")->required();
  hs->add_option("--hedge-model", hs_hedge_models,
                 "hedging model JSON (repeatable; default: --model)");
  hs->add_option("--paths", hs_paths, "simulated paths")->capture_default_str();
  hs_c.add(hs);
  hs_grid.add(hs);
  hs->add_option("--burn-in", hs_burn, "path burn-in steps")->capture_default_str();
  hs->add_option("--policy", hs_policy, "regime information: filtered or known")
      ->capture_default_str();
  hs->add_flag("--no-bs", hs_no_bs, "drop the Black-Scholes delta benchmark");
  hs->add_option("--mc-draws", hs_mc, "add an MC-table twin per hedging model")
      ->capture_default_str();
  add_global(hs, hs_g);
  hs->callback([&] {
    if (hs_policy != "filtered" && hs_policy != "known")
      throw validation_error("--policy must be filtered or known");
    cmd_hedge_sim(hs_g, hs_model, hs_hedge_models, hs_c, hs_grid, hs_paths, hs_burn,
                  hs_policy, hs_no_bs, hs_mc);
  });

  // backtest
  GlobalOpts bt_g;
  std::string bt_returns, bt_quotes, bt_strategies, bt_band = "0.9:1.1";
  int bt_window = 2000, bt_regimes = 3;
  double bt_carry = 0.0, bt_fallback = 0.0;
  EmOpts bt_em;
  GridOpts bt_grid;
  CLI::App* bt = app.add_subcommand("backtest", "hedging backtest on an option tape");
  bt->add_option("returns", bt_returns, "returns CSV")->required();
  bt->add_option("quotes", bt_quotes, "quotes CSV")->required();
  bt->add_option("--window", bt_window, "trailing estimation window, days")
      ->capture_default_str();
  bt->add_option("--regimes", bt_regimes, "regimes for the switching fits")
      ->capture_default_str();
  bt->add_option("--strategies", bt_strategies,
                 "comma list: oh_arhmm,oh_hmm,oh_bs,bs_delta,bs_implied");
  bt->add_option("--moneyness-band", bt_band, "strike/spot band lo:hi")
      ->capture_default_str();
  bt->add_option("--carry-rate", bt_carry, "per-period rate on the parity leg")
      ->capture_default_str();
  bt->add_option("--fallback-rate", bt_fallback,
                 "per-period rate when no parity pair exists")
      ->capture_default_str();
  bt_em.add(bt);
  bt_grid.add(bt);
  add_global(bt, bt_g);
  bt->callback([&] {
    cmd_backtest(bt_g, bt_returns, bt_quotes, bt_window, bt_regimes, bt_strategies,
                 bt_band, bt_carry, bt_fallback, bt_em, bt_grid);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help/--version land here with exit code 0; real usage errors get 64
    int rc = app.exit(e);
    return rc == 0 ? 0 : 64;
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
