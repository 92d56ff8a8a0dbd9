// Microbenchmarks for the hot paths: filtering, smoothing, EM, the backward
// table builder and the hedging simulator.
#include <benchmark/benchmark.h>

#include <vector>

#include "arhmm/estimate.hpp"
#include "arhmm/filter.hpp"
#include "arhmm/gof.hpp"
#include "arhmm/hedge.hpp"
#include "arhmm/model.hpp"

using namespace arhmm;

namespace {

// three daily-scale regimes, rough volatility ladder
ArhmmModel three_regime() {
  std::vector<RegimeParams> regs(3);
  const double mu[3] = {1.4e-3, 2.8e-4, -8.6e-4};
  const double sd[3] = {2.1e-3, 6.9e-3, 1.19e-2};
  const double phi[3] = {-0.14, 0.03, -0.19};
  for (int j = 0; j < 3; ++j) {
    regs[j].mu = Vec::Constant(1, mu[j]);
    regs[j].phi = Mat::Constant(1, 1, phi[j]);
    regs[j].cov = Mat::Constant(1, 1, sd[j] * sd[j]);
  }
  Mat q(3, 3);
  q << 0.0, 0.96, 0.04, 0.32, 0.68, 0.0, 0.0, 0.04, 0.96;
  return ArhmmModel(regs, q, Vec::Constant(3, 1.0 / 3.0));
}

Mat sample_series(int n) {
  ArhmmModel m = three_regime();
  return simulate_path(m, Vec::Zero(1), 1, n, std::uint64_t(42)).y;
}

void bm_filter(benchmark::State& state) {
  ArhmmModel m = three_regime();
  Mat y = sample_series(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(filter_path(m, y).log_lik);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_e_step(benchmark::State& state) {
  ArhmmModel m = three_regime();
  Mat y = sample_series(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(e_step(m, y).log_lik);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_em_fit(benchmark::State& state) {
  Mat y = sample_series(1000);
  EmConfig cfg;
  cfg.max_iter = 25;
  cfg.tol = 0.0;  // fixed iteration count for a stable workload
  cfg.max_restarts = 0;
  cfg.seed = 5;
  for (auto _ : state) benchmark::DoNotOptimize(em_fit(y, 2, cfg).log_lik);
}

void bm_cvm(benchmark::State& state) {
  ArhmmModel m = three_regime();
  Mat y = sample_series(500);
  Mat u = rosenblatt_transform(m, y);
  for (auto _ : state) benchmark::DoNotOptimize(cvm_statistic(u));
}

void bm_backward_tables(benchmark::State& state) {
  ArhmmModel m = three_regime();
  int steps = static_cast<int>(state.range(0));
  std::vector<double> rates = hedge::constant_rates(steps, 0.01 / 252.0);
  hedge::GridSpec spec;
  spec.n_y = 41;
  spec.n_s = 81;
  spec.n_sim = 20000;
  spec.n_paths = 2000;
  hedge::Grids grids = hedge::build_grids(m, steps, 100.0, rates, spec);
  hedge::HedgeConfig cfg;
  cfg.n_steps = steps;
  cfg.rates = rates;
  cfg.y_grid = grids.y_grid;
  cfg.s_grid = grids.s_grid;
  cfg.threads = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        hedge::backward_tables(m, cfg, hedge::Payoff::call(100.0)).psi.size());
}

void bm_hedge_sim(benchmark::State& state) {
  ArhmmModel m = three_regime();
  const int steps = 21;
  std::vector<double> rates = hedge::constant_rates(steps, 0.01 / 252.0);
  hedge::GridSpec spec;
  spec.n_y = 41;
  spec.n_s = 81;
  spec.n_sim = 20000;
  spec.n_paths = 2000;
  hedge::Grids grids = hedge::build_grids(m, steps, 100.0, rates, spec);
  hedge::HedgeConfig tcfg;
  tcfg.n_steps = steps;
  tcfg.rates = rates;
  tcfg.y_grid = grids.y_grid;
  tcfg.s_grid = grids.s_grid;
  tcfg.threads = 1;
  hedge::HedgeTables tables = hedge::backward_tables(m, tcfg, hedge::Payoff::call(100.0));

  std::vector<hedge::Strategy> strategies{hedge::Strategy::optimal("oh", &tables)};
  hedge::HedgeSimConfig cfg;
  cfg.n_paths = static_cast<int>(state.range(0));
  cfg.n_steps = steps;
  cfg.rates = rates;
  cfg.seed = 9;
  cfg.threads = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(hedge::simulate_hedging(m, cfg, strategies)[0].stats.rmse);
  state.SetItemsProcessed(state.iterations() * cfg.n_paths);
}

BENCHMARK(bm_filter)->Arg(2520)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_e_step)->Arg(2520)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_em_fit)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_cvm)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_backward_tables)->Arg(21)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_hedge_sim)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
