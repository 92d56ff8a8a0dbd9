// End-to-end smoke tests of the installed command-line tool.  The binary path
// comes in through ARHMM_CLI_PATH; every invocation runs through std::system.
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "arhmm/filter.hpp"
#include "arhmm/io.hpp"
#include "arhmm/model.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace arhmm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() { return ARHMM_CLI_PATH; }

int run(const std::string& args) {
  std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  if (rc == -1 || !WIFEXITED(rc)) return -1;
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(bool(f));
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / ("arhmm_cli_" + std::to_string(::getpid()));
    fs::create_directories(root);
  }
  ~Workspace() { std::error_code ec; fs::remove_all(root, ec); }
  std::string dir(const std::string& name) const { return (root / name).string(); }
  std::string file(const std::string& name) const { return (root / name).string(); }
};

ArhmmModel one_regime_model() {
  std::vector<RegimeParams> regs(1);
  regs[0].mu = Vec::Constant(1, 2e-4);
  regs[0].phi = Mat::Constant(1, 1, 0.05);
  regs[0].cov = Mat::Constant(1, 1, 1.2e-4);
  return ArhmmModel(regs, Mat::Constant(1, 1, 1.0), Vec::Constant(1, 1.0));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help, version, and usage errors") {
  CHECK(run("--help") == 0);
  CHECK(run("estimate --help") == 0);
  CHECK(run("--version") == 0);
  CHECK(run("") == 64);                 // a subcommand is required
  CHECK(run("frobnicate") == 64);       // unknown subcommand
  CHECK(run("estimate --bogus x") == 64);  // unknown flag
  CHECK(run("estimate") == 64);         // missing required arguments
}

TEST_CASE("pipeline: simulate, estimate, filter, gof, hedge, backtest") {
  Workspace ws;
  std::string model_path = ws.file("true_model.json");
  save_model_json(model_path, one_regime_model());

  // simulate
  std::string sim_dir = ws.dir("sim");
  REQUIRE(run("simulate --model " + model_path +
              " --steps 400 --seed 3 --out-dir " + sim_dir) == 0);
  std::string returns_path = sim_dir + "/simulated_returns.csv";
  ReturnsSeries sim = load_returns_csv(returns_path);
  CHECK(sim.y.rows() == 400);
  CHECK(sim.dates.front() == "t000001");
  CHECK(fs::exists(sim_dir + "/simulated_regimes.csv"));

  // estimate (with the LRT block) and byte-identical rerun
  std::string fit_dir = ws.dir("fit");
  std::string est_args = "estimate " + returns_path +
                         " --regimes 1 --lrt --seed 1 --out-dir ";
  REQUIRE(run(est_args + fit_dir) == 0);
  ArhmmModel fitted = load_model_json(fit_dir + "/model.json");
  CHECK(fitted.num_regimes() == 1);
  json rep = json::parse(slurp(fit_dir + "/fit_report.json"));
  CHECK(rep["converged"].get<bool>());
  CHECK(rep["lrt"].contains("p_value"));
  CHECK(rep["n_obs"].get<int>() == 400);
  std::string rerun_dir = ws.dir("fit2");
  REQUIRE(run(est_args + rerun_dir) == 0);
  CHECK(slurp(fit_dir + "/model.json") == slurp(rerun_dir + "/model.json"));
  CHECK(slurp(fit_dir + "/fit_report.json") == slurp(rerun_dir + "/fit_report.json"));

  // filter: report log-lik agrees with an in-process run on the same inputs
  std::string flt_dir = ws.dir("flt");
  REQUIRE(run("filter " + returns_path + " --model " + fit_dir +
              "/model.json --out-dir " + flt_dir) == 0);
  CHECK(first_line(slurp(flt_dir + "/filtered.csv")) == "date,eta_1,map");
  json frep = json::parse(slurp(flt_dir + "/filter_report.json"));
  FilterResult fr = filter_path(fitted, sim.y);
  CHECK(frep["log_lik"].get<double>() == doctest::Approx(fr.log_lik).epsilon(1e-12));

  // gof, tiny bootstrap
  std::string gof_dir = ws.dir("gof");
  REQUIRE(run("gof " + returns_path +
              " --regimes 1 --nboot 8 --seed 5 --out-dir " + gof_dir) == 0);
  json gj = json::parse(slurp(gof_dir + "/gof.json"));
  CHECK(gj["s_n"].get<double>() > 0.0);
  CHECK(gj["p_value"].get<double>() >= 0.0);
  CHECK(gj["p_value"].get<double>() <= 1.0);
  CHECK(gj["n_boot_used"].get<int>() + gj["n_dropped"].get<int>() == 8);
  load_model_json(gof_dir + "/gof_model.json");  // must parse and validate

  // hedge-tables: cache round-trips through the repo loader
  std::string ht_dir = ws.dir("ht");
  std::string grid_args = " --ny 15 --ns 21 --grid-sim 2000 --grid-paths 300 ";
  REQUIRE(run("hedge-tables --model " + model_path +
              " --steps 3 --strike 100 --spot 100 --rate 0.01" + grid_args +
              "--out-dir " + ht_dir) == 0);
  hedge::HedgeTables tab = load_hedge_tables(ht_dir + "/hedge_tables.bin");
  CHECK(tab.n() == 3);
  CHECK(tab.K() == 15);
  CHECK(tab.M() == 21);
  json hj = json::parse(slurp(ht_dir + "/hedge_tables.json"));
  CHECK(hj["c0_stationary"].get<double>() > 0.0);
  CHECK(hj["c0_by_regime"].size() == 1);

  // hedge-sim: Table-8-shaped stats file, byte-identical across reruns
  std::string hsim = "hedge-sim --model " + model_path +
                     " --paths 40 --steps 3 --strike 100 --spot 100 --rate 0.01"
                     " --seed 7" + grid_args + "--out-dir ";
  std::string hs_dir = ws.dir("hs"), hs2_dir = ws.dir("hs2");
  REQUIRE(run(hsim + hs_dir) == 0);
  REQUIRE(run(hsim + hs2_dir) == 0);
  std::string stats = slurp(hs_dir + "/hedge_sim_stats.csv");
  CHECK(first_line(stats) == "metric,bs_delta,oh_true_model");
  CHECK(stats.find("\nRMSE,") != std::string::npos);
  CHECK(stats.find("Kurtosis,") != std::string::npos);
  CHECK(stats == slurp(hs2_dir + "/hedge_sim_stats.csv"));

  // backtest on a two-quote synthetic tape
  ReturnsSeries market;
  market.y = sim.y.topRows(140);
  for (int t = 1; t <= 140; ++t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "d%04d", t);
    market.dates.emplace_back(buf);
  }
  std::string market_path = ws.file("market_returns.csv");
  save_returns_csv(market_path, market);
  std::vector<backtest::OptionQuote> quotes(2);
  quotes[0].date = "d0101";
  quotes[0].kind = OptionKind::call;
  quotes[0].strike = 2000.0;
  quotes[0].maturity_days = 4;
  quotes[0].mid = 40.0;
  quotes[0].underlying_close = 2000.0;
  quotes[1] = quotes[0];
  quotes[1].kind = OptionKind::put;
  quotes[1].mid = 36.0;
  std::string quotes_path = ws.file("quotes.csv");
  save_quotes_csv(quotes_path, quotes);

  std::string bt_dir = ws.dir("bt");
  REQUIRE(run("backtest " + market_path + " " + quotes_path +
              " --window 30 --regimes 1 --strategies oh_bs,bs_implied"
              " --moneyness-band 0.9:1.1 --seed 2" + grid_args + "--out-dir " +
              bt_dir) == 0);
  auto trades = load_trades_csv(bt_dir + "/backtest_trades.csv");
  CHECK(trades.size() == 4);  // 2 quotes x 2 strategies
  std::string summary = slurp(bt_dir + "/backtest_summary.csv");
  CHECK(first_line(summary) == "metric,oh_bs,bs_implied");
  for (const char* row : {"\nRMSE,", "\nBias,", "\nVaR 1%,", "\nMedian,", "\nVaR 99%,"})
    CHECK(summary.find(row) != std::string::npos);
  CHECK(first_line(slurp(bt_dir + "/backtest_pnl.csv")) == "date,strategy,pnl,cum_pnl");
  CHECK(fs::exists(bt_dir + "/backtest_skipped.log"));
}

TEST_CASE("exit codes distinguish validation from numeric failures") {
  Workspace ws;
  CHECK(run("estimate /nonexistent_returns.csv --regimes 1 --out-dir " +
            ws.dir("x")) == 1);

  // constant series: the single-regime fit degenerates -> numeric failure
  ReturnsSeries flat;
  flat.y = Mat::Zero(50, 1);
  for (int t = 0; t < 50; ++t) flat.dates.push_back("t" + std::to_string(t));
  std::string flat_path = ws.file("flat.csv");
  save_returns_csv(flat_path, flat);
  CHECK(run("estimate " + flat_path + " --regimes 1 --out-dir " + ws.dir("y")) == 2);

  // malformed moneyness band is a validation error, not a usage error
  std::string model_path = ws.file("m.json");
  save_model_json(model_path, one_regime_model());
  CHECK(run("backtest " + flat_path + " " + flat_path + " --moneyness-band nope"
            " --out-dir " + ws.dir("z")) == 1);
}

TEST_CASE("ARHMM_OUT_DIR supplies the default output directory") {
  Workspace ws;
  std::string model_path = ws.file("m.json");
  save_model_json(model_path, one_regime_model());
  std::string env_dir = ws.dir("envout");
  std::string cmd = "ARHMM_OUT_DIR=" + env_dir + " " + cli_path() +
                    " simulate --model " + model_path +
                    " --steps 10 --seed 1 >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  CHECK(WEXITSTATUS(rc) == 0);
  CHECK(fs::exists(env_dir + "/simulated_returns.csv"));
}

}  // TEST_SUITE
