#include "arhmm/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace arhmm {

using nlohmann::json;

std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw validation_error("cannot parse " + what + " from '" + s + "'");
  return v;
}

long parse_long(const std::string& s, const std::string& what) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw validation_error("cannot parse " + what + " from '" + s + "'");
  return v;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream outf(path);
  if (!outf) throw validation_error("cannot open " + path + " for writing");
  return outf;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (long j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

Vec vec_from_json(const json& a, const std::string& what) {
  if (!a.is_array()) throw validation_error(what + " must be an array");
  Vec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw validation_error(what + " must hold numbers");
    v(static_cast<long>(i)) = a[i].get<double>();
  }
  return v;
}

Mat mat_from_json(const json& a, const std::string& what) {
  if (!a.is_array() || a.empty()) throw validation_error(what + " must be a nonempty array");
  std::size_t cols = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_array()) throw validation_error(what + " must be an array of rows");
    if (i == 0)
      cols = a[i].size();
    else if (a[i].size() != cols)
      throw validation_error(what + " rows have inconsistent lengths");
  }
  Mat m(a.size(), cols);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      if (!a[i][j].is_number()) throw validation_error(what + " must hold numbers");
      m(static_cast<long>(i), static_cast<long>(j)) = a[i][j].get<double>();
    }
  return m;
}

}  // namespace

ReturnsSeries load_returns_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw validation_error(path + " is empty");
  std::vector<std::string> head = split_csv_line(line);
  if (head.empty() || head[0] != "date")
    throw validation_error(path + ": first column must be 'date'");
  int d = 0;
  if (head.size() >= 2 && head[1] == "logret") {
    d = 1;
  } else {
    while (1 + d < static_cast<int>(head.size()) &&
           head[1 + d] == "logret_" + std::to_string(d + 1))
      ++d;
    if (d == 0) throw validation_error(path + ": expected 'logret' or 'logret_1...' columns");
  }

  std::vector<std::string> dates;
  std::vector<double> vals;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f = split_csv_line(line);
    if (static_cast<int>(f.size()) < 1 + d)
      throw validation_error(path + ":" + std::to_string(lineno) + ": too few columns");
    dates.push_back(f[0]);
    for (int k = 0; k < d; ++k)
      vals.push_back(parse_double(f[1 + k], "return at line " + std::to_string(lineno)));
  }
  if (dates.empty()) throw validation_error(path + " has no data rows");

  ReturnsSeries s;
  s.dates = std::move(dates);
  s.y.resize(static_cast<long>(s.dates.size()), d);
  for (long i = 0; i < s.y.rows(); ++i)
    for (int k = 0; k < d; ++k) s.y(i, k) = vals[static_cast<std::size_t>(i) * d + k];
  return s;
}

void save_returns_csv(const std::string& path, const ReturnsSeries& series) {
  if (series.dates.size() != static_cast<std::size_t>(series.y.rows()))
    throw validation_error("dates and returns length mismatch");
  std::ofstream outf = open_out(path);
  int d = static_cast<int>(series.y.cols());
  outf << "date";
  if (d == 1) {
    outf << ",logret";
  } else {
    for (int k = 1; k <= d; ++k) outf << ",logret_" << k;
  }
  outf << "\n";
  for (long i = 0; i < series.y.rows(); ++i) {
    outf << series.dates[i];
    for (int k = 0; k < d; ++k) outf << "," << format_double(series.y(i, k));
    outf << "\n";
  }
}

namespace {

ArhmmModel model_from_json(const json& j) {
  if (!j.contains("regimes") || !j["regimes"].is_array() || j["regimes"].empty())
    throw validation_error("model json needs a nonempty 'regimes' array");
  std::vector<RegimeParams> regimes;
  for (const json& r : j["regimes"]) {
    RegimeParams p;
    p.mu = vec_from_json(r.at("mu"), "mu");
    p.phi = mat_from_json(r.at("phi"), "phi");
    p.cov = mat_from_json(r.at("cov"), "cov");
    regimes.push_back(std::move(p));
  }
  Mat q = mat_from_json(j.at("q"), "q");
  Vec eta0;
  if (j.contains("eta0")) eta0 = vec_from_json(j["eta0"], "eta0");
  if (j.contains("l") && j["l"].get<long>() != static_cast<long>(regimes.size()))
    throw validation_error("model json 'l' disagrees with the regimes array");
  if (j.contains("d") && j["d"].get<long>() != regimes[0].mu.size())
    throw validation_error("model json 'd' disagrees with the regime dimension");
  return ArhmmModel(std::move(regimes), std::move(q), std::move(eta0));
}

}  // namespace

ArhmmModel model_from_json_text(const std::string& text) {
  try {
    return model_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw validation_error(std::string("model json: ") + e.what());
  }
}

std::string model_to_json_text(const ArhmmModel& m) {
  json j;
  j["d"] = m.dim();
  j["l"] = m.num_regimes();
  json regs = json::array();
  for (int i = 0; i < m.num_regimes(); ++i) {
    json r;
    r["mu"] = vec_to_json(m.regime(i).mu);
    r["phi"] = mat_to_json(m.regime(i).phi);
    r["cov"] = mat_to_json(m.regime(i).cov);
    regs.push_back(std::move(r));
  }
  j["regimes"] = std::move(regs);
  j["q"] = mat_to_json(m.q());
  j["eta0"] = vec_to_json(m.eta0());
  return j.dump(2);
}

ArhmmModel load_model_json(const std::string& path) {
  std::ifstream in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return model_from_json_text(ss.str());
  } catch (const validation_error& e) {
    throw validation_error(path + ": " + e.what());
  }
}

void save_model_json(const std::string& path, const ArhmmModel& m) {
  std::ofstream outf = open_out(path);
  outf << model_to_json_text(m) << "\n";
}

std::vector<backtest::OptionQuote> load_quotes_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw validation_error(path + " is empty");
  std::vector<std::string> head = split_csv_line(line);
  const std::vector<std::string> want = {"date",           "kind", "strike",
                                         "maturity_days",  "mid",  "underlying_close"};
  if (head.size() < want.size() ||
      !std::equal(want.begin(), want.end(), head.begin()))
    throw validation_error(path + ": expected header date,kind,strike,maturity_days,mid,"
                                  "underlying_close");
  std::vector<backtest::OptionQuote> quotes;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() < want.size())
      throw validation_error(path + ":" + std::to_string(lineno) + ": too few columns");
    backtest::OptionQuote q;
    q.date = f[0];
    if (f[1] == "call")
      q.kind = OptionKind::call;
    else if (f[1] == "put")
      q.kind = OptionKind::put;
    else
      throw validation_error(path + ":" + std::to_string(lineno) + ": kind must be call|put");
    q.strike = parse_double(f[2], "strike at line " + std::to_string(lineno));
    q.maturity_days =
        static_cast<int>(parse_long(f[3], "maturity_days at line " + std::to_string(lineno)));
    q.mid = parse_double(f[4], "mid at line " + std::to_string(lineno));
    q.underlying_close =
        parse_double(f[5], "underlying_close at line " + std::to_string(lineno));
    quotes.push_back(std::move(q));
  }
  return quotes;
}

void save_quotes_csv(const std::string& path,
                     const std::vector<backtest::OptionQuote>& quotes) {
  std::ofstream outf = open_out(path);
  outf << "date,kind,strike,maturity_days,mid,underlying_close\n";
  for (const backtest::OptionQuote& q : quotes) {
    outf << q.date << "," << (q.kind == OptionKind::call ? "call" : "put") << ","
         << format_double(q.strike) << "," << q.maturity_days << "," << format_double(q.mid)
         << "," << format_double(q.underlying_close) << "\n";
  }
}

namespace {

constexpr char kTablesMagic[8] = {'A', 'R', 'H', 'T', 'A', 'B', 'L', 'E'};
constexpr std::uint32_t kTablesVersion = 1;

void write_block(std::ofstream& f, const std::vector<double>& v) {
  std::uint64_t n = v.size();
  f.write(reinterpret_cast<const char*>(&n), sizeof(n));
  if (n) f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * 8));
}

std::vector<double> read_block(std::ifstream& f, std::uint64_t expect) {
  std::uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!f || n != expect) throw validation_error("hedge table cache is corrupt (block size)");
  std::vector<double> v(n);
  if (n) f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
  if (!f) throw validation_error("hedge table cache is corrupt (truncated block)");
  return v;
}

}  // namespace

void save_hedge_tables(const std::string& path, const hedge::HedgeTables& tables) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw validation_error("cannot open " + path + " for writing");

  json head;
  head["model"] = json::parse(model_to_json_text(tables.model));
  head["n_steps"] = tables.cfg.n_steps;
  head["rates"] = tables.cfg.rates;
  head["y_grid"] = vec_to_json(tables.cfg.y_grid);
  head["s_grid"] = vec_to_json(tables.cfg.s_grid);
  if (tables.payoff.custom)
    throw validation_error("custom payoffs cannot be cached");
  head["payoff_kind"] = tables.payoff.kind == OptionKind::call ? "call" : "put";
  head["strike"] = tables.payoff.strike;
  std::string htext = head.dump();

  f.write(kTablesMagic, sizeof(kTablesMagic));
  f.write(reinterpret_cast<const char*>(&kTablesVersion), sizeof(kTablesVersion));
  std::uint64_t hlen = htext.size();
  f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  f.write(htext.data(), static_cast<std::streamsize>(hlen));

  for (int t = 1; t <= tables.cfg.n_steps; ++t) {
    write_block(f, tables.g[t]);
    write_block(f, tables.a[t]);
    write_block(f, tables.b[t]);
    write_block(f, tables.h[t]);
  }
  for (int t = 0; t <= tables.cfg.n_steps; ++t) write_block(f, tables.psi[t]);
  for (int t = 1; t <= tables.cfg.n_steps; ++t) write_block(f, tables.aa[t]);
  if (!f) throw validation_error("write failed for " + path);
}

hedge::HedgeTables load_hedge_tables(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw validation_error("cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kTablesMagic, sizeof(magic)) != 0)
    throw validation_error(path + " is not a hedge table cache");
  std::uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!f || version != kTablesVersion)
    throw validation_error(path + ": unsupported cache version");
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!f || hlen > (1ull << 30)) throw validation_error(path + ": corrupt header");
  std::string htext(hlen, '\0');
  f.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw validation_error(path + ": truncated header");

  json head = json::parse(htext, nullptr, false);
  if (head.is_discarded()) throw validation_error(path + ": corrupt header json");

  hedge::HedgeTables T;
  T.model = model_from_json_text(head.at("model").dump());
  T.cfg.n_steps = head.at("n_steps").get<int>();
  T.cfg.rates = head.at("rates").get<std::vector<double>>();
  T.cfg.y_grid = vec_from_json(head.at("y_grid"), "y_grid");
  T.cfg.s_grid = vec_from_json(head.at("s_grid"), "s_grid");
  std::string pk = head.at("payoff_kind").get<std::string>();
  T.payoff = pk == "call" ? hedge::Payoff::call(head.at("strike").get<double>())
                          : hedge::Payoff::put(head.at("strike").get<double>());

  int n = T.cfg.n_steps;
  if (n < 1 || T.cfg.rates.size() != static_cast<std::size_t>(n))
    throw validation_error(path + ": corrupt header (steps/rates)");
  std::uint64_t K = static_cast<std::uint64_t>(T.cfg.y_grid.size());
  std::uint64_t M = static_cast<std::uint64_t>(T.cfg.s_grid.size());
  std::uint64_t l = static_cast<std::uint64_t>(T.model.num_regimes());
  T.beta.assign(n + 1, 1.0);
  for (int t = 1; t <= n; ++t) T.beta[t] = T.beta[t - 1] * std::exp(-T.cfg.rates[t - 1]);

  T.g.assign(n + 1, {});
  T.a.assign(n + 1, {});
  T.b.assign(n + 1, {});
  T.h.assign(n + 1, {});
  T.psi.assign(n + 1, {});
  T.aa.assign(n + 1, {});
  for (int t = 1; t <= n; ++t) {
    T.g[t] = read_block(f, l * K);
    T.a[t] = read_block(f, l * K);
    T.b[t] = read_block(f, l * K);
    T.h[t] = read_block(f, l * K);
  }
  for (int t = 0; t <= n; ++t) T.psi[t] = read_block(f, l * M * K);
  for (int t = 1; t <= n; ++t) T.aa[t] = read_block(f, l * M * K);
  return T;
}

static const char* kTradesHeader =
    "date,strategy,kind,strike,maturity_days,market_mid,model_price,side,"
    "hedging_error,pnl,bias";

void save_trades_csv(const std::string& path,
                     const std::vector<backtest::TradeRecord>& trades) {
  std::ofstream outf = open_out(path);
  outf << kTradesHeader << "\n";
  for (const backtest::TradeRecord& t : trades) {
    outf << t.date << "," << backtest::strategy_name(t.strategy) << ","
         << (t.kind == OptionKind::call ? "call" : "put") << "," << format_double(t.strike)
         << "," << t.maturity_days << "," << format_double(t.market_mid) << ","
         << format_double(t.model_price) << "," << t.side << ","
         << format_double(t.hedging_error) << "," << format_double(t.pnl) << ","
         << format_double(t.bias) << "\n";
  }
}

std::vector<backtest::TradeRecord> load_trades_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw validation_error(path + " is empty");
  if (split_csv_line(line) != split_csv_line(kTradesHeader))
    throw validation_error(path + ": unexpected trades header");
  std::vector<backtest::TradeRecord> trades;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() < 11)
      throw validation_error(path + ":" + std::to_string(lineno) + ": too few columns");
    backtest::TradeRecord t;
    std::string at = " at line " + std::to_string(lineno);
    t.date = f[0];
    t.strategy = backtest::strategy_from_name(f[1]);
    if (f[2] == "call")
      t.kind = OptionKind::call;
    else if (f[2] == "put")
      t.kind = OptionKind::put;
    else
      throw validation_error(path + ":" + std::to_string(lineno) + ": kind must be call|put");
    t.strike = parse_double(f[3], "strike" + at);
    t.maturity_days = static_cast<int>(parse_long(f[4], "maturity_days" + at));
    t.market_mid = parse_double(f[5], "market_mid" + at);
    t.model_price = parse_double(f[6], "model_price" + at);
    t.side = static_cast<int>(parse_long(f[7], "side" + at));
    t.hedging_error = parse_double(f[8], "hedging_error" + at);
    t.pnl = parse_double(f[9], "pnl" + at);
    t.bias = parse_double(f[10], "bias" + at);
    trades.push_back(std::move(t));
  }
  return trades;
}

std::string backtest_summary_csv(const backtest::BacktestResult& result) {
  std::string out = "metric";
  for (const auto& s : result.summaries) out += "," + backtest::strategy_name(s.strategy);
  out += "\n";
  auto row = [&](const std::string& label, auto pick) {
    out += label;
    for (const auto& s : result.summaries) out += "," + format_double(pick(s));
    out += "\n";
  };
  row("RMSE", [](const backtest::StrategySummary& s) { return s.hedging_error.rmse; });
  row("Bias", [](const backtest::StrategySummary& s) { return s.mean_bias; });
  row("VaR 1%", [](const backtest::StrategySummary& s) { return s.hedging_error.var_1; });
  row("Median", [](const backtest::StrategySummary& s) { return s.hedging_error.median; });
  row("VaR 99%", [](const backtest::StrategySummary& s) { return s.hedging_error.var_99; });
  row("Mean P&L", [](const backtest::StrategySummary& s) { return s.pnl.mean; });
  row("Trades", [](const backtest::StrategySummary& s) { return double(s.n_trades); });
  return out;
}

std::string hedge_sim_summary_csv(const std::vector<hedge::StrategyResult>& results) {
  std::string out = "metric";
  for (const auto& r : results) out += "," + r.name;
  out += "\n";
  auto row = [&](const std::string& label, auto pick) {
    out += label;
    for (const auto& r : results) out += "," + format_double(pick(r.stats));
    out += "\n";
  };
  row("Average", [](const SummaryStats& s) { return s.mean; });
  row("Median", [](const SummaryStats& s) { return s.median; });
  row("Volatility", [](const SummaryStats& s) { return s.volatility; });
  row("Skewness", [](const SummaryStats& s) { return s.skewness; });
  row("Kurtosis", [](const SummaryStats& s) { return s.kurtosis; });
  row("Minimum", [](const SummaryStats& s) { return s.min; });
  row("VaR 1%", [](const SummaryStats& s) { return s.var_1; });
  row("VaR 99%", [](const SummaryStats& s) { return s.var_99; });
  row("Maximum", [](const SummaryStats& s) { return s.max; });
  row("RMSE", [](const SummaryStats& s) { return s.rmse; });
  return out;
}

}  // namespace arhmm
