#include <cmath>
#include <random>

#include "arhmm/filter.hpp"
#include "arhmm/gof.hpp"
#include "arhmm/model.hpp"
#include "cvm_exact.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "quadrature.hpp"

using namespace arhmm;

TEST_SUITE("gof") {

TEST_CASE("single observation at one half gives the textbook 1/12") {
  Mat u = Mat::Constant(1, 1, 0.5);
  CHECK(cvm_statistic(u) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  CHECK(testsup::cvm_by_rectangles(u) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
}

TEST_CASE("closed form equals exact rectangle integration") {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 8; ++rep) {
    int d = rep % 2 + 1;
    long n = d == 1 ? 3 + 17 * rep : 3 + 4 * rep;
    Mat u(n, d);
    for (long t = 0; t < n; ++t)
      for (int j = 0; j < d; ++j) u(t, j) = unif(gen);
    // both sides are exact formulas; the gap is summation-order roundoff
    CHECK(testsup::rel_gap(cvm_statistic(u), testsup::cvm_by_rectangles(u)) < 1e-10);
  }
}

TEST_CASE("cvm_statistic validates its domain") {
  CHECK_THROWS_AS(cvm_statistic(Mat::Constant(2, 1, 1.5)), validation_error);
  CHECK_THROWS_AS(cvm_statistic(Mat::Constant(2, 1, -0.1)), validation_error);
  CHECK_THROWS_AS(cvm_statistic(Mat(0, 1)), validation_error);
}

TEST_CASE("rosenblatt in one dimension with one regime is the plain PIT") {
  ArhmmModel m = testsup::make_random_model(1, 1, 301);
  SimulatedPath path = simulate_path(m, Vec::Zero(1), 0, 30, 302);
  Mat u = rosenblatt_transform(m, path.y);
  REQUIRE(u.rows() == 29);
  const RegimeParams& r = m.regime(0);
  double sd = std::sqrt(r.cov(0, 0));
  for (long t = 1; t < 30; ++t) {
    double mean = r.mu(0) + r.phi(0, 0) * (path.y(t - 1, 0) - r.mu(0));
    double want = 0.5 * std::erfc(-(path.y(t, 0) - mean) / (sd * std::sqrt(2.0)));
    CHECK(u(t - 1, 0) == doctest::Approx(want).epsilon(1e-13));
  }
}

TEST_CASE("rosenblatt rows are near-uniform under the true model") {
  ArhmmModel m = testsup::table2_ar1();
  SimulatedPath path = simulate_path(m, Vec::Zero(1), 1, 3000, 303);
  Mat u = rosenblatt_transform(m, path.y);
  double mean = u.col(0).mean();
  CHECK(std::abs(mean - 0.5) < 0.02);
  // crude Kolmogorov-Smirnov bound: with n ~ 3000 the expected sup gap is
  // about 0.016, so 0.05 is a loose 3-sigma style cap
  std::vector<double> s(u.col(0).data(), u.col(0).data() + u.rows());
  std::sort(s.begin(), s.end());
  double ks = 0.0;
  for (size_t k = 0; k < s.size(); ++k)
    ks = std::max(ks, std::abs(s[k] - (k + 1.0) / double(s.size())));
  CHECK(ks < 0.05);
}

TEST_CASE("rosenblatt second coordinate matches bivariate quadrature") {
  ArhmmModel m = testsup::make_random_model(2, 2, 305);
  SimulatedPath path = simulate_path(m, Vec::Zero(2), 0, 8, 306);
  Mat u = rosenblatt_transform(m, path.y);
  FilterResult fr = filter_path(m, path.y);

  for (long t = 1; t < 8; ++t) {
    Vec w = m.q().transpose() * fr.states[size_t(t - 1)].eta;
    Vec y_prev = path.y.row(t - 1).transpose();
    double y1 = path.y(t, 0), y2 = path.y(t, 1);

    // mixture density of (Y1, Y2) given the past, integrated over the second
    // coordinate: U2 = P(Y2 <= y2 | Y1 = y1, past)
    auto joint = [&](double s) {
      Vec yy(2);
      yy << y1, s;
      double acc = 0.0;
      for (int i = 0; i < 2; ++i) acc += w(i) * m.cond_density(i, y_prev, yy);
      return acc;
    };
    double lo = y2, hi = y2;
    for (int i = 0; i < 2; ++i) {
      const RegimeParams& r = m.regime(i);
      Vec mean = r.mu + r.phi * (y_prev - r.mu);
      double sd = std::sqrt(r.cov(1, 1));
      lo = std::min(lo, mean(1) - 14.0 * sd);
      hi = std::max(hi, mean(1) + 14.0 * sd);
    }
    // absolute tolerance sized to the integrand: mixture densities with
    // per-period scales reach O(1/sd), so an O(1e-14) flat tolerance would
    // chase noise below double precision
    double h = 0.0;
    for (int k = 0; k <= 64; ++k) h = std::max(h, joint(lo + (hi - lo) * k / 64.0));
    double tol = std::max(1e-13, 1e-12 * h * (hi - lo));
    double num = testsup::integrate(joint, lo, y2, tol);
    double den = num + testsup::integrate(joint, y2, hi, tol);
    CHECK(testsup::rel_gap(u(t - 1, 1), num / den) < 1e-9);
    CHECK(u(t - 1, 1) >= 0.0);
    CHECK(u(t - 1, 1) <= 1.0);
  }
}

TEST_CASE("rosenblatt dimension cap") {
  ArhmmModel m = testsup::make_random_model(2, 3, 307);
  SimulatedPath path = simulate_path(m, Vec::Zero(3), 0, 5, 308);
  CHECK_THROWS_AS(rosenblatt_transform(m, path.y), validation_error);
}

TEST_CASE("parametric bootstrap is deterministic and bookkeeps replicates") {
  ArhmmModel gen = testsup::make_random_model(1, 1, 310);
  SimulatedPath path = simulate_path(gen, Vec::Zero(1), 0, 300, 311);
  GofConfig cfg;
  cfg.n_boot = 24;
  cfg.seed = 9;
  cfg.threads = 2;
  ArhmmModel fitted;
  GofResult a = parametric_bootstrap(path.y, 1, cfg, &fitted);
  CHECK(a.p_value >= 0.0);
  CHECK(a.p_value <= 1.0);
  CHECK(a.n_boot_used + a.n_dropped == 24);
  CHECK(a.s_n > 0.0);
  CHECK(fitted.num_regimes() == 1);

  cfg.threads = 1;
  GofResult b = parametric_bootstrap(path.y, 1, cfg);
  CHECK(a.s_n == b.s_n);
  CHECK(a.p_value == b.p_value);
  CHECK(a.n_boot_used == b.n_boot_used);
}

TEST_CASE("regime selection returns the scan results") {
  ArhmmModel gen = testsup::make_random_model(1, 1, 320);
  SimulatedPath path = simulate_path(gen, Vec::Zero(1), 0, 250, 321);
  GofConfig cfg;
  cfg.n_boot = 16;
  cfg.seed = 4;
  RegimeSelection sel = select_num_regimes(path.y, 2, cfg);
  CHECK(sel.per_l.size() >= 1);
  CHECK(sel.per_l.size() <= 2);
  if (sel.selected_l) {
    CHECK(*sel.selected_l >= 1);
    CHECK(sel.per_l.back().p_value > 0.05);
  }
}

}  // TEST_SUITE
