#include <cmath>
#include <random>

#include "arhmm/hedge.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "quadrature.hpp"

using namespace arhmm;
using hedge::TruncGaussMoments;
using hedge::truncated_gaussian_moments;

TEST_SUITE("hedge moments") {

TEST_CASE("half line at the standard normal") {
  TruncGaussMoments m = truncated_gaussian_moments(0.0, 0.0, 1.0, 0.0, INFINITY);
  CHECK(m.m == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m.m1 == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
  CHECK(m.m2 == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("whole line recovers the tilted moments of the mgf") {
  for (double theta : {0.0, 1.0, 2.0, -1.5}) {
    double mu = 0.3, sigma = 0.7;
    TruncGaussMoments m =
        truncated_gaussian_moments(theta, mu, sigma, -INFINITY, INFINITY);
    double mval = std::exp(theta * mu + 0.5 * theta * theta * sigma * sigma);
    double mts = mu + theta * sigma * sigma;
    CHECK(testsup::rel_gap(m.m, mval) < 1e-13);
    CHECK(testsup::rel_gap(m.m1, mts * mval) < 1e-13);
    CHECK(testsup::rel_gap(m.m2, (sigma * sigma + mts * mts) * mval) < 1e-13);
  }
}

TEST_CASE("random windows match adaptive quadrature") {
  std::mt19937_64 gen(404);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    double theta = -3.0 + 6.0 * unif(gen);
    double mu = -2.0 + 4.0 * unif(gen);
    double sigma = 0.05 + 1.95 * unif(gen);
    double a = mu + sigma * (-4.0 + 6.0 * unif(gen));
    double b = a + 3.0 * sigma * unif(gen);
    if (rep % 7 == 0) a = -INFINITY;
    if (rep % 11 == 0) b = INFINITY;
    double qa = std::isinf(a) ? mu - 14.0 * sigma : a;
    double qb = std::isinf(b) ? mu + 14.0 * sigma : b;
    if (qa > qb) continue;

    // normalize by the full-line tilted mass so the integrand is O(1) and the
    // absolute quadrature tolerance is meaningful
    double pref = std::exp(theta * mu + 0.5 * theta * theta * sigma * sigma);
    double mts = mu + theta * sigma * sigma;  // mean of the tilted law
    auto f = [&](double x) {
      double z = (x - mts) / sigma;
      return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
    };
    double i0 = testsup::integrate(f, qa, qb, 1e-15);
    double i1 = testsup::integrate([&](double x) { return x * f(x); }, qa, qb, 1e-15);
    double i2 =
        testsup::integrate([&](double x) { return x * x * f(x); }, qa, qb, 1e-15);

    TruncGaussMoments m = truncated_gaussian_moments(theta, mu, sigma, a, b);
    double scale = std::max(1.0, std::abs(m.m) / pref);
    worst = std::max(worst, std::abs(m.m / pref - i0) / scale);
    worst = std::max(worst, std::abs(m.m1 / pref - i1) / scale);
    worst = std::max(worst, std::abs(m.m2 / pref - i2) / scale);
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("degenerate and invalid windows") {
  TruncGaussMoments zero = truncated_gaussian_moments(1.0, 0.0, 1.0, 0.3, 0.3);
  CHECK(zero.m == 0.0);
  CHECK(zero.m1 == 0.0);
  CHECK(zero.m2 == 0.0);
  CHECK_THROWS_AS(truncated_gaussian_moments(0.0, 0.0, 1.0, 1.0, 0.0),
                  validation_error);
  CHECK_THROWS_AS(truncated_gaussian_moments(0.0, 0.0, -1.0, 0.0, 1.0),
                  validation_error);
  // exponent far beyond double range
  CHECK_THROWS_AS(truncated_gaussian_moments(40.0, 50.0, 2.0, -INFINITY, INFINITY),
                  numeric_error);
}

TEST_CASE("interpolation cells hit their corners exactly") {
  hedge::LinCoeffs lc = hedge::linear_cell(2.0, 5.0, -1.0, 8.0);
  CHECK(lc.a + lc.b * 2.0 == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(lc.a + lc.b * 5.0 == doctest::Approx(8.0).epsilon(1e-14));
  CHECK_THROWS_AS(hedge::linear_cell(2.0, 2.0, 0.0, 1.0), validation_error);

  hedge::BilinCoeffs bc = hedge::bilinear_cell(1.0, 3.0, -2.0, 4.0, 10.0, 11.0, 12.0, 19.0);
  auto eval = [&](double s, double y) { return bc.a + bc.b1 * s + bc.b2 * y + bc.b3 * s * y; };
  CHECK(eval(1.0, -2.0) == doctest::Approx(10.0).epsilon(1e-13));
  CHECK(eval(3.0, -2.0) == doctest::Approx(11.0).epsilon(1e-13));
  CHECK(eval(1.0, 4.0) == doctest::Approx(12.0).epsilon(1e-13));
  CHECK(eval(3.0, 4.0) == doctest::Approx(19.0).epsilon(1e-13));
}

TEST_CASE("payoff conventions") {
  hedge::Payoff call = hedge::Payoff::call(100.0);
  hedge::Payoff put = hedge::Payoff::put(100.0);
  CHECK(call.raw(113.0) == 13.0);
  CHECK(call.raw(90.0) == 0.0);
  CHECK(put.raw(90.0) == 10.0);

  // discounted form: Psi_n(s) = beta_n C(s / beta_n)
  double beta_n = 0.98;
  CHECK(call.discounted(102.0, beta_n) ==
        doctest::Approx(std::max(0.0, 102.0 - beta_n * 100.0)).epsilon(1e-14));
  CHECK(put.discounted(90.0, beta_n) ==
        doctest::Approx(std::max(0.0, beta_n * 100.0 - 90.0)).epsilon(1e-14));

  hedge::Payoff straddle;
  straddle.custom = [](double s) { return std::abs(s - 100.0); };
  CHECK(straddle.discounted(95.0, beta_n) ==
        doctest::Approx(beta_n * std::abs(95.0 / beta_n - 100.0)).epsilon(1e-13));

  CHECK_THROWS_AS(hedge::Payoff::call(-1.0), validation_error);
}

}  // TEST_SUITE
