#include <cmath>

#include "arhmm/filter.hpp"
#include "arhmm/model.hpp"
#include "doctest.h"
#include "enumeration.hpp"
#include "fixtures.hpp"

using namespace arhmm;

TEST_SUITE("filter") {

TEST_CASE("filtered probabilities and likelihood match path enumeration") {
  struct Case {
    int l, n, d;
    std::uint64_t seed;
  };
  for (Case c : {Case{2, 6, 1, 11}, Case{3, 5, 1, 12}, Case{2, 5, 2, 13}}) {
    ArhmmModel m = testsup::make_random_model(c.l, c.d, c.seed);
    SimulatedPath path = simulate_path(m, Vec::Zero(c.d), 0, c.n, c.seed + 100);
    FilterResult fr = filter_path(m, path.y);
    testsup::EnumerationResult en = testsup::enumerate_posteriors(m, path.y);

    REQUIRE(int(fr.states.size()) == c.n);
    CHECK((fr.states[0].eta - m.eta0()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(fr.states[0].log_lik == 0.0);
    for (int t = 1; t < c.n; ++t)
      CHECK((fr.states[t].eta.transpose() - en.eta.row(t - 1)).cwiseAbs().maxCoeff() <
            1e-12);
    CHECK(testsup::rel_gap(fr.log_lik, en.log_lik) < 1e-12);
    CHECK(fr.states.back().log_lik == fr.log_lik);
  }
}

TEST_CASE("one step of the recursion in closed form") {
  ArhmmModel m = testsup::make_random_model(3, 1, 21);
  FilterState s;
  s.t = 3;
  s.eta = Vec(3);
  s.eta << 0.2, 0.5, 0.3;
  Vec y_prev = Vec::Constant(1, 0.004), y = Vec::Constant(1, -0.002);

  Vec w = m.q().transpose() * s.eta;
  Vec num(3);
  for (int i = 0; i < 3; ++i) num(i) = w(i) * m.cond_density(i, y_prev, y);
  FilterState out = filter_step(m, s, y_prev, y);
  CHECK(out.t == 4);
  CHECK((out.eta - num / num.sum()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(out.log_lik == doctest::Approx(std::log(num.sum())).epsilon(1e-12));
}

TEST_CASE("filter_path input validation") {
  ArhmmModel m = testsup::make_random_model(2, 1, 3);
  CHECK_THROWS_AS(filter_path(m, Mat::Zero(1, 1)), validation_error);
  CHECK_THROWS_AS(filter_path(m, Mat::Zero(5, 2)), validation_error);
}

TEST_CASE("most probable regime breaks ties toward the lowest index") {
  Vec eta(3);
  eta << 0.4, 0.4, 0.2;
  CHECK(most_probable_regime(eta) == 0);
  eta << 0.1, 0.2, 0.7;
  CHECK(most_probable_regime(eta) == 2);
}

TEST_CASE("regime prediction is eta' Q^k") {
  ArhmmModel m = testsup::table2_ar1();
  Vec eta(3);
  eta << 0.5, 0.25, 0.25;
  CHECK((predict_regime(eta, m.q(), 0) - eta).cwiseAbs().maxCoeff() == 0.0);
  Vec two = (eta.transpose() * m.q() * m.q()).transpose();
  CHECK((predict_regime(eta, m.q(), 2) - two).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("predictive density is the W-weighted mixture") {
  ArhmmModel m = testsup::make_random_model(2, 1, 31);
  Vec eta(2);
  eta << 0.35, 0.65;
  Vec y_last = Vec::Constant(1, 0.001), y_next = Vec::Constant(1, -0.007);
  Vec w = m.q().transpose() * eta;
  double want = 0.0;
  for (int i = 0; i < 2; ++i) want += w(i) * m.cond_density(i, y_last, y_next);
  CHECK(predictive_density(m, eta, y_last, y_next) ==
        doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("multi-step predictive density sums the regime paths") {
  ArhmmModel m = testsup::make_random_model(2, 1, 41);
  Vec eta(2);
  eta << 0.6, 0.4;
  Vec y0 = Vec::Constant(1, 0.002);
  Mat path(2, 1);
  path << 0.005, -0.003;

  Vec w = m.q().transpose() * eta;  // law of tau_1
  double brute = 0.0;
  for (int j1 = 0; j1 < 2; ++j1)
    for (int j2 = 0; j2 < 2; ++j2)
      brute += w(j1) * m.cond_density(j1, y0, path.row(0).transpose()) *
               m.q()(j1, j2) *
               m.cond_density(j2, path.row(0).transpose(), path.row(1).transpose());
  CHECK(testsup::rel_gap(predictive_density_m(m, eta, y0, path), brute) < 1e-13);
  CHECK(predictive_log_density_m(m, eta, y0, path) ==
        doctest::Approx(std::log(brute)).epsilon(1e-12));
}

TEST_CASE("density evaluation failures surface as numeric errors") {
  RegimeParams r;
  r.mu = Vec::Constant(1, 0.0);
  r.phi = Mat::Constant(1, 1, 0.0);
  r.cov = Mat::Constant(1, 1, 0.0);  // degenerate
  ArhmmModel m = ArhmmModel::unchecked({r}, Mat::Constant(1, 1, 1.0));
  Mat y = Mat::Zero(3, 1);
  CHECK_THROWS_AS(filter_path(m, y), numeric_error);
}

}  // TEST_SUITE
