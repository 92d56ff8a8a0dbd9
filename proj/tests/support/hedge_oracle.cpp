#include "hedge_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "quadrature.hpp"

namespace testsup {

namespace {

using arhmm::hedge::HedgeTables;

double table_scale(const std::vector<double>& tab) {
  double s = 0.0;
  for (double x : tab) s = std::max(s, std::abs(x));
  return std::max(s, 1e-30);
}

// Relative to the larger of the two values or the family's overall scale: a
// node that is many orders below its table's scale cannot be resolved better
// than the quadrature noise, so it is judged against the family scale.
double norm_gap(double got, double want, double fam_scale) {
  return std::abs(got - want) / (fam_scale + std::max(std::abs(got), std::abs(want)));
}

// Piecewise adaptive integration of fn over [lo, hi] split at the sorted
// interior breakpoints (the integrands are only piecewise smooth).
template <class F>
double integrate_segmented(const F& fn, double lo, double hi,
                           const std::vector<double>& brk, double tol) {
  double acc = 0.0, prev = lo;
  for (double x : brk) {
    if (x <= prev || x >= hi) continue;
    acc += integrate(fn, prev, x, tol);
    prev = x;
  }
  acc += integrate(fn, prev, hi, tol);
  return acc;
}

double normal_pdf(double z, double mean, double sd) {
  double u = (z - mean) / sd;
  return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * M_PI));
}

}  // namespace

HedgeOracleReport check_tables_by_quadrature(const HedgeTables& t, double quad_tol) {
  const int n = t.n(), K = t.K(), M = t.M(), L = t.L();
  const arhmm::Vec& yg = t.cfg.y_grid;
  const arhmm::Vec& sg = t.cfg.s_grid;
  const double width = 12.0;

  HedgeOracleReport rep;

  for (int step = n; step >= 1; --step) {
    const double r = t.cfg.rates[static_cast<size_t>(step - 1)];
    const double e1 = std::exp(-r);

    // per-family scales of the layers produced at this step
    double sc_a = table_scale(t.a[static_cast<size_t>(step)]);
    double sc_b = table_scale(t.b[static_cast<size_t>(step)]);
    double sc_g = table_scale(t.g[static_cast<size_t>(step)]);
    double sc_psi = table_scale(t.psi[static_cast<size_t>(step - 1)]);
    double sc_aa = table_scale(t.aa[static_cast<size_t>(step)]);
    double sc_cont = table_scale(t.psi[static_cast<size_t>(step)]);

    for (int i = 0; i < L; ++i) {
      for (int v = 0; v < K; ++v) {
        // scalar pass: a, b, g at (step, i, v)
        double a_or = 0.0, b_or = 0.0, m0_or = 0.0;
        for (int j = 0; j < L; ++j) {
          double qij = t.model.q()(i, j);
          if (qij == 0.0) continue;
          const arhmm::RegimeParams& reg = t.model.regime(j);
          double mean = reg.mu(0) + reg.phi(0, 0) * (yg(v) - reg.mu(0));
          double sd = std::sqrt(reg.cov(0, 0));
          double lo = mean - width * sd, hi = mean + width * sd;
          std::vector<double> brk(yg.data(), yg.data() + K);
          auto ghat = [&](double z) {
            return step == n ? 1.0 : t.scalar_eval(t.g[static_cast<size_t>(step + 1)], j, z);
          };
          double i0 = integrate_segmented(
              [&](double z) { return normal_pdf(z, mean, sd) * ghat(z); }, lo, hi, brk,
              quad_tol * sc_g);
          double ib = integrate_segmented(
              [&](double z) {
                double zeta = e1 * std::exp(z) - 1.0;
                return normal_pdf(z, mean, sd) * zeta * ghat(z);
              },
              lo, hi, brk, quad_tol * sc_b);
          double ia = integrate_segmented(
              [&](double z) {
                double zeta = e1 * std::exp(z) - 1.0;
                return normal_pdf(z, mean, sd) * zeta * zeta * ghat(z);
              },
              lo, hi, brk, quad_tol * sc_a);
          a_or += qij * ia;
          b_or += qij * ib;
          m0_or += qij * i0;
        }
        double g_or = m0_or - b_or * b_or / a_or;
        rep.worst_scalar =
            std::max(rep.worst_scalar, norm_gap(t.a_at(step, i, v), a_or, sc_a));
        rep.worst_scalar =
            std::max(rep.worst_scalar, norm_gap(t.b_at(step, i, v), b_or, sc_b));
        rep.worst_scalar =
            std::max(rep.worst_scalar, norm_gap(t.g_at(step, i, v), g_or, sc_g));

        // value pass: psi[step-1] and aa[step] at every interior s node
        double h = t.h_at(step, i, v);
        for (int q = 1; q < M; ++q) {
          double sj0 = 0.0, sj1 = 0.0;
          for (int j = 0; j < L; ++j) {
            double qij = t.model.q()(i, j);
            if (qij == 0.0) continue;
            const arhmm::RegimeParams& reg = t.model.regime(j);
            double mean = reg.mu(0) + reg.phi(0, 0) * (yg(v) - reg.mu(0));
            double sd = std::sqrt(reg.cov(0, 0));
            double lo = mean - width * sd, hi = mean + width * sd;
            std::vector<double> brk(yg.data(), yg.data() + K);
            for (int m = 1; m < M; ++m) brk.push_back(r + std::log(sg(m) / sg(q)));
            std::sort(brk.begin(), brk.end());
            auto psihat = [&](double z) {
              return t.value_eval(t.psi[static_cast<size_t>(step)], j,
                                  sg(q) * std::exp(z - r), z);
            };
            double tol = quad_tol * sc_cont;
            sj0 += qij * integrate_segmented(
                             [&](double z) { return normal_pdf(z, mean, sd) * psihat(z); },
                             lo, hi, brk, tol);
            sj1 += qij * integrate_segmented(
                             [&](double z) {
                               return normal_pdf(z, mean, sd) * std::exp(z - r) * psihat(z);
                             },
                             lo, hi, brk, tol);
          }
          double psi_or = (1.0 + h) * sj0 - h * sj1;
          double aa_or = sj1 - sj0;
          rep.worst_value = std::max(rep.worst_value,
                                     norm_gap(t.psi_at(step - 1, i, q, v), psi_or, sc_psi));
          rep.worst_value =
              std::max(rep.worst_value, norm_gap(t.aa_at(step, i, q, v), aa_or, sc_aa));
        }
      }
    }
  }
  return rep;
}

}  // namespace testsup
