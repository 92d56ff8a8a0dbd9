#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "arhmm/gaussian.hpp"
#include "arhmm/hedge.hpp"
#include "arhmm/parallel.hpp"
#include "arhmm/rng.hpp"
#include "arhmm/stats.hpp"

namespace arhmm::hedge {

namespace {

// index of the grid cell containing x: number of nodes <= x
int count_le(const Vec& g, double x) {
  return static_cast<int>(std::upper_bound(g.data(), g.data() + g.size(), x) - g.data());
}

void validate_hedge_inputs(const ArhmmModel& m, const HedgeConfig& cfg) {
  if (m.dim() != 1) throw validation_error("hedging engine requires a univariate model");
  if (cfg.n_steps < 1) throw validation_error("n_steps must be positive");
  if (cfg.rates.size() != static_cast<std::size_t>(cfg.n_steps))
    throw validation_error("rates must have one entry per step");
  for (double r : cfg.rates)
    if (!std::isfinite(r)) throw validation_error("rates must be finite");
  long K = cfg.y_grid.size(), M = cfg.s_grid.size();
  if (K < 2) throw validation_error("y_grid needs at least 2 nodes");
  if (M < 2) throw validation_error("s_grid needs at least 2 nodes");
  if (cfg.s_grid(0) != 0.0) throw validation_error("s_grid must start at the 0 sentinel");
  for (long v = 0; v + 1 < K; ++v)
    if (!(cfg.y_grid(v) < cfg.y_grid(v + 1)))
      throw validation_error("y_grid must be strictly increasing");
  for (long q = 0; q + 1 < M; ++q)
    if (!(cfg.s_grid(q) < cfg.s_grid(q + 1)))
      throw validation_error("s_grid must be strictly increasing");
  if (!cfg.y_grid.allFinite() || !cfg.s_grid.allFinite())
    throw validation_error("grids must be finite");
  if (m.num_regimes() > 16) throw validation_error("hedging engine supports at most 16 regimes");
}

std::vector<double> discount_curve(const HedgeConfig& cfg) {
  std::vector<double> beta(cfg.n_steps + 1, 1.0);
  for (int t = 1; t <= cfg.n_steps; ++t) beta[t] = beta[t - 1] * std::exp(-cfg.rates[t - 1]);
  return beta;
}

// Every special-function evaluation the node sweeps need, hoisted out of the
// per-(t, node) loops.  With theta in {0, 1, 2}:
//   yc/yp[theta][(v*l+j)*K + v'] : Phi / phi at kappa_theta(y_{v'}) under the
//                                  conditional law N(m_vj, sigma_j^2),
//   sc/sp[theta][(v*l+j)*(2M-3) + (dq+M-2)] : same at the s-cell breakpoints
//       z(dq) = r + dq*dlog, valid for geometric s grids only, rebuilt per rate,
//   w*[theta][v*l+j] : values at the +-window_sigmas integration window edges.
struct SweepPre {
  int n = 0, K = 0, M = 0, l = 0;
  double window_sigmas = 10.0;
  bool geometric = false;
  double dlog = 0.0;
  std::vector<double> logs;                   // log s_q, q >= 1 (slot 0 unused)
  std::vector<double> sigma, phi1, mu1;       // per regime
  std::vector<double> cmean;                  // [v*l+j]
  std::vector<double> pref[3], mts[3];        // [v*l+j]
  std::vector<double> yc[3], yp[3];           // y-node breakpoint values
  std::vector<double> sc[3], sp[3];           // s-cell breakpoint values
  std::vector<double> wlo_c[3], wlo_p[3], whi_c[3], whi_p[3];
  double cur_rate = std::numeric_limits<double>::quiet_NaN();

  double wlo(int v, int j) const { return cmean[v * l + j] - window_sigmas * sigma[j]; }
  double whi(int v, int j) const { return cmean[v * l + j] + window_sigmas * sigma[j]; }
};

SweepPre make_pre(const ArhmmModel& m, const HedgeConfig& cfg, std::size_t threads) {
  SweepPre pre;
  pre.n = cfg.n_steps;
  pre.K = static_cast<int>(cfg.y_grid.size());
  pre.M = static_cast<int>(cfg.s_grid.size());
  pre.l = m.num_regimes();
  const int K = pre.K, M = pre.M, l = pre.l;

  pre.sigma.resize(l);
  pre.phi1.resize(l);
  pre.mu1.resize(l);
  for (int j = 0; j < l; ++j) {
    double var = m.regime(j).cov(0, 0);
    if (!(var > 0.0)) throw validation_error("regime variance must be positive");
    pre.sigma[j] = std::sqrt(var);
    pre.phi1[j] = m.regime(j).phi(0, 0);
    pre.mu1[j] = m.regime(j).mu(0);
  }

  pre.cmean.resize(static_cast<std::size_t>(K) * l);
  for (int th = 0; th < 3; ++th) {
    pre.pref[th].resize(static_cast<std::size_t>(K) * l);
    pre.mts[th].resize(static_cast<std::size_t>(K) * l);
  }
  for (int v = 0; v < K; ++v)
    for (int j = 0; j < l; ++j) {
      double mvj = pre.mu1[j] + pre.phi1[j] * (cfg.y_grid(v) - pre.mu1[j]);
      std::size_t id = static_cast<std::size_t>(v) * l + j;
      pre.cmean[id] = mvj;
      double s2 = pre.sigma[j] * pre.sigma[j];
      for (int th = 0; th < 3; ++th) {
        pre.pref[th][id] = std::exp(th * mvj + 0.5 * th * th * s2);
        pre.mts[th][id] = mvj + th * s2;
      }
    }

  pre.logs.assign(M, 0.0);
  for (int q = 1; q < M; ++q) pre.logs[q] = std::log(cfg.s_grid(q));
  if (M >= 3) {
    pre.dlog = (pre.logs[M - 1] - pre.logs[1]) / (M - 2);
    double dev = 0.0;
    for (int q = 1; q < M; ++q)
      dev = std::max(dev, std::abs(pre.logs[q] - (pre.logs[1] + (q - 1) * pre.dlog)));
    pre.geometric = dev <= 1e-12;
  } else {
    pre.geometric = true;  // single breakpoint, dq = 0 always
    pre.dlog = 0.0;
  }

  // y-node and window-edge special values (rate independent)
  for (int th = 0; th < 3; ++th) {
    pre.yc[th].resize(static_cast<std::size_t>(K) * l * K);
    pre.yp[th].resize(static_cast<std::size_t>(K) * l * K);
    pre.wlo_c[th].resize(static_cast<std::size_t>(K) * l);
    pre.wlo_p[th].resize(static_cast<std::size_t>(K) * l);
    pre.whi_c[th].resize(static_cast<std::size_t>(K) * l);
    pre.whi_p[th].resize(static_cast<std::size_t>(K) * l);
  }
  parallel_for(K * l, threads, [&](int id) {
    int v = id / l, j = id % l;
    double mvj = pre.cmean[id], sj = pre.sigma[j];
    for (int th = 0; th < 3; ++th) {
      double shift = th * sj;
      for (int vp = 0; vp < K; ++vp) {
        double z = (cfg.y_grid(vp) - mvj) / sj - shift;
        pre.yc[th][static_cast<std::size_t>(id) * K + vp] = norm_cdf(z);
        pre.yp[th][static_cast<std::size_t>(id) * K + vp] = norm_pdf(z);
      }
      double zlo = -pre.window_sigmas - shift, zhi = pre.window_sigmas - shift;
      pre.wlo_c[th][id] = norm_cdf(zlo);
      pre.wlo_p[th][id] = norm_pdf(zlo);
      pre.whi_c[th][id] = norm_cdf(zhi);
      pre.whi_p[th][id] = norm_pdf(zhi);
    }
  });
  return pre;
}

// s-cell breakpoint values for the current step's rate (geometric grids)
void refresh_s_breakpoints(SweepPre& pre, double rate, std::size_t threads) {
  if (!pre.geometric || rate == pre.cur_rate) return;
  const int K = pre.K, M = pre.M, l = pre.l;
  const int noff = 2 * M - 3;
  for (int th = 0; th < 3; ++th) {
    pre.sc[th].resize(static_cast<std::size_t>(K) * l * noff);
    pre.sp[th].resize(static_cast<std::size_t>(K) * l * noff);
  }
  parallel_for(K * l, threads, [&](int id) {
    int j = id % l;
    double mvj = pre.cmean[id], sj = pre.sigma[j];
    for (int off = 0; off < noff; ++off) {
      double z = rate + (off - (M - 2)) * pre.dlog;
      for (int th = 0; th < 3; ++th) {
        double arg = (z - mvj) / sj - th * sj;
        pre.sc[th][static_cast<std::size_t>(id) * noff + off] = norm_cdf(arg);
        pre.sp[th][static_cast<std::size_t>(id) * noff + off] = norm_pdf(arg);
      }
    }
  });
  pre.cur_rate = rate;
}

// (Phi, phi) triples for the three tilts at one sweep endpoint
struct EndH {
  double c[3], p[3];
};

EndH direct_end(const SweepPre& pre, int id, int j, double z) {
  EndH e;
  double mvj = pre.cmean[id], sj = pre.sigma[j];
  for (int th = 0; th < 3; ++th) {
    double arg = (z - mvj) / sj - th * sj;
    e.c[th] = norm_cdf(arg);
    e.p[th] = norm_pdf(arg);
  }
  return e;
}

// Piecewise-linear coefficients of a scalar table row over y cells; cell
// c = 0..K covers (-inf, y_0], (y_{c-1}, y_c], (y_{K-1}, inf) with constant
// extrapolation in the tails.
void scalar_coeffs(const Vec& yg, const double* row, std::vector<double>& ab) {
  int K = static_cast<int>(yg.size());
  ab.assign(2 * static_cast<std::size_t>(K + 1), 0.0);
  ab[0] = row[0];
  ab[2 * K] = row[K - 1];
  for (int c = 1; c < K; ++c) {
    LinCoeffs lc = linear_cell(yg(c - 1), yg(c), row[c - 1], row[c]);
    ab[2 * c] = lc.a;
    ab[2 * c + 1] = lc.b;
  }
}

}  // namespace

double HedgeTables::scalar_eval(const std::vector<double>& tab, int i, double y) const {
  const Vec& yg = cfg.y_grid;
  int Kn = K();
  const double* row = tab.data() + static_cast<std::size_t>(i) * Kn;
  if (y <= yg(0)) return row[0];
  if (y >= yg(Kn - 1)) return row[Kn - 1];
  int v = count_le(yg, y) - 1;
  double w = (y - yg(v)) / (yg(v + 1) - yg(v));
  return (1.0 - w) * row[v] + w * row[v + 1];
}

double HedgeTables::value_eval(const std::vector<double>& tab, int i, double s, double y) const {
  const Vec& yg = cfg.y_grid;
  const Vec& sg = cfg.s_grid;
  int Kn = K(), Mn = M();
  auto node = [&](int q, int v) {
    return tab[(static_cast<std::size_t>(i) * Mn + q) * Kn + v];
  };
  int v;
  double wy;
  if (y <= yg(0)) {
    v = 0;
    wy = 0.0;
  } else if (y >= yg(Kn - 1)) {
    v = Kn - 2;
    wy = 1.0;
  } else {
    v = count_le(yg, y) - 1;
    wy = (y - yg(v)) / (yg(v + 1) - yg(v));
  }
  int q;
  double ws;
  if (s <= 0.0) {
    q = 0;
    ws = 0.0;
  } else if (s >= sg(Mn - 1)) {
    q = Mn - 2;
    ws = 1.0;  // constant beyond the last node
  } else {
    q = count_le(sg, s) - 1;
    ws = (s - sg(q)) / (sg(q + 1) - sg(q));
  }
  double lo = (1.0 - wy) * node(q, v) + wy * node(q, v + 1);
  double hi = (1.0 - wy) * node(q + 1, v) + wy * node(q + 1, v + 1);
  return (1.0 - ws) * lo + ws * hi;
}

HedgeTables backward_tables(const ArhmmModel& m, const HedgeConfig& cfg, const Payoff& payoff) {
  validate_hedge_inputs(m, cfg);
  HedgeTables T;
  T.model = m;
  T.cfg = cfg;
  T.payoff = payoff;
  T.beta = discount_curve(cfg);

  const int n = cfg.n_steps;
  const int K = static_cast<int>(cfg.y_grid.size());
  const int M = static_cast<int>(cfg.s_grid.size());
  const int l = m.num_regimes();
  const Vec& yg = cfg.y_grid;
  const Vec& sg = cfg.s_grid;
  const Mat& Q = m.q();

  T.g.assign(n + 1, {});
  T.a.assign(n + 1, {});
  T.b.assign(n + 1, {});
  T.h.assign(n + 1, {});
  T.psi.assign(n + 1, {});
  T.aa.assign(n + 1, {});
  const std::size_t snodes = static_cast<std::size_t>(l) * M * K;

  T.psi[n].resize(snodes);
  for (int i = 0; i < l; ++i)
    for (int q = 0; q < M; ++q) {
      double val = payoff.discounted(sg(q), T.beta[n]);
      if (!std::isfinite(val)) throw validation_error("payoff not finite on the grid");
      for (int v = 0; v < K; ++v)
        T.psi[n][(static_cast<std::size_t>(i) * M + q) * K + v] = val;
    }
  const double psi0_bound = payoff.discounted(0.0, T.beta[n]);

  SweepPre pre = make_pre(m, cfg, cfg.threads);
  const int noff = 2 * M - 3;

  // scratch reused across steps
  std::vector<double> I0(static_cast<std::size_t>(K) * l), I1(I0.size()), I2(I0.size());
  std::vector<std::vector<double>> gco(l);  // g_{t+1} cell coefficients, per regime
  std::vector<double> vcoef;                // bilinear coeffs [((j*M+cs)*(K+1)+cy)*4]

  for (int t = n; t >= 1; --t) {
    const double rate = cfg.rates[t - 1];
    const double E1 = std::exp(-rate), E2 = E1 * E1;
    refresh_s_breakpoints(pre, rate, cfg.threads);

    // ---- scalar pass: a, b, h, g at step t ----
    for (int j = 0; j < l; ++j) {
      if (t == n) {
        gco[j].assign(2 * static_cast<std::size_t>(K + 1), 0.0);
        for (int c = 0; c <= K; ++c) gco[j][2 * c] = 1.0;  // g_{n+1} = 1
      } else {
        scalar_coeffs(yg, T.g[t + 1].data() + static_cast<std::size_t>(j) * K, gco[j]);
      }
    }
    parallel_for(K * l, cfg.threads, [&](int id) {
      int v = id / l, j = id % l;
      double sj = pre.sigma[j];
      double wlo = pre.wlo(v, j), whi = pre.whi(v, j);
      int cy = count_le(yg, wlo);  // cell containing the window start
      EndH prev;
      for (int th = 0; th < 3; ++th) {
        prev.c[th] = pre.wlo_c[th][id];
        prev.p[th] = pre.wlo_p[th][id];
      }
      double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0;
      const std::vector<double>& co = gco[j];
      while (true) {
        bool at_y = cy < K && yg(cy) < whi;
        EndH cur;
        if (at_y) {
          for (int th = 0; th < 3; ++th) {
            cur.c[th] = pre.yc[th][static_cast<std::size_t>(id) * K + cy];
            cur.p[th] = pre.yp[th][static_cast<std::size_t>(id) * K + cy];
          }
        } else {
          for (int th = 0; th < 3; ++th) {
            cur.c[th] = pre.whi_c[th][id];
            cur.p[th] = pre.whi_p[th][id];
          }
        }
        double A = co[2 * cy], B = co[2 * cy + 1];
        for (int th = 0; th < 3; ++th) {
          double P = pre.pref[th][id];
          double mm = P * (cur.c[th] - prev.c[th]);
          double mp = pre.mts[th][id] * mm - sj * P * (cur.p[th] - prev.p[th]);
          double contrib = A * mm + B * mp;
          if (th == 0)
            acc0 += contrib;
          else if (th == 1)
            acc1 += contrib;
          else
            acc2 += contrib;
        }
        prev = cur;
        if (!at_y) break;
        ++cy;
      }
      I0[id] = acc0;
      I1[id] = acc1;
      I2[id] = acc2;
    });

    T.a[t].resize(static_cast<std::size_t>(l) * K);
    T.b[t].resize(static_cast<std::size_t>(l) * K);
    T.h[t].resize(static_cast<std::size_t>(l) * K);
    T.g[t].resize(static_cast<std::size_t>(l) * K);
    for (int i = 0; i < l; ++i)
      for (int v = 0; v < K; ++v) {
        double sa = 0.0, sb = 0.0, sg0 = 0.0;
        for (int j = 0; j < l; ++j) {
          std::size_t id = static_cast<std::size_t>(v) * l + j;
          double e0 = I0[id], e1v = E1 * I1[id], e2v = E2 * I2[id];
          sa += Q(i, j) * (e2v - 2.0 * e1v + e0);
          sb += Q(i, j) * (e1v - e0);
          sg0 += Q(i, j) * e0;
        }
        if (!(sa > 0.0)) throw numeric_error("nonpositive E[zeta^2 g] in scalar recursion");
        double hh = sb / sa;
        double gg = sg0 - sb * hh;
        if (!(gg > 0.0)) throw numeric_error("nonpositive g in scalar recursion");
        std::size_t iv = static_cast<std::size_t>(i) * K + v;
        T.a[t][iv] = sa;
        T.b[t][iv] = sb;
        T.h[t][iv] = hh;
        T.g[t][iv] = gg;
      }

    // ---- value pass: psi_{t-1} and aa_t ----
    // bilinear coefficients of psi_t over (s-cell cs = 0..M-1, y-cell cy = 0..K)
    vcoef.assign(static_cast<std::size_t>(l) * M * (K + 1) * 4, 0.0);
    for (int j = 0; j < l; ++j) {
      auto pnode = [&](int q, int v) {
        return T.psi[t][(static_cast<std::size_t>(j) * M + q) * K + v];
      };
      for (int cs = 0; cs < M; ++cs) {
        bool open_top = cs == M - 1;
        double s0 = sg(cs), s1 = open_top ? 0.0 : sg(cs + 1);
        for (int cy = 0; cy <= K; ++cy) {
          std::size_t base =
              ((static_cast<std::size_t>(j) * M + cs) * (K + 1) + cy) * 4;
          if (open_top) {
            if (cy == 0 || cy == K) {
              vcoef[base] = pnode(M - 1, cy == 0 ? 0 : K - 1);
            } else {
              LinCoeffs lc = linear_cell(yg(cy - 1), yg(cy), pnode(M - 1, cy - 1),
                                         pnode(M - 1, cy));
              vcoef[base] = lc.a;
              vcoef[base + 2] = lc.b;
            }
          } else if (cy == 0 || cy == K) {
            int v = cy == 0 ? 0 : K - 1;
            LinCoeffs lc = linear_cell(s0, s1, pnode(cs, v), pnode(cs + 1, v));
            vcoef[base] = lc.a;
            vcoef[base + 1] = lc.b;
          } else {
            BilinCoeffs bc =
                bilinear_cell(s0, s1, yg(cy - 1), yg(cy), pnode(cs, cy - 1),
                              pnode(cs + 1, cy - 1), pnode(cs, cy), pnode(cs + 1, cy));
            vcoef[base] = bc.a;
            vcoef[base + 1] = bc.b1;
            vcoef[base + 2] = bc.b2;
            vcoef[base + 3] = bc.b3;
          }
        }
      }
    }

    T.psi[t - 1].resize(snodes);
    T.aa[t].resize(snodes);
    for (int i = 0; i < l; ++i)
      for (int v = 0; v < K; ++v) {
        T.psi[t - 1][(static_cast<std::size_t>(i) * M + 0) * K + v] = psi0_bound;
        T.aa[t][(static_cast<std::size_t>(i) * M + 0) * K + v] =
            T.h[t][static_cast<std::size_t>(i) * K + v] * psi0_bound;
      }

    parallel_for((M - 1) * K, cfg.threads, [&](int qv) {
      int q = 1 + qv / K;
      int v = qv % K;
      double sq = sg(q);
      double J0[16], J1[16];
      for (int j = 0; j < l; ++j) {
        std::size_t id = static_cast<std::size_t>(v) * l + j;
        double sj = pre.sigma[j];
        double wlo = pre.wlo(v, j), whi = pre.whi(v, j);
        int cy = count_le(yg, wlo);
        // s-cell containing the window start: number of breakpoints <= wlo
        int cs = static_cast<int>(std::upper_bound(pre.logs.begin() + 1, pre.logs.end(),
                                                   wlo - rate + pre.logs[q]) -
                                  (pre.logs.begin() + 1));
        EndH prev;
        for (int th = 0; th < 3; ++th) {
          prev.c[th] = pre.wlo_c[th][id];
          prev.p[th] = pre.wlo_p[th][id];
        }
        double j0 = 0.0, j1 = 0.0;
        while (true) {
          double ey = cy < K ? yg(cy) : std::numeric_limits<double>::infinity();
          double es = std::numeric_limits<double>::infinity();
          if (cs + 1 <= M - 1)
            es = pre.geometric ? rate + (cs + 1 - q) * pre.dlog
                               : rate + pre.logs[cs + 1] - pre.logs[q];
          bool y_next = ey <= es;
          double e1 = y_next ? ey : es;
          bool inside = e1 < whi;
          EndH cur;
          if (!inside) {
            for (int th = 0; th < 3; ++th) {
              cur.c[th] = pre.whi_c[th][id];
              cur.p[th] = pre.whi_p[th][id];
            }
          } else if (y_next) {
            for (int th = 0; th < 3; ++th) {
              cur.c[th] = pre.yc[th][static_cast<std::size_t>(id) * K + cy];
              cur.p[th] = pre.yp[th][static_cast<std::size_t>(id) * K + cy];
            }
          } else if (pre.geometric) {
            int off = (cs + 1 - q) + (M - 2);
            for (int th = 0; th < 3; ++th) {
              cur.c[th] = pre.sc[th][static_cast<std::size_t>(id) * noff + off];
              cur.p[th] = pre.sp[th][static_cast<std::size_t>(id) * noff + off];
            }
          } else {
            cur = direct_end(pre, static_cast<int>(id), j, e1);
          }
          const double* c4 =
              &vcoef[((static_cast<std::size_t>(j) * M + cs) * (K + 1) + cy) * 4];
          double m0 = cur.c[0] - prev.c[0];
          double m0p = pre.mts[0][id] * m0 - sj * (cur.p[0] - prev.p[0]);
          double P1 = pre.pref[1][id];
          double m1 = P1 * (cur.c[1] - prev.c[1]);
          double m1p = pre.mts[1][id] * m1 - sj * P1 * (cur.p[1] - prev.p[1]);
          double P2 = pre.pref[2][id];
          double m2 = P2 * (cur.c[2] - prev.c[2]);
          double m2p = pre.mts[2][id] * m2 - sj * P2 * (cur.p[2] - prev.p[2]);
          j0 += c4[0] * m0 + c4[2] * m0p + sq * E1 * (c4[1] * m1 + c4[3] * m1p);
          j1 += E1 * (c4[0] * m1 + c4[2] * m1p) + sq * E2 * (c4[1] * m2 + c4[3] * m2p);
          prev = cur;
          if (!inside) break;
          if (y_next) {
            ++cy;
            if (ey == es) ++cs;  // coincident breakpoints advance both
          } else {
            ++cs;
          }
        }
        J0[j] = j0;
        J1[j] = j1;
      }
      for (int i = 0; i < l; ++i) {
        double s0v = 0.0, s1v = 0.0;
        for (int j = 0; j < l; ++j) {
          s0v += Q(i, j) * J0[j];
          s1v += Q(i, j) * J1[j];
        }
        double hh = T.h[t][static_cast<std::size_t>(i) * K + v];
        T.psi[t - 1][(static_cast<std::size_t>(i) * M + q) * K + v] =
            (1.0 + hh) * s0v - hh * s1v;
        T.aa[t][(static_cast<std::size_t>(i) * M + q) * K + v] = s1v - s0v;
      }
    });
  }
  return T;
}

HedgeTables mc_backward_tables(const ArhmmModel& m, const HedgeConfig& cfg,
                               const Payoff& payoff, int n_draws, std::uint64_t seed) {
  validate_hedge_inputs(m, cfg);
  if (n_draws < 2) throw validation_error("mc tables need at least 2 draws per step");
  HedgeTables T;
  T.model = m;
  T.cfg = cfg;
  T.payoff = payoff;
  T.beta = discount_curve(cfg);

  const int n = cfg.n_steps;
  const int K = static_cast<int>(cfg.y_grid.size());
  const int M = static_cast<int>(cfg.s_grid.size());
  const int l = m.num_regimes();
  const Vec& yg = cfg.y_grid;
  const Vec& sg = cfg.s_grid;
  const Mat& Q = m.q();

  T.g.assign(n + 1, {});
  T.a.assign(n + 1, {});
  T.b.assign(n + 1, {});
  T.h.assign(n + 1, {});
  T.psi.assign(n + 1, {});
  T.aa.assign(n + 1, {});
  const std::size_t snodes = static_cast<std::size_t>(l) * M * K;

  T.psi[n].resize(snodes);
  for (int i = 0; i < l; ++i)
    for (int q = 0; q < M; ++q) {
      double val = payoff.discounted(sg(q), T.beta[n]);
      for (int v = 0; v < K; ++v)
        T.psi[n][(static_cast<std::size_t>(i) * M + q) * K + v] = val;
    }
  const double psi0_bound = payoff.discounted(0.0, T.beta[n]);

  std::vector<double> sigma(l), phi1(l), mu1(l);
  for (int j = 0; j < l; ++j) {
    sigma[j] = std::sqrt(m.regime(j).cov(0, 0));
    phi1[j] = m.regime(j).phi(0, 0);
    mu1[j] = m.regime(j).mu(0);
  }

  std::vector<double> eps(n_draws);
  for (int t = n; t >= 1; --t) {
    const double rate = cfg.rates[t - 1];
    std::mt19937_64 gen = substream(seed, stream_tag::kMcTables, static_cast<std::uint64_t>(t));
    std::normal_distribution<double> nd(0.0, 1.0);
    double mean = 0.0;
    for (int k = 0; k < n_draws; ++k) {
      eps[k] = nd(gen);
      mean += eps[k];
    }
    mean /= n_draws;
    double ss = 0.0;
    for (int k = 0; k < n_draws; ++k) {
      eps[k] -= mean;
      ss += eps[k] * eps[k];
    }
    double sd = std::sqrt(ss / (n_draws - 1));
    if (!(sd > 0.0)) throw numeric_error("degenerate draw pool");
    for (int k = 0; k < n_draws; ++k) eps[k] /= sd;

    T.a[t].resize(static_cast<std::size_t>(l) * K);
    T.b[t].resize(static_cast<std::size_t>(l) * K);
    T.h[t].resize(static_cast<std::size_t>(l) * K);
    T.g[t].resize(static_cast<std::size_t>(l) * K);
    T.psi[t - 1].resize(snodes);
    T.aa[t].resize(snodes);

    std::vector<double> I0(static_cast<std::size_t>(K) * l), I1(I0.size()), I2(I0.size());
    parallel_for(K * l, cfg.threads, [&](int id) {
      int v = id / l, j = id % l;
      double mvj = mu1[j] + phi1[j] * (yg(v) - mu1[j]);
      double a0 = 0.0, a1 = 0.0, a2 = 0.0;
      for (int k = 0; k < n_draws; ++k) {
        double z = mvj + sigma[j] * eps[k];
        double u = std::exp(z - rate);
        double gv = t == n ? 1.0 : T.scalar_eval(T.g[t + 1], j, z);
        a0 += gv;
        a1 += gv * u;
        a2 += gv * u * u;
      }
      I0[id] = a0 / n_draws;
      I1[id] = a1 / n_draws;
      I2[id] = a2 / n_draws;
    });
    for (int i = 0; i < l; ++i)
      for (int v = 0; v < K; ++v) {
        double sa = 0.0, sb = 0.0, sg0 = 0.0;
        for (int j = 0; j < l; ++j) {
          std::size_t id = static_cast<std::size_t>(v) * l + j;
          sa += Q(i, j) * (I2[id] - 2.0 * I1[id] + I0[id]);
          sb += Q(i, j) * (I1[id] - I0[id]);
          sg0 += Q(i, j) * I0[id];
        }
        if (!(sa > 0.0)) throw numeric_error("nonpositive E[zeta^2 g] in scalar recursion");
        double hh = sb / sa;
        double gg = sg0 - sb * hh;
        if (!(gg > 0.0)) throw numeric_error("nonpositive g in scalar recursion");
        std::size_t iv = static_cast<std::size_t>(i) * K + v;
        T.a[t][iv] = sa;
        T.b[t][iv] = sb;
        T.h[t][iv] = hh;
        T.g[t][iv] = gg;
      }

    for (int i = 0; i < l; ++i)
      for (int v = 0; v < K; ++v) {
        T.psi[t - 1][(static_cast<std::size_t>(i) * M + 0) * K + v] = psi0_bound;
        T.aa[t][(static_cast<std::size_t>(i) * M + 0) * K + v] =
            T.h[t][static_cast<std::size_t>(i) * K + v] * psi0_bound;
      }
    parallel_for((M - 1) * K, cfg.threads, [&](int qv) {
      int q = 1 + qv / K;
      int v = qv % K;
      double sq = sg(q);
      double J0[16], J1[16];
      for (int j = 0; j < l; ++j) {
        double mvj = mu1[j] + phi1[j] * (yg(v) - mu1[j]);
        double a0 = 0.0, a1 = 0.0;
        for (int k = 0; k < n_draws; ++k) {
          double z = mvj + sigma[j] * eps[k];
          double u = std::exp(z - rate);
          double pv = T.value_eval(T.psi[t], j, sq * u, z);
          a0 += pv;
          a1 += pv * u;
        }
        J0[j] = a0 / n_draws;
        J1[j] = a1 / n_draws;
      }
      for (int i = 0; i < l; ++i) {
        double s0v = 0.0, s1v = 0.0;
        for (int j = 0; j < l; ++j) {
          s0v += Q(i, j) * J0[j];
          s1v += Q(i, j) * J1[j];
        }
        double hh = T.h[t][static_cast<std::size_t>(i) * K + v];
        T.psi[t - 1][(static_cast<std::size_t>(i) * M + q) * K + v] =
            (1.0 + hh) * s0v - hh * s1v;
        T.aa[t][(static_cast<std::size_t>(i) * M + q) * K + v] = s1v - s0v;
      }
    });
  }
  return T;
}

Grids build_grids(const ArhmmModel& m, int n_steps, double s0, const std::vector<double>& rates,
                  const GridSpec& spec) {
  if (m.dim() != 1) throw validation_error("build_grids requires a univariate model");
  if (n_steps < 1) throw validation_error("n_steps must be positive");
  if (rates.size() != static_cast<std::size_t>(n_steps))
    throw validation_error("rates must have one entry per step");
  if (!(s0 > 0.0)) throw validation_error("s0 must be positive");
  if (spec.n_y < 4 || spec.n_s < 4) throw validation_error("grids need at least 4 nodes");
  if (!(spec.coverage > 0.0)) throw validation_error("coverage must be positive");
  if (spec.n_sim < 100 || spec.n_paths < 10) throw validation_error("grid samples too small");

  StationaryMoments sm = stationary_moments(m);
  double sig_max = 0.0;
  for (int j = 0; j < m.num_regimes(); ++j) {
    double ph = m.regime(j).phi(0, 0);
    sig_max = std::max(sig_max, std::sqrt(m.regime(j).cov(0, 0) / (1.0 - ph * ph)));
  }

  std::mt19937_64 gen = substream(spec.seed, stream_tag::kGrid);
  int tau0 = sample_regime(sm.nu, gen);
  SimulatedPath warm = simulate_path(m, sm.mean, tau0, 200, gen);
  Vec y_last = warm.y.row(warm.y.rows() - 1).transpose();
  int tau_last = warm.regimes.back();

  SimulatedPath ypath = simulate_path(m, y_last, tau_last, spec.n_sim, gen);
  std::vector<double> ys(ypath.y.data(), ypath.y.data() + spec.n_sim);
  std::sort(ys.begin(), ys.end());

  double mu0 = sm.mean(0);
  double ylo = std::min(mu0 - spec.coverage * sig_max, ys.front());
  double yhi = std::max(mu0 + spec.coverage * sig_max, ys.back());
  Vec y_grid(spec.n_y);
  y_grid(0) = ylo;
  y_grid(spec.n_y - 1) = yhi;
  double nsm1 = spec.n_y - 1;
  for (int i = 1; i + 1 < spec.n_y; ++i) {
    double h = (static_cast<double>(ys.size()) - 1.0) * (i / nsm1);
    std::size_t lo = static_cast<std::size_t>(h);
    double q = lo + 1 < ys.size() ? ys[lo] + (h - lo) * (ys[lo + 1] - ys[lo]) : ys.back();
    y_grid(i) = q;
  }
  for (int i = 1; i < spec.n_y; ++i)  // strictly increasing, nudge ties
    if (y_grid(i) <= y_grid(i - 1))
      y_grid(i) = y_grid(i - 1) + 1e-12 * std::max(1.0, yhi - ylo);

  // terminal discounted log-spot sample over consecutive path blocks
  long total = static_cast<long>(spec.n_paths) * n_steps;
  if (total > 100000000L) throw validation_error("grid sample too large");
  Vec y2_start = ypath.y.row(ypath.y.rows() - 1).transpose();
  SimulatedPath spath = simulate_path(m, y2_start, ypath.regimes.back(),
                                      static_cast<int>(total), gen);
  std::vector<double> terminals(spec.n_paths);
  double rate_sum = 0.0;
  for (double r : rates) rate_sum += r;
  for (int p = 0; p < spec.n_paths; ++p) {
    double acc = 0.0;
    for (int t = 0; t < n_steps; ++t) acc += spath.y(static_cast<long>(p) * n_steps + t, 0);
    terminals[p] = std::log(s0) + acc - rate_sum;
  }
  double center = 0.0;
  for (double v : terminals) center += v;
  center /= terminals.size();
  double hw = spec.coverage * sig_max * std::sqrt(static_cast<double>(n_steps));
  for (double v : terminals) hw = std::max(hw, std::abs(v - center) * 1.000001);
  hw = std::max(hw, std::abs(std::log(s0) - center) * 1.05 + 1e-6);

  int npos = spec.n_s - 1;           // positive nodes
  double dl = 2.0 * hw / (npos - 1);
  double base = center - hw;         // log of first positive node
  if (spec.align_s > 0.0) {
    double la = std::log(spec.align_s);
    double kf = (la - base) / dl;
    if (kf > -0.5 && kf < npos - 0.5) base += (la - base) - std::round(kf) * dl;
  }
  Grids g;
  g.y_grid = y_grid;
  g.s_grid.resize(spec.n_s);
  g.s_grid(0) = 0.0;
  for (int q = 1; q < spec.n_s; ++q) g.s_grid(q) = std::exp(base + (q - 1) * dl);
  return g;
}

double price(const HedgeTables& tables, double s0, double y0, int regime) {
  if (regime < 0 || regime >= tables.L()) throw validation_error("regime out of range");
  if (!(s0 >= 0.0)) throw validation_error("s0 must be nonnegative");
  double g1 = tables.g_eval(1, regime, y0);
  if (!(g1 > 0.0)) throw numeric_error("nonpositive g_1 at evaluation point");
  return tables.psi_eval(0, regime, s0, y0) / g1;
}

double price_blended(const HedgeTables& tables, double s0, double y0, const Vec& eta) {
  if (eta.size() != tables.L()) throw validation_error("eta size mismatch");
  double out = 0.0;
  for (int i = 0; i < tables.L(); ++i) {
    if (eta(i) < 0.0) throw validation_error("eta must be nonnegative");
    if (eta(i) > 0.0) out += eta(i) * price(tables, s0, y0, i);
  }
  return out;
}

double hedge_weight(const HedgeTables& tables, int t, double s_prev, double y_prev, int regime,
                    double v_prev) {
  if (t < 1 || t > tables.n()) throw validation_error("hedge step out of range");
  if (regime < 0 || regime >= tables.L()) throw validation_error("regime out of range");
  if (!(s_prev > 0.0)) throw validation_error("spot must be positive");
  double at = tables.a_eval(t, regime, y_prev);
  if (!(at > 0.0)) throw numeric_error("nonpositive a_t at evaluation point");
  double num = tables.aa_eval(t, regime, s_prev, y_prev) / at;
  return (num - v_prev * tables.h_eval(t, regime, y_prev)) / s_prev;
}

}  // namespace arhmm::hedge
