#include "arhmm/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <utility>

#include "arhmm/gaussian.hpp"
#include "arhmm/rng.hpp"

namespace arhmm {

namespace {

double spectral_radius(const Mat& phi) {
  if (phi.rows() == 1) return std::abs(phi(0, 0));
  Eigen::EigenSolver<Mat> es(phi, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void check_stochastic_vector(const Vec& v, const char* what) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0 + 1e-12))
      throw validation_error(std::string(what) + " entries must lie in [0, 1]");
    sum += v[i];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw validation_error(std::string(what) + " must sum to 1 within 1e-12");
}

}  // namespace

ArhmmModel::ArhmmModel(std::vector<RegimeParams> regimes, Mat q, Vec eta0) {
  regimes_ = std::move(regimes);
  q_ = std::move(q);
  eta0_ = std::move(eta0);
  finalize(/*checked=*/true);
}

ArhmmModel ArhmmModel::unchecked(std::vector<RegimeParams> regimes, Mat q, Vec eta0) {
  ArhmmModel m;
  m.regimes_ = std::move(regimes);
  m.q_ = std::move(q);
  m.eta0_ = std::move(eta0);
  m.finalize(/*checked=*/false);
  return m;
}

void ArhmmModel::finalize(bool checked) {
  const int l = static_cast<int>(regimes_.size());
  if (l < 1) throw validation_error("model needs at least one regime");
  dim_ = static_cast<int>(regimes_[0].mu.size());
  if (dim_ < 1) throw validation_error("regime mean must have dimension >= 1");

  for (int j = 0; j < l; ++j) {
    const RegimeParams& r = regimes_[j];
    if (r.mu.size() != dim_ || r.phi.rows() != dim_ || r.phi.cols() != dim_ ||
        r.cov.rows() != dim_ || r.cov.cols() != dim_)
      throw validation_error("regime " + std::to_string(j) +
                             ": mu/phi/cov dimensions disagree");
    if (checked && spectral_radius(r.phi) >= 1.0)
      throw validation_error("regime " + std::to_string(j) +
                             ": spectral radius of phi must be < 1");
    if (checked && !r.cov.isApprox(r.cov.transpose(), 1e-10))
      throw validation_error("regime " + std::to_string(j) + ": cov must be symmetric");
  }

  if (q_.rows() != l || q_.cols() != l)
    throw validation_error("transition matrix must be l x l");
  for (int i = 0; i < l; ++i) check_stochastic_vector(q_.row(i), "transition row");

  if (eta0_.size() == 0) eta0_ = Vec::Constant(l, 1.0 / l);
  if (eta0_.size() != l) throw validation_error("eta0 must have one entry per regime");
  check_stochastic_vector(eta0_, "eta0");

  chol_.resize(l);
  cov_inv_.resize(l);
  log_norm_.resize(l);
  spd_.assign(l, false);
  for (int j = 0; j < l; ++j) {
    Eigen::LLT<Mat> llt(regimes_[j].cov);
    bool ok = (llt.info() == Eigen::Success);
    if (ok) {
      Mat lmat = llt.matrixL();
      ok = lmat.diagonal().minCoeff() > 0.0;
      if (ok) {
        chol_[j] = lmat;
        cov_inv_[j] = llt.solve(Mat::Identity(dim_, dim_));
        double log_det = 2.0 * lmat.diagonal().array().log().sum();
        log_norm_[j] = -0.5 * (dim_ * kLog2Pi + log_det);
        spd_[j] = true;
      }
    }
    if (!ok) {
      if (checked)
        throw validation_error("regime " + std::to_string(j) +
                               ": cov must be positive definite");
      // PSD square root so degenerate test models can still simulate.
      Eigen::SelfAdjointEigenSolver<Mat> es(regimes_[j].cov);
      Vec ev = es.eigenvalues().cwiseMax(0.0);
      chol_[j] = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
      cov_inv_[j] = Mat::Zero(dim_, dim_);
      log_norm_[j] = 0.0;
      spd_[j] = false;
    }
  }
}

double ArhmmModel::log_cond_density(int j, const Vec& y_prev, const Vec& y) const {
  if (!spd_[j])
    throw numeric_error("regime " + std::to_string(j) +
                        ": density undefined for singular covariance");
  if (dim_ == 1) {
    const RegimeParams& r = regimes_[j];
    double e = y[0] - r.mu[0] - r.phi(0, 0) * (y_prev[0] - r.mu[0]);
    return log_norm_[j] - 0.5 * e * e * cov_inv_[j](0, 0);
  }
  Vec e = y - cond_mean(j, y_prev);
  return log_norm_[j] - 0.5 * e.dot(cov_inv_[j] * e);
}

double ArhmmModel::cond_density(int j, const Vec& y_prev, const Vec& y) const {
  return std::exp(log_cond_density(j, y_prev, y));
}

double conditional_density(const ArhmmModel& m, int j, const Vec& y_prev, const Vec& y) {
  return m.cond_density(j, y_prev, y);
}

double conditional_log_density(const ArhmmModel& m, int j, const Vec& y_prev,
                               const Vec& y) {
  return m.log_cond_density(j, y_prev, y);
}

Vec stationary_regime_dist(const Mat& q) {
  const Eigen::Index l = q.rows();
  if (l != q.cols() || l < 1) throw validation_error("transition matrix must be square");
  Mat a = q.transpose() - Mat::Identity(l, l);
  Eigen::FullPivLU<Mat> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() != l - 1)
    throw numeric_error("transition matrix is not ergodic: stationary distribution "
                        "is not unique");
  // Stack the normalization onto the balance equations and solve least squares.
  Mat sys(l + 1, l);
  sys.topRows(l) = a;
  sys.row(l).setOnes();
  Vec rhs = Vec::Zero(l + 1);
  rhs[l] = 1.0;
  Vec nu = sys.colPivHouseholderQr().solve(rhs);
  if (nu.minCoeff() < -1e-10)
    throw numeric_error("stationary distribution has negative mass");
  nu = nu.cwiseMax(0.0);
  nu /= nu.sum();
  if ((nu.transpose() * q - nu.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw numeric_error("stationary distribution failed to verify nu' Q = nu'");
  return nu;
}

StationaryMoments stationary_moments(const ArhmmModel& m, double tol, int max_iter) {
  const int l = m.num_regimes();
  const int d = m.dim();
  StationaryMoments out;
  out.nu = stationary_regime_dist(m.q());

  // mean: sum_i nu_i (I - phi_i) mu = sum_i nu_i (I - phi_i) mu_i
  Mat lhs = Mat::Zero(d, d);
  Vec rhs = Vec::Zero(d);
  for (int i = 0; i < l; ++i) {
    Mat imphi = Mat::Identity(d, d) - m.regime(i).phi;
    lhs += out.nu[i] * imphi;
    rhs += out.nu[i] * (imphi * m.regime(i).mu);
  }
  out.mean = lhs.colPivHouseholderQr().solve(rhs);

  // covariance: fixed point of A -> B + sum_i nu_i phi_i A phi_i'
  Mat bmat = -out.mean * out.mean.transpose();
  for (int i = 0; i < l; ++i) {
    const RegimeParams& r = m.regime(i);
    Vec c = (Mat::Identity(d, d) - r.phi) * r.mu + r.phi * out.mean;
    bmat += out.nu[i] * (c * c.transpose() + r.cov);
  }
  Mat a = Mat::Zero(d, d);
  for (int it = 0; it < max_iter; ++it) {
    Mat next = bmat;
    for (int i = 0; i < l; ++i) {
      const Mat& phi = m.regime(i).phi;
      next += out.nu[i] * (phi * a * phi.transpose());
    }
    double change = (next - a).cwiseAbs().maxCoeff();
    a = next;
    out.iterations = it + 1;
    if (change < tol) {
      out.cov = 0.5 * (a + a.transpose());  // enforce exact symmetry
      return out;
    }
  }
  throw numeric_error("stationary covariance iteration failed to converge");
}

SimulatedPath simulate_path(const ArhmmModel& m, const Vec& y0, int tau0, int n_steps,
                            std::mt19937_64& gen) {
  const int l = m.num_regimes();
  const int d = m.dim();
  if (y0.size() != d) throw validation_error("y0 dimension mismatch");
  if (tau0 < 0 || tau0 >= l) throw validation_error("tau0 out of range");
  if (n_steps < 0) throw validation_error("n_steps must be >= 0");

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SimulatedPath out;
  out.y.resize(n_steps, d);
  out.regimes.resize(n_steps);

  Vec y = y0;
  Vec z(d);
  int tau = tau0;
  for (int t = 0; t < n_steps; ++t) {
    // chain moves first, then the new regime emits
    double u = unif(gen);
    double acc = 0.0;
    int next = l - 1;
    for (int j = 0; j < l; ++j) {
      acc += m.q()(tau, j);
      if (u <= acc) {
        next = j;
        break;
      }
    }
    tau = next;
    for (int k = 0; k < d; ++k) z[k] = normal(gen);
    y = m.cond_mean(tau, y) + m.chol(tau) * z;
    out.y.row(t) = y.transpose();
    out.regimes[t] = tau;
  }
  return out;
}

SimulatedPath simulate_path(const ArhmmModel& m, const Vec& y0, int tau0, int n_steps,
                            std::uint64_t seed) {
  std::mt19937_64 gen = substream(seed, stream_tag::kSimulate);
  return simulate_path(m, y0, tau0, n_steps, gen);
}

int sample_regime(const Vec& dist, std::mt19937_64& gen) {
  if (dist.size() == 0) throw validation_error("empty distribution");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(gen);
  double acc = 0.0;
  for (int i = 0; i + 1 < dist.size(); ++i) {
    acc += dist(i);
    if (u <= acc) return i;
  }
  return static_cast<int>(dist.size()) - 1;
}

}  // namespace arhmm
