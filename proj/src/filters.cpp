#include "ski/filters.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "ski/errors.hpp"

namespace ski {

namespace {

// cholupdate with the center sigma-point weight. Negative weights first try a
// downdate; if that breaks positive definiteness the factor is rebuilt from the
// dense covariance.
void center_update(Eigen::MatrixXd& l, const Eigen::VectorXd& d, double w0c, FilterStats* stats) {
  if (w0c == 0.0) return;
  if (w0c > 0.0) {
    linalg::chol_rank_one_inplace(l, d, w0c);
    return;
  }
  Eigen::MatrixXd trial = l;
  try {
    linalg::chol_rank_one_inplace(trial, d, w0c);
    l = std::move(trial);
  } catch (const DowndateBreaksSPD&) {
    Eigen::MatrixXd cov = l * l.transpose() + w0c * d * d.transpose();
    cov = 0.5 * (cov + cov.transpose());
    l = linalg::cholesky_factor(cov).matrix();
    if (stats != nullptr) ++stats->negative_center_fallbacks;
  }
}

// R^T of the QR of [sqrt(W1c) * deviations, noise_sqrt] (columns), i.e. the
// factor of the weighted scatter of columns 1..2L plus the noise covariance.
Eigen::MatrixXd compound_factor(const Eigen::MatrixXd& deviations, double sqrt_w1,
                                const Eigen::MatrixXd& noise_sqrt) {
  const Index n = deviations.rows();
  const Index spread = deviations.cols() - 1;
  Eigen::MatrixXd compound(spread + noise_sqrt.cols(), n);
  compound.topRows(spread) = sqrt_w1 * deviations.rightCols(spread).transpose();
  compound.bottomRows(noise_sqrt.cols()) = noise_sqrt.transpose();
  return linalg::qr_r_factor(compound).matrix();
}

}  // namespace

UtWeights ut_weights(Index dim, double alpha, double beta) {
  if (dim < 1) throw InvalidHyper("ut_weights: dimension must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0) || !std::isfinite(beta)) {
    throw InvalidHyper("ut_weights: alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
  UtWeights w;
  w.alpha = alpha;
  w.beta = beta;
  const double l = static_cast<double>(dim);
  w.lambda = l * (alpha * alpha - 1.0);
  w.eta = std::sqrt(l + w.lambda);
  const Index n = 2 * dim + 1;
  w.wm = Eigen::VectorXd::Constant(n, 1.0 / (2.0 * (l + w.lambda)));
  w.wc = w.wm;
  w.wm(0) = w.lambda / (l + w.lambda);
  w.wc(0) = w.wm(0) + (1.0 - alpha * alpha + beta);
  return w;
}

Eigen::MatrixXd sigma_points(const GaussianBelief& belief, double eta) {
  const Index n = belief.dim();
  Eigen::MatrixXd chi(n, 2 * n + 1);
  chi.col(0) = belief.mean;
  const Eigen::MatrixXd scaled = eta * belief.factor.matrix();
  chi.middleCols(1, n) = scaled.colwise() + belief.mean;
  chi.rightCols(n) = (-scaled).colwise() + belief.mean;
  return chi;
}

GaussianBelief srukf_predict(const GaussianBelief& belief, const Eigen::VectorXd& u,
                             const ParametricModel& model, const UtWeights& w,
                             FilterStats* stats) {
  const Index n = model.dims().augmented();
  if (belief.dim() != n || w.dim() != n) {
    throw DimensionMismatch("srukf_predict: belief/weights do not match the model");
  }
  const Eigen::MatrixXd chi = sigma_points(belief, w.eta);
  Eigen::MatrixXd propagated(n, chi.cols());
  for (Index i = 0; i < chi.cols(); ++i) {
    propagated.col(i) = augmented_transition(model, chi.col(i), u);
  }
  GaussianBelief out;
  out.mean = propagated * w.wm;
  const Eigen::MatrixXd dev = propagated.colwise() - out.mean;
  Eigen::MatrixXd l = compound_factor(dev, std::sqrt(w.wc(1)), model.noise().q_sqrt.matrix());
  center_update(l, dev.col(0), w.wc(0), stats);
  out.factor = LowerTriangular(std::move(l));
  return out;
}

GaussianBelief srukf_correct(const GaussianBelief& belief, const Eigen::VectorXd& y,
                             const ParametricModel& model, const UtWeights& w,
                             FilterStats* stats) {
  const Dims& d = model.dims();
  const Index n = d.augmented();
  if (belief.dim() != n || w.dim() != n) {
    throw DimensionMismatch("srukf_correct: belief/weights do not match the model");
  }
  if (y.size() != d.obs) throw DimensionMismatch("srukf_correct: observation has wrong length");

  const Eigen::MatrixXd chi = sigma_points(belief, w.eta);
  Eigen::MatrixXd gamma(d.obs, chi.cols());
  for (Index i = 0; i < chi.cols(); ++i) {
    gamma.col(i) = model.observe(chi.col(i).head(d.state));
  }
  const Eigen::VectorXd y_pred = gamma * w.wm;
  const Eigen::MatrixXd gdev = gamma.colwise() - y_pred;
  const Eigen::MatrixXd xdev = chi.colwise() - belief.mean;

  Eigen::MatrixXd uy = compound_factor(gdev, std::sqrt(w.wc(1)), model.noise().r_sqrt.matrix());
  center_update(uy, gdev.col(0), w.wc(0), stats);
  const LowerTriangular uy_factor(std::move(uy));

  const Eigen::MatrixXd cross = xdev * w.wc.asDiagonal() * gdev.transpose();
  const Eigen::MatrixXd gain = linalg::solve_with_factor(uy_factor, cross.transpose()).transpose();

  GaussianBelief out;
  out.mean = belief.mean + gain * (y - y_pred);
  Eigen::MatrixXd l = belief.factor.matrix();
  const Eigen::MatrixXd gamma_k = gain * uy_factor.matrix();
  for (Index j = 0; j < gamma_k.cols(); ++j) {
    linalg::chol_rank_one_inplace(l, gamma_k.col(j), -1.0);
  }
  if (!out.mean.allFinite()) throw NonFinite("srukf_correct: non-finite posterior mean");
  out.factor = LowerTriangular(std::move(l));
  return out;
}

GaussianBelief DenseBelief::factored() const {
  return GaussianBelief{mean, linalg::cholesky_factor(0.5 * (cov + cov.transpose()))};
}

DenseBelief to_dense(const GaussianBelief& belief) {
  return DenseBelief{belief.mean, belief.covariance()};
}

Eigen::MatrixXd transition_jacobian_fd(const ParametricModel& model, const Eigen::VectorXd& xbar,
                                       const Eigen::VectorXd& u) {
  const Index n = xbar.size();
  Eigen::MatrixXd j(n, n);
  Eigen::VectorXd probe = xbar;
  for (Index i = 0; i < n; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(xbar(i)));
    probe(i) = xbar(i) + h;
    const Eigen::VectorXd fp = augmented_transition(model, probe, u);
    probe(i) = xbar(i) - h;
    const Eigen::VectorXd fm = augmented_transition(model, probe, u);
    probe(i) = xbar(i);
    j.col(i) = (fp - fm) / (2.0 * h);
  }
  return j;
}

Eigen::MatrixXd observation_jacobian_fd(const ParametricModel& model, const Eigen::VectorXd& x) {
  const Index n = x.size();
  const Index m = model.dims().obs;
  Eigen::MatrixXd jac(m, n);
  Eigen::VectorXd probe = x;
  for (Index i = 0; i < n; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    probe(i) = x(i) + h;
    const Eigen::VectorXd fp = model.observe(probe);
    probe(i) = x(i) - h;
    const Eigen::VectorXd fm = model.observe(probe);
    probe(i) = x(i);
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

DenseBelief ekf_predict(const DenseBelief& belief, const Eigen::VectorXd& u,
                        const ParametricModel& model, const EkfJacobians& jac, EkfWorkspace* ws) {
  const Dims& d = model.dims();
  if (belief.mean.size() != d.augmented()) {
    throw DimensionMismatch("ekf_predict: belief does not match the model");
  }
  const Eigen::MatrixXd j = jac.transition ? jac.transition(belief.mean, u)
                                           : transition_jacobian_fd(model, belief.mean, u);
  DenseBelief out;
  out.mean = augmented_transition(model, belief.mean, u);
  out.cov = j * belief.cov * j.transpose();
  out.cov.topLeftCorner(d.state, d.state) += model.q();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  if (ws != nullptr) ws->j = j;
  return out;
}

DenseBelief ekf_correct(const DenseBelief& belief, const Eigen::VectorXd& y,
                        const ParametricModel& model, const EkfJacobians& jac, EkfWorkspace* ws) {
  const Dims& d = model.dims();
  const Index n = d.augmented();
  if (belief.mean.size() != n) throw DimensionMismatch("ekf_correct: belief does not match model");
  if (y.size() != d.obs) throw DimensionMismatch("ekf_correct: observation has wrong length");

  const Eigen::VectorXd x = belief.mean.head(d.state);
  Eigen::MatrixXd hbar = Eigen::MatrixXd::Zero(d.obs, n);
  hbar.leftCols(d.state) =
      jac.observation ? jac.observation(x) : observation_jacobian_fd(model, x);

  const Eigen::MatrixXd ph = belief.cov * hbar.transpose();
  Eigen::MatrixXd innov = hbar * ph + model.r();
  innov = 0.5 * (innov + innov.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(innov);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("ekf_correct: innovation covariance is not positive definite");
  }
  const Eigen::MatrixXd gain = llt.solve(ph.transpose()).transpose();

  DenseBelief out;
  out.mean = belief.mean + gain * (y - model.observe(x));
  const Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(n, n) - gain * hbar;
  out.cov = ikh * belief.cov * ikh.transpose() + gain * model.r() * gain.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  if (!out.mean.allFinite() || !out.cov.allFinite()) {
    throw NonFinite("ekf_correct: non-finite posterior");
  }
  Eigen::LLT<Eigen::MatrixXd> check(out.cov);
  if (check.info() != Eigen::Success) {
    throw NotPositiveDefinite("ekf_correct: posterior covariance lost positive definiteness");
  }
  if (ws != nullptr) {
    ws->hbar = hbar;
    ws->k = gain;
  }
  return out;
}

}  // namespace ski
