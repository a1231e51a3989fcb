#pragma once

#include <functional>
#include <optional>

#include <Eigen/Core>

#include "ski/model.hpp"

namespace ski {

// Unscented-transform weights. lambda = L * (alpha^2 - 1); there is no kappa term.
struct UtWeights {
  double alpha = 1e-3;
  double beta = 2.0;
  double lambda = 0.0;
  double eta = 0.0;  // sqrt(L + lambda), the sigma-point spread
  Eigen::VectorXd wm;
  Eigen::VectorXd wc;

  Index dim() const { return (wm.size() - 1) / 2; }
};

// Throws InvalidHyper unless 0 < alpha <= 1 and L >= 1.
UtWeights ut_weights(Index dim, double alpha, double beta);

// Columns [xi, xi + eta*U, xi - eta*U]; 2L+1 columns.
Eigen::MatrixXd sigma_points(const GaussianBelief& belief, double eta);

// Counters for the non-fatal recovery paths taken by the filters.
struct FilterStats {
  long negative_center_fallbacks = 0;  // W0c < 0 downdate failed, refactored densely
};

// Square-root UKF time update over the augmented state.
GaussianBelief srukf_predict(const GaussianBelief& belief, const Eigen::VectorXd& u,
                             const ParametricModel& model, const UtWeights& w,
                             FilterStats* stats = nullptr);

// Square-root UKF measurement update. Sigma points are drawn from the
// predicted belief. Throws DowndateBreaksSPD when the posterior factor cannot
// be formed.
GaussianBelief srukf_correct(const GaussianBelief& belief, const Eigen::VectorXd& y,
                             const ParametricModel& model, const UtWeights& w,
                             FilterStats* stats = nullptr);

// Dense-covariance belief used by the EKF baseline.
struct DenseBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  GaussianBelief factored() const;
};

DenseBelief to_dense(const GaussianBelief& belief);

// Optional analytic Jacobians; when absent the EKF uses central differences
// with step 1e-6 * max(1, |xi_i|).
struct EkfJacobians {
  std::function<Eigen::MatrixXd(const Eigen::VectorXd& xbar, const Eigen::VectorXd& u)> transition;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd& x)> observation;
};

struct EkfWorkspace {
  Eigen::MatrixXd j;     // augmented transition Jacobian
  Eigen::MatrixXd hbar;  // [dh/dx, 0]
  Eigen::MatrixXd k;     // Kalman gain
};

Eigen::MatrixXd transition_jacobian_fd(const ParametricModel& model, const Eigen::VectorXd& xbar,
                                       const Eigen::VectorXd& u);
Eigen::MatrixXd observation_jacobian_fd(const ParametricModel& model, const Eigen::VectorXd& x);

DenseBelief ekf_predict(const DenseBelief& belief, const Eigen::VectorXd& u,
                        const ParametricModel& model, const EkfJacobians& jac = {},
                        EkfWorkspace* ws = nullptr);

// Joseph-form covariance update; throws NotPositiveDefinite if the result is
// not positive definite.
DenseBelief ekf_correct(const DenseBelief& belief, const Eigen::VectorXd& y,
                        const ParametricModel& model, const EkfJacobians& jac = {},
                        EkfWorkspace* ws = nullptr);

}  // namespace ski
