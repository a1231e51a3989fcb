#pragma once

#include <vector>

#include <Eigen/Core>

#include "ski/model.hpp"

namespace ski::ard {

// Which closed form ard_gradient evaluates.
//   Exact     - the derivative of the loss returned by ard_loss:
//               dL/ds_i = [(I - S0old^-1 St) M^-1]_ii - z_i^2 / s_i^2,
//               z = (I + St D)^-1 m.
//   AsPrinted - sigma(s~_i) * ([M^-1]_ii (1 - St_ii / s0old_i) - q_i^2), which
//               drops the off-diagonal coupling and the d(Delta S0)/ds factor.
enum class GradientForm { Exact, AsPrinted };

struct Settings {
  double eta_hp = 1e-2;
  int n_hp = 5;
  double variance_floor = 1e-8;
  double report_threshold = 1e-4;  // relative to the largest variance
  GradientForm gradient = GradientForm::Exact;
};

double softplus(double x);
double softplus_inverse(double s);
// d softplus / dx evaluated through s = softplus(x): 1 - exp(-s).
double softplus_slope(double s);

struct Workspace {
  Eigen::VectorXd d;  // diag((S0new)^-1 - (S0old)^-1)
  Eigen::MatrixXd a;  // (I + D St)^-1 D
  Eigen::MatrixXd m;  // S0new + (I - S0new S0old^-1) St
  Eigen::MatrixXd m_inv;
  Eigen::VectorXd q;  // a * m_old
  Eigen::VectorXd z;  // (I + St D)^-1 m_old, q = D z
  Eigen::VectorXd s_new;
  double l1 = 0.0;
  double l2 = 0.0;
};

struct Loss {
  double value = 0.0;
  Workspace workspace;
};

// L = m^T (St + Delta S0)^-1 m + log|M| evaluated without forming Delta S0.
// Throws SingularM if det(M) <= 0.
Loss ard_loss(const Eigen::VectorXd& m_old, const Eigen::MatrixXd& s_old_marg,
              const Eigen::VectorXd& s0_old, const Eigen::VectorXd& s_new);

// Gradient with respect to the unconstrained hyperparameters s~.
Eigen::VectorXd ard_gradient(const Workspace& ws, const Eigen::VectorXd& s_tilde,
                             const Eigen::MatrixXd& s_old_marg, const Eigen::VectorXd& s0_old,
                             GradientForm form = GradientForm::Exact);

// Online ARD state: unconstrained hyperparameters, derived variances, and the
// prior the current posterior was computed under.
class Engine {
 public:
  Engine() = default;
  Engine(const Eigen::VectorXd& initial_variances, Settings settings);

  const Eigen::VectorXd& s_tilde() const { return s_tilde_; }
  const Eigen::VectorXd& variances() const { return s_; }
  const Eigen::VectorXd& frozen_prior() const { return s0_old_; }
  const Settings& settings() const { return settings_; }
  Index size() const { return s_.size(); }

  // Sets s~ (and s) with the variance floor applied.
  void set_s_tilde(const Eigen::VectorXd& s_tilde);
  // Marks the current variances as the prior of the posterior (after refresh).
  void freeze() { s0_old_ = s_; }

 private:
  Eigen::VectorXd s_tilde_;
  Eigen::VectorXd s_;
  Eigen::VectorXd s0_old_;
  Settings settings_;
};

struct StepResult {
  Engine engine;
  int accepted = 0;
  bool rejected = false;  // every iterate hit SingularM; engine unchanged
  std::vector<double> losses;  // loss at each accepted iterate, before its update
};

// n_hp gradient steps s~ <- s~ - eta_hp * grad against the frozen prior.
StepResult ard_step(const Engine& engine, const Eigen::VectorXd& m_old,
                    const Eigen::MatrixXd& s_old_marg);

struct RefreshStats {
  long repairs = 0;  // eigenvalue-floor repairs applied before refactoring
};

// Kalman-style correction with the pseudo-observation theta = 0 whose noise
// covariance is (diag(1/s0_new - 1/s0_old))^-1. `state_dim` may be zero.
// Throws NotPositiveDefinite when the repaired covariance still cannot be
// factored.
GaussianBelief posterior_refresh(const GaussianBelief& belief, Index state_dim,
                                 const Eigen::VectorXd& s0_old, const Eigen::VectorXd& s0_new,
                                 RefreshStats* stats = nullptr);

// Indices whose variance is at least threshold * max variance.
std::vector<Index> selected_basis(const Eigen::VectorXd& variances, double threshold);

}  // namespace ski::ard
