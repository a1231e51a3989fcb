#include "ski/ard.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "ski/errors.hpp"

namespace ski::ard {

double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inverse(double s) {
  if (!(s > 0.0)) throw std::invalid_argument("softplus_inverse: argument must be positive");
  if (s > 30.0) return s + std::log(-std::expm1(-s));
  return std::log(std::expm1(s));
}

double softplus_slope(double s) { return -std::expm1(-s); }

Loss ard_loss(const Eigen::VectorXd& m_old, const Eigen::MatrixXd& s_old_marg,
              const Eigen::VectorXd& s0_old, const Eigen::VectorXd& s_new) {
  const Index n = m_old.size();
  if (s_old_marg.rows() != n || s_old_marg.cols() != n || s0_old.size() != n ||
      s_new.size() != n) {
    throw DimensionMismatch("ard_loss: inconsistent sizes");
  }
  Loss out;
  Workspace& ws = out.workspace;
  ws.s_new = s_new;
  ws.d = s_new.cwiseInverse() - s0_old.cwiseInverse();

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  // I + D St and its transpose I + St D share one LU up to transposition.
  const Eigen::MatrixXd left = id + ws.d.asDiagonal() * s_old_marg;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(left);
  const Eigen::MatrixXd& lu_mat = lu.matrixLU();
  double sign = lu.permutationP().determinant();
  double logabs = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double u = lu_mat(i, i);
    if (u == 0.0 || !std::isfinite(u)) throw SingularM("ard_loss: M is singular");
    if (u < 0.0) sign = -sign;
    logabs += std::log(std::abs(u));
  }
  if (sign <= 0.0) throw SingularM("ard_loss: det(M) <= 0");

  ws.a = lu.solve(Eigen::MatrixXd(ws.d.asDiagonal()));
  ws.z = lu.transpose().solve(m_old);
  ws.q = ws.d.cwiseProduct(ws.z);
  ws.m = Eigen::MatrixXd(s_new.asDiagonal()) * left;
  ws.m_inv = lu.inverse() * s_new.cwiseInverse().asDiagonal();
  ws.l1 = m_old.dot(ws.q);
  ws.l2 = s_new.array().log().sum() + logabs;
  out.value = ws.l1 + ws.l2;
  if (!std::isfinite(out.value)) throw SingularM("ard_loss: non-finite loss");
  return out;
}

Eigen::VectorXd ard_gradient(const Workspace& ws, const Eigen::VectorXd& s_tilde,
                             const Eigen::MatrixXd& s_old_marg, const Eigen::VectorXd& s0_old,
                             GradientForm form) {
  const Index n = s_tilde.size();
  Eigen::VectorXd grad(n);
  for (Index i = 0; i < n; ++i) {
    const double slope = softplus_slope(ws.s_new(i));
    double ds;
    if (form == GradientForm::Exact) {
      // [(I - S0old^-1 St) M^-1]_ii
      const double l2 = ws.m_inv(i, i) - s_old_marg.row(i).dot(ws.m_inv.col(i)) / s0_old(i);
      const double ratio = ws.z(i) / ws.s_new(i);
      ds = l2 - ratio * ratio;
    } else {
      ds = ws.m_inv(i, i) * (1.0 - s_old_marg(i, i) / s0_old(i)) - ws.q(i) * ws.q(i);
    }
    grad(i) = slope * ds;
  }
  return grad;
}

Engine::Engine(const Eigen::VectorXd& initial_variances, Settings settings)
    : settings_(settings) {
  if (!(settings_.variance_floor > 0.0)) {
    throw InvalidHyper("ard: variance floor must be positive");
  }
  if (settings_.n_hp < 0 || !(settings_.eta_hp >= 0.0)) {
    throw InvalidHyper("ard: eta_hp and n_hp must be non-negative");
  }
  if ((initial_variances.array() <= 0.0).any()) {
    throw InvalidHyper("ard: initial prior variances must be positive");
  }
  Eigen::VectorXd st(initial_variances.size());
  for (Index i = 0; i < st.size(); ++i) st(i) = softplus_inverse(initial_variances(i));
  set_s_tilde(st);
  s0_old_ = s_;
}

void Engine::set_s_tilde(const Eigen::VectorXd& s_tilde) {
  const double floor_tilde = softplus_inverse(settings_.variance_floor);
  s_tilde_ = s_tilde.cwiseMax(floor_tilde);
  s_.resize(s_tilde_.size());
  for (Index i = 0; i < s_.size(); ++i) s_(i) = softplus(s_tilde_(i));
}

StepResult ard_step(const Engine& engine, const Eigen::VectorXd& m_old,
                    const Eigen::MatrixXd& s_old_marg) {
  StepResult out{engine, 0, false, {}};
  const Settings& cfg = engine.settings();
  if (cfg.n_hp == 0 || cfg.eta_hp == 0.0) return out;

  Engine current = engine;
  for (int k = 0; k < cfg.n_hp; ++k) {
    Loss loss;
    try {
      loss = ard_loss(m_old, s_old_marg, current.frozen_prior(), current.variances());
    } catch (const SingularM&) {
      break;
    }
    // The iterate that produced this loss is admissible; keep it.
    if (k > 0) {
      out.engine = current;
      ++out.accepted;
    }
    out.losses.push_back(loss.value);
    const Eigen::VectorXd grad = ard_gradient(loss.workspace, current.s_tilde(), s_old_marg,
                                              current.frozen_prior(), cfg.gradient);
    current.set_s_tilde(current.s_tilde() - cfg.eta_hp * grad);
  }
  // The last proposal has not been checked yet.
  if (out.losses.size() == static_cast<std::size_t>(cfg.n_hp)) {
    try {
      const Loss last = ard_loss(m_old, s_old_marg, current.frozen_prior(), current.variances());
      (void)last;
      out.engine = current;
      ++out.accepted;
    } catch (const SingularM&) {
    }
  }
  out.rejected = out.accepted == 0;
  return out;
}

GaussianBelief posterior_refresh(const GaussianBelief& belief, Index state_dim,
                                 const Eigen::VectorXd& s0_old, const Eigen::VectorXd& s0_new,
                                 RefreshStats* stats) {
  const Index nt = s0_new.size();
  const Index n = belief.dim();
  if (s0_old.size() != nt || state_dim + nt != n || state_dim < 0) {
    throw DimensionMismatch("posterior_refresh: inconsistent sizes");
  }
  const Eigen::VectorXd d = s0_new.cwiseInverse() - s0_old.cwiseInverse();
  if ((d.array() == 0.0).all()) return belief;

  const Eigen::MatrixXd cov = belief.covariance();
  const Eigen::MatrixXd cov_theta = cov.rightCols(nt);  // Sigma * Hp^T
  const Eigen::MatrixXd st = cov.bottomRightCorner(nt, nt);
  const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(nt, nt) + d.asDiagonal() * st;
  const Eigen::MatrixXd a = left.partialPivLu().solve(Eigen::MatrixXd(d.asDiagonal()));
  const Eigen::MatrixXd gain = cov_theta * a;

  GaussianBelief out;
  out.mean = belief.mean - gain * belief.mean.tail(nt);
  Eigen::MatrixXd cov_new = cov - gain * cov_theta.transpose();
  cov_new = 0.5 * (cov_new + cov_new.transpose());
  if (!out.mean.allFinite() || !cov_new.allFinite()) {
    throw NonFinite("posterior_refresh: non-finite posterior");
  }
  try {
    out.factor = linalg::cholesky_factor(cov_new);
  } catch (const NotPositiveDefinite&) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_new);
    const Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(1e-10);
    Eigen::MatrixXd repaired = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
    repaired = 0.5 * (repaired + repaired.transpose());
    out.factor = linalg::cholesky_factor(repaired);
    if (stats != nullptr) ++stats->repairs;
  }
  return out;
}

std::vector<Index> selected_basis(const Eigen::VectorXd& variances, double threshold) {
  std::vector<Index> out;
  if (variances.size() == 0) return out;
  const double cut = threshold * variances.maxCoeff();
  for (Index i = 0; i < variances.size(); ++i) {
    if (variances(i) >= cut) out.push_back(i);
  }
  return out;
}

}  // namespace ski::ard
