#include "ski/model.hpp"

#include <string>

#include "ski/errors.hpp"

namespace ski {

void Dims::validate() const {
  if (state < 1 || obs < 1 || params < 1 || unknown < 1 || input < 0) {
    throw DimensionMismatch("Dims: d_x, d_y, d_theta, d_f must be >= 1 and d_u >= 0");
  }
}

BasisLibrary::BasisLibrary(std::vector<std::string> names, Index unknown_dim, Evaluator evaluator)
    : names_(std::move(names)), unknown_dim_(unknown_dim), evaluator_(std::move(evaluator)) {
  if (names_.empty()) throw DimensionMismatch("BasisLibrary: empty basis");
  if (unknown_dim_ < 1) throw DimensionMismatch("BasisLibrary: unknown dimension must be >= 1");
  if (!evaluator_) throw std::invalid_argument("BasisLibrary: missing evaluator");
}

Eigen::MatrixXd BasisLibrary::evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  Eigen::MatrixXd phi = evaluator_(x, u);
  if (phi.rows() != unknown_dim_ || phi.cols() != size()) {
    throw DimensionMismatch("BasisLibrary: evaluator returned " + std::to_string(phi.rows()) +
                            "x" + std::to_string(phi.cols()) + ", expected " +
                            std::to_string(unknown_dim_) + "x" + std::to_string(size()));
  }
  return phi;
}

ParametricModel::ParametricModel(Spec spec) : spec_(std::move(spec)) {
  const Dims& d = spec_.dims;
  d.validate();
  if (spec_.basis.size() != d.params || spec_.basis.unknown_dim() != d.unknown) {
    throw DimensionMismatch("ParametricModel: basis library does not match dims");
  }
  if (!spec_.dynamics || !spec_.observe) {
    throw std::invalid_argument("ParametricModel: dynamics and observation are required");
  }
  if (!(spec_.dt > 0.0)) throw std::invalid_argument("ParametricModel: dt must be positive");
  if (spec_.q.rows() != d.state || spec_.q.cols() != d.state) {
    throw DimensionMismatch("ParametricModel: Q must be d_x x d_x");
  }
  if (spec_.r.rows() != d.obs || spec_.r.cols() != d.obs) {
    throw DimensionMismatch("ParametricModel: R must be d_y x d_y");
  }
  Eigen::MatrixXd q_aug = Eigen::MatrixXd::Zero(d.augmented(), d.augmented());
  q_aug.topLeftCorner(d.state, d.state) = spec_.q;
  noise_.q_sqrt = linalg::psd_factor(q_aug);
  noise_.r_sqrt = linalg::cholesky_factor(spec_.r);
}

Eigen::VectorXd ParametricModel::unknown_term(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                              const Eigen::VectorXd& theta) const {
  return spec_.basis.evaluate(x, u) * theta;
}

Eigen::VectorXd ParametricModel::derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                            const Eigen::VectorXd& theta) const {
  return spec_.dynamics(x, u, unknown_term(x, u, theta));
}

Eigen::VectorXd ParametricModel::step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& theta) const {
  const double h = spec_.dt;
  auto rhs = [&](const Eigen::VectorXd& s) {
    return spec_.dynamics(s, u, unknown_term(s, u, theta));
  };
  if (spec_.integrator == Integrator::Euler) {
    return x + h * rhs(x);
  }
  const Eigen::VectorXd k1 = rhs(x);
  const Eigen::VectorXd k2 = rhs(x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = rhs(x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = rhs(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Eigen::VectorXd ParametricModel::observe(const Eigen::VectorXd& x) const {
  return spec_.observe(x);
}

Eigen::VectorXd augmented_transition(const ParametricModel& model, const Eigen::VectorXd& xbar,
                                     const Eigen::VectorXd& u) {
  const Dims& d = model.dims();
  if (xbar.size() != d.augmented()) {
    throw DimensionMismatch("augmented_transition: augmented vector has wrong length");
  }
  Eigen::VectorXd out(xbar.size());
  const Eigen::VectorXd theta = xbar.tail(d.params);
  out.head(d.state) = model.step(xbar.head(d.state), u, theta);
  out.tail(d.params) = theta;
  if (!out.allFinite()) {
    throw NonFinite("augmented_transition: transition produced a non-finite state");
  }
  return out;
}

GaussianBelief initial_belief(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& p0,
                              const Eigen::VectorXd& m0, const Eigen::VectorXd& s0_diag) {
  const Index nx = mu0.size();
  const Index nt = m0.size();
  if (p0.rows() != nx || p0.cols() != nx || s0_diag.size() != nt) {
    throw DimensionMismatch("initial_belief: inconsistent block sizes");
  }
  if ((s0_diag.array() <= 0.0).any()) {
    throw NotPositiveDefinite("initial_belief: prior variances must be positive");
  }
  GaussianBelief b;
  b.mean.resize(nx + nt);
  b.mean << mu0, m0;
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(nx + nt, nx + nt);
  if (nx > 0) u.topLeftCorner(nx, nx) = linalg::cholesky_factor(p0).matrix();
  u.bottomRightCorner(nt, nt).diagonal() = s0_diag.cwiseSqrt();
  b.factor = LowerTriangular(std::move(u));
  return b;
}

BeliefBlocks belief_blocks(const GaussianBelief& belief, const Dims& dims) {
  if (belief.dim() != dims.augmented()) {
    throw DimensionMismatch("belief_blocks: belief dimension does not match dims");
  }
  const Eigen::MatrixXd cov = belief.covariance();
  const Index nx = dims.state;
  const Index nt = dims.params;
  BeliefBlocks out;
  out.mu = belief.mean.head(nx);
  out.m = belief.mean.tail(nt);
  out.p = cov.topLeftCorner(nx, nx);
  out.v = cov.topRightCorner(nx, nt);
  const Eigen::MatrixXd s = cov.bottomRightCorner(nt, nt);
  out.s = 0.5 * (s + s.transpose());
  return out;
}

}  // namespace ski
