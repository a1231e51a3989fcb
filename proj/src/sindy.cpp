#include "ski/sindy.hpp"

#include <cmath>

#include "ski/errors.hpp"

namespace ski::sindy {

Eigen::MatrixXd numeric_derivative(const Eigen::MatrixXd& samples, double dt) {
  const Index n = samples.rows();
  if (n < 3) throw TooFewSamples("numeric_derivative: need at least 3 samples");
  if (!(dt > 0.0)) throw std::invalid_argument("numeric_derivative: dt must be positive");
  Eigen::MatrixXd out(n, samples.cols());
  out.row(0) = (-3.0 * samples.row(0) + 4.0 * samples.row(1) - samples.row(2)) / (2.0 * dt);
  for (Index k = 1; k + 1 < n; ++k) {
    out.row(k) = (samples.row(k + 1) - samples.row(k - 1)) / (2.0 * dt);
  }
  out.row(n - 1) =
      (3.0 * samples.row(n - 1) - 4.0 * samples.row(n - 2) + samples.row(n - 3)) / (2.0 * dt);
  return out;
}

double lasso_objective(const Eigen::MatrixXd& psi, const Eigen::VectorXd& target,
                       const Eigen::VectorXd& coef, double lambda) {
  return 0.5 * (target - psi * coef).squaredNorm() + lambda * coef.lpNorm<1>();
}

namespace {
double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}
}  // namespace

RegressResult sparse_regress(const Eigen::MatrixXd& psi, const Eigen::VectorXd& target,
                             double lambda, const RegressOptions& options) {
  const Index n = psi.rows();
  const Index p = psi.cols();
  if (target.size() != n) throw DimensionMismatch("sparse_regress: row count mismatch");
  if (!(lambda >= 0.0)) throw std::invalid_argument("sparse_regress: lambda must be >= 0");

  RegressResult out;
  out.coef = Eigen::VectorXd::Zero(p);
  const Eigen::VectorXd col_sq = psi.colwise().squaredNorm();
  Eigen::VectorXd resid = target;
  if (options.track_objective) {
    out.objective.push_back(lasso_objective(psi, target, out.coef, lambda));
  }
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (col_sq(j) == 0.0) continue;
      const double old = out.coef(j);
      const double rho = psi.col(j).dot(resid) + col_sq(j) * old;
      const double updated = soft_threshold(rho, lambda) / col_sq(j);
      if (updated != old) {
        resid -= (updated - old) * psi.col(j);
        out.coef(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    out.sweeps = sweep + 1;
    if (options.track_objective) {
      out.objective.push_back(lasso_objective(psi, target, out.coef, lambda));
    }
    if (max_change < options.tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

Identification sindy_identify(const Problem& problem, const RegressOptions& options) {
  const Index n = problem.psi.rows();
  const Index p = problem.psi.cols();
  const Index cols = problem.xdot.cols();
  if (problem.xdot.rows() != n) throw DimensionMismatch("sindy_identify: row count mismatch");
  if (problem.lambda.size() != cols) {
    throw DimensionMismatch("sindy_identify: need one lambda per target column");
  }
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
  Eigen::MatrixXd psi = problem.psi;
  if (problem.standardize) {
    for (Index j = 0; j < p; ++j) {
      const double rms = std::sqrt(psi.col(j).squaredNorm() / static_cast<double>(n));
      if (rms > 0.0) {
        scale(j) = rms;
        psi.col(j) /= rms;
      }
    }
  }
  Identification out;
  out.underdetermined = n < p;
  out.xi.resize(p, cols);
  for (Index c = 0; c < cols; ++c) {
    RegressResult r = sparse_regress(psi, problem.xdot.col(c), problem.lambda(c), options);
    out.xi.col(c) = r.coef.cwiseQuotient(scale);
    out.converged.push_back(r.converged);
  }
  return out;
}

}  // namespace ski::sindy
