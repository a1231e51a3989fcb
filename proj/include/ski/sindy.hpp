#pragma once

#include <vector>

#include <Eigen/Core>

namespace ski::sindy {

using Index = Eigen::Index;

// Central differences on interior rows, second-order one-sided differences on
// the first and last rows. Throws TooFewSamples for fewer than 3 rows.
Eigen::MatrixXd numeric_derivative(const Eigen::MatrixXd& samples, double dt);

struct RegressOptions {
  double tolerance = 1e-8;  // max coefficient change per sweep
  int max_sweeps = 10000;
  bool track_objective = false;
};

struct RegressResult {
  Eigen::VectorXd coef;
  bool converged = false;
  int sweeps = 0;
  std::vector<double> objective;  // per sweep, when tracked
};

// Cyclic coordinate descent with soft-thresholding for
//   0.5 * ||target - psi * coef||^2 + lambda * ||coef||_1.
// Returns the last iterate with converged = false after max_sweeps.
RegressResult sparse_regress(const Eigen::MatrixXd& psi, const Eigen::VectorXd& target,
                             double lambda, const RegressOptions& options = {});

double lasso_objective(const Eigen::MatrixXd& psi, const Eigen::VectorXd& target,
                       const Eigen::VectorXd& coef, double lambda);

struct Problem {
  Eigen::MatrixXd xdot;    // N x d_x targets
  Eigen::MatrixXd psi;     // N x d_psi library
  Eigen::VectorXd lambda;  // one weight per target column
  bool standardize = true; // scale each library column to unit RMS before fitting
};

struct Identification {
  Eigen::MatrixXd xi;  // d_psi x d_x
  std::vector<bool> converged;
  bool underdetermined = false;  // fewer samples than library columns
};

// One sparse regression per column of xdot.
Identification sindy_identify(const Problem& problem, const RegressOptions& options = {});

}  // namespace ski::sindy
