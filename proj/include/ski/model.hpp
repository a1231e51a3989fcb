#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ski/matkernels.hpp"

namespace ski {

using Index = Eigen::Index;
using linalg::LowerTriangular;

// Problem dimensions. `augmented()` is the sigma-point dimension d_x + d_theta.
struct Dims {
  Index state = 1;
  Index input = 0;
  Index obs = 1;
  Index params = 1;
  Index unknown = 1;

  Index augmented() const { return state + params; }
  // Throws DimensionMismatch when a dimension is out of range.
  void validate() const;
};

// Named list of candidate basis functions. The evaluator returns a
// (d_f x d_theta) matrix whose column i is phi_i(x, u); the unknown term of the
// dynamics is that matrix times the weight vector.
class BasisLibrary {
 public:
  using Evaluator =
      std::function<Eigen::MatrixXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u)>;

  BasisLibrary() = default;
  BasisLibrary(std::vector<std::string> names, Index unknown_dim, Evaluator evaluator);

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

  const std::vector<std::string>& names() const { return names_; }
  Index size() const { return static_cast<Index>(names_.size()); }
  Index unknown_dim() const { return unknown_dim_; }

 private:
  std::vector<std::string> names_;
  Index unknown_dim_ = 1;
  Evaluator evaluator_;
};

enum class Integrator { Euler, Rk4 };

// Continuous-time right-hand side x_dot = g(x, u, f) where f = Phi(x, u) * theta.
using Dynamics = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                               const Eigen::VectorXd& f)>;
using Observation = std::function<Eigen::VectorXd(const Eigen::VectorXd& x)>;

struct NoiseFactors {
  LowerTriangular q_sqrt;  // augmented dimension, zero parameter block
  LowerTriangular r_sqrt;
};

// The identification problem: dynamics with a linear-in-weights unknown term,
// observation map, noise covariances and the discretization step.
class ParametricModel {
 public:
  struct Spec {
    Dims dims;
    BasisLibrary basis;
    Dynamics dynamics;
    Observation observe;
    double dt = 0.02;
    Eigen::MatrixXd q;  // d_x x d_x
    Eigen::MatrixXd r;  // d_y x d_y
    Integrator integrator = Integrator::Euler;
  };

  // Validates shapes, symmetry and definiteness (R strictly positive definite).
  explicit ParametricModel(Spec spec);

  const Dims& dims() const { return spec_.dims; }
  const BasisLibrary& basis() const { return spec_.basis; }
  double dt() const { return spec_.dt; }
  const Eigen::MatrixXd& q() const { return spec_.q; }
  const Eigen::MatrixXd& r() const { return spec_.r; }
  Integrator integrator() const { return spec_.integrator; }
  const NoiseFactors& noise() const { return noise_; }

  // Unknown term Phi(x, u) * theta.
  Eigen::VectorXd unknown_term(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& theta) const;
  // Continuous-time state derivative with weights theta.
  Eigen::VectorXd derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& theta) const;
  // One discrete step of the state dynamics with weights theta.
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& theta) const;
  Eigen::VectorXd observe(const Eigen::VectorXd& x) const;

 private:
  Spec spec_;
  NoiseFactors noise_;
};

// Mean and square-root covariance over the augmented state [x; theta].
struct GaussianBelief {
  Eigen::VectorXd mean;
  LowerTriangular factor;

  Eigen::MatrixXd covariance() const { return factor.reconstruct(); }
  Index dim() const { return mean.size(); }
};

struct BeliefBlocks {
  Eigen::VectorXd mu;  // state mean
  Eigen::VectorXd m;   // parameter mean
  Eigen::MatrixXd p;   // state covariance
  Eigen::MatrixXd v;   // state/parameter cross covariance
  Eigen::MatrixXd s;   // parameter covariance (symmetrized)
};

// F_bar: next state from the model step, weights copied unchanged.
// Throws NonFinite if the step produces NaN or Inf.
Eigen::VectorXd augmented_transition(const ParametricModel& model, const Eigen::VectorXd& xbar,
                                     const Eigen::VectorXd& u);

// Block-diagonal initial belief with zero state/parameter cross covariance.
GaussianBelief initial_belief(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& p0,
                              const Eigen::VectorXd& m0, const Eigen::VectorXd& s0_diag);

BeliefBlocks belief_blocks(const GaussianBelief& belief, const Dims& dims);

}  // namespace ski
