#pragma once

#include <Eigen/Core>

namespace ski::linalg {

using Index = Eigen::Index;

// Library-wide numerical thresholds. Every kernel takes one of these as its
// last argument; the defaults are the documented constants.
struct KernelTolerances {
  double symmetry = 1e-10;     // max |A - A^T| relative to max(1, max|A|)
  double eigen_floor = 1e-12;  // Cholesky pivots at or below this are rejected
  double rank = 1e-12;         // |R_ii| below rank * ||A||_F means rank deficient
};

// Lower-triangular square matrix. Strictly-upper entries are exactly zero.
class LowerTriangular {
 public:
  LowerTriangular() = default;
  // Throws DimensionMismatch for non-square input and std::invalid_argument if
  // any strictly-upper entry is nonzero.
  explicit LowerTriangular(Eigen::MatrixXd m);

  static LowerTriangular identity(Index n);
  static LowerTriangular zero(Index n);
  // Copies the lower triangle of m and discards the rest.
  static LowerTriangular from_lower_part(const Eigen::MatrixXd& m);

  Index dim() const { return m_.rows(); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

  // L * L^T
  Eigen::MatrixXd reconstruct() const;
  bool has_positive_diagonal() const;

 private:
  Eigen::MatrixXd m_;
};

// L with L * L^T = A. A must be symmetric (within tol.symmetry) and positive
// definite; throws NotPositiveDefinite when a pivot falls to tol.eigen_floor.
LowerTriangular cholesky_factor(const Eigen::MatrixXd& a, const KernelTolerances& tol = {});

// Factor of U*U^T + w*x*x^T. Downdates (w < 0) use hyperbolic rotations and
// throw DowndateBreaksSPD on the first non-positive pivot.
LowerTriangular chol_rank_one(const LowerTriangular& u, const Eigen::VectorXd& x, double w);

// In-place variant used on hot paths. `l` must be lower triangular with a
// positive diagonal; on failure `l` is left partially modified.
void chol_rank_one_inplace(Eigen::Ref<Eigen::MatrixXd> l, Eigen::VectorXd x, double w);

// R^T from a thin QR of A (rows >= cols), diagonal forced non-negative.
// L * L^T = A^T * A.
LowerTriangular qr_r_factor(const Eigen::MatrixXd& a, const KernelTolerances& tol = {});

// X with (U * U^T) X = B, by one forward and one backward substitution.
Eigen::MatrixXd solve_with_factor(const LowerTriangular& u, const Eigen::MatrixXd& b);

// Symmetric square root of a positive semi-definite matrix as a lower
// triangular factor. Zero pivots produce zero columns instead of throwing, so
// singular noise covariances (e.g. the parameter block of the augmented Q) are
// allowed. Throws NotPositiveDefinite for clearly indefinite input.
LowerTriangular psd_factor(const Eigen::MatrixXd& a, const KernelTolerances& tol = {});

bool is_symmetric(const Eigen::MatrixXd& a, double tol);

}  // namespace ski::linalg
