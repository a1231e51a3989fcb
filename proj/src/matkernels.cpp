#include "ski/matkernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/QR>

#include "ski/errors.hpp"

namespace ski::linalg {

LowerTriangular::LowerTriangular(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) {
    throw DimensionMismatch("LowerTriangular: matrix is not square");
  }
  for (Index j = 1; j < m_.cols(); ++j) {
    for (Index i = 0; i < j; ++i) {
      if (m_(i, j) != 0.0) {
        throw std::invalid_argument("LowerTriangular: nonzero strictly-upper entry");
      }
    }
  }
}

LowerTriangular LowerTriangular::identity(Index n) {
  LowerTriangular l;
  l.m_ = Eigen::MatrixXd::Identity(n, n);
  return l;
}

LowerTriangular LowerTriangular::zero(Index n) {
  LowerTriangular l;
  l.m_ = Eigen::MatrixXd::Zero(n, n);
  return l;
}

LowerTriangular LowerTriangular::from_lower_part(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("LowerTriangular: matrix is not square");
  }
  LowerTriangular l;
  l.m_ = m.triangularView<Eigen::Lower>();
  return l;
}

Eigen::MatrixXd LowerTriangular::reconstruct() const { return m_ * m_.transpose(); }

bool LowerTriangular::has_positive_diagonal() const {
  return (m_.diagonal().array() > 0.0).all();
}

bool is_symmetric(const Eigen::MatrixXd& a, double tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

LowerTriangular cholesky_factor(const Eigen::MatrixXd& a, const KernelTolerances& tol) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw DimensionMismatch("cholesky_factor: expected a non-empty square matrix");
  }
  if (!a.allFinite()) {
    throw NonFinite("cholesky_factor: non-finite entry");
  }
  if (!is_symmetric(a, tol.symmetry)) {
    throw NotPositiveDefinite("cholesky_factor: matrix is not symmetric");
  }
  const Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > tol.eigen_floor)) {
      throw NotPositiveDefinite("cholesky_factor: pivot " + std::to_string(j) + " = " +
                                std::to_string(pivot));
    }
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / d;
    }
  }
  return LowerTriangular(std::move(l));
}

void chol_rank_one_inplace(Eigen::Ref<Eigen::MatrixXd> l, Eigen::VectorXd x, double w) {
  const Index n = l.rows();
  if (l.cols() != n || x.size() != n) {
    throw DimensionMismatch("chol_rank_one: dimension mismatch");
  }
  if (!std::isfinite(w)) {
    throw NonFinite("chol_rank_one: non-finite weight");
  }
  if (w == 0.0) return;
  x *= std::sqrt(std::abs(w));
  const bool downdate = w < 0.0;
  for (Index k = 0; k < n; ++k) {
    if (x(k) == 0.0) continue;
    const double lkk = l(k, k);
    const double r2 = downdate ? (lkk - x(k)) * (lkk + x(k)) : lkk * lkk + x(k) * x(k);
    if (!(r2 > 0.0) || !std::isfinite(r2)) {
      throw DowndateBreaksSPD("chol_rank_one: non-positive pivot at column " + std::to_string(k));
    }
    const double r = std::sqrt(r2);
    const double c = r / lkk;
    const double s = x(k) / lkk;
    l(k, k) = r;
    const Index tail = n - k - 1;
    if (tail > 0) {
      auto col = l.col(k).tail(tail);
      auto xt = x.tail(tail);
      if (downdate) {
        col = (col - s * xt) / c;
      } else {
        col = (col + s * xt) / c;
      }
      xt = c * xt - s * col;
    }
  }
}

LowerTriangular chol_rank_one(const LowerTriangular& u, const Eigen::VectorXd& x, double w) {
  Eigen::MatrixXd l = u.matrix();
  chol_rank_one_inplace(l, x, w);
  return LowerTriangular(std::move(l));
}

LowerTriangular qr_r_factor(const Eigen::MatrixXd& a, const KernelTolerances& tol) {
  const Index rows = a.rows();
  const Index cols = a.cols();
  if (cols < 1 || rows < cols) {
    throw DimensionMismatch("qr_r_factor: need rows >= cols >= 1");
  }
  if (!a.allFinite()) {
    throw NonFinite("qr_r_factor: non-finite entry");
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  const double threshold = tol.rank * a.norm();
  for (Index i = 0; i < cols; ++i) {
    if (r(i, i) < 0.0) r.row(i) *= -1.0;
    if (r(i, i) < threshold || r(i, i) == 0.0) {
      throw RankDeficient("qr_r_factor: diagonal " + std::to_string(i) + " below rank threshold");
    }
  }
  return LowerTriangular(r.transpose());
}

Eigen::MatrixXd solve_with_factor(const LowerTriangular& u, const Eigen::MatrixXd& b) {
  if (b.rows() != u.dim()) {
    throw DimensionMismatch("solve_with_factor: right-hand side has wrong row count");
  }
  const auto lower = u.matrix().triangularView<Eigen::Lower>();
  Eigen::MatrixXd y = lower.solve(b);
  return lower.transpose().solve(y);
}

LowerTriangular psd_factor(const Eigen::MatrixXd& a, const KernelTolerances& tol) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("psd_factor: matrix is not square");
  }
  if (!is_symmetric(a, tol.symmetry)) {
    throw NotPositiveDefinite("psd_factor: matrix is not symmetric");
  }
  const Index n = a.rows();
  const double scale = std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    const double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (pivot < -tol.symmetry * scale) {
      throw NotPositiveDefinite("psd_factor: negative pivot " + std::to_string(j));
    }
    if (pivot <= tol.eigen_floor) {
      for (Index i = j + 1; i < n; ++i) {
        const double resid = a(i, j) - l.row(i).head(j).dot(l.row(j).head(j));
        if (std::abs(resid) > tol.symmetry * scale) {
          throw NotPositiveDefinite("psd_factor: zero pivot with nonzero coupling");
        }
      }
      continue;
    }
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / d;
    }
  }
  return LowerTriangular(std::move(l));
}

}  // namespace ski::linalg
