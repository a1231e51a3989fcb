#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "oracles.hpp"
#include "ski/errors.hpp"
#include "ski/matkernels.hpp"

using namespace ski;
using namespace ski::linalg;
using ski::oracle::random_lower_factor;
using ski::oracle::random_matrix;
using ski::oracle::random_spd;
using ski::oracle::random_vector;
using ski::oracle::rel_frobenius;

TEST(CholeskyFactor, IdentityIsFixedPoint) {
  const auto l = cholesky_factor(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_EQ(l.matrix(), Eigen::MatrixXd::Identity(3, 3));
}

TEST(CholeskyFactor, TwoByTwoByHand) {
  Eigen::MatrixXd a(2, 2);
  a << 4, 2, 2, 3;
  const auto l = cholesky_factor(a);
  EXPECT_NEAR(l(0, 0), 2.0, 1e-15);
  EXPECT_EQ(l(0, 1), 0.0);
  EXPECT_NEAR(l(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(l(1, 1), std::sqrt(2.0), 1e-15);
  // Product written out entry by entry.
  EXPECT_NEAR(l(0, 0) * l(0, 0), 4.0, 1e-14);
  EXPECT_NEAR(l(1, 0) * l(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(l(1, 0) * l(1, 0) + l(1, 1) * l(1, 1), 3.0, 1e-14);
}

TEST(CholeskyFactor, IndefiniteThrows) {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 2, 1;
  EXPECT_THROW(cholesky_factor(a), NotPositiveDefinite);
}

TEST(CholeskyFactor, AsymmetricInputRejected) {
  Eigen::MatrixXd a(2, 2);
  a << 2, 0.5, 0.4, 2;
  EXPECT_THROW(cholesky_factor(a), Error);
}

TEST(CholeskyFactor, RandomReconstruction) {
  std::mt19937_64 rng(11);
  for (int n = 1; n <= 20; ++n) {
    const Eigen::MatrixXd a = random_spd(rng, n);
    const auto l = cholesky_factor(a);
    EXPECT_TRUE(l.has_positive_diagonal());
    EXPECT_LT(rel_frobenius(l.matrix() * l.matrix().transpose(), a), 1e-12) << "n=" << n;
  }
}

TEST(LowerTriangularType, RejectsUpperEntries) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
  m(0, 2) = 1e-300;
  EXPECT_THROW(LowerTriangular{m}, std::invalid_argument);
}

TEST(CholRankOne, ZeroVectorIsNoOp) {
  const auto u = chol_rank_one(LowerTriangular::identity(2), Eigen::VectorXd::Zero(2), 1.0);
  EXPECT_EQ(u.matrix(), Eigen::MatrixXd::Identity(2, 2));
}

TEST(CholRankOne, UpdateThenDowndateRestores) {
  std::mt19937_64 rng(3);
  const LowerTriangular u{random_lower_factor(rng, 5)};
  const Eigen::VectorXd x = random_vector(rng, 5);
  const auto up = chol_rank_one(u, x, 0.8);
  const auto back = chol_rank_one(up, x, -0.8);
  EXPECT_LT((back.matrix() - u.matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(CholRankOne, DenseOracleFourByFour) {
  std::mt19937_64 rng(4);
  const LowerTriangular u{random_lower_factor(rng, 4)};
  const Eigen::VectorXd x = random_vector(rng, 4);
  const auto v = chol_rank_one(u, x, 0.7);
  const Eigen::MatrixXd residual = v.matrix() * v.matrix().transpose() -
                                   u.matrix() * u.matrix().transpose() - 0.7 * x * x.transpose();
  EXPECT_LT(residual.norm(), 1e-10 * (u.matrix() * u.matrix().transpose()).norm());
}

TEST(CholRankOne, DowndateBreakingSpdThrows) {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 2.0);
  EXPECT_THROW(chol_rank_one(LowerTriangular::identity(3), x, -1.0), DowndateBreaksSPD);
}

TEST(CholRankOne, AccumulatedUpdatesMatchDenseSum) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  for (int n : {1, 2, 7, 20}) {
    Eigen::MatrixXd l = random_lower_factor(rng, n);
    Eigen::MatrixXd dense = l * l.transpose();
    for (int k = 0; k < 50; ++k) {
      const Eigen::VectorXd x = random_vector(rng, n);
      // Every third step is a downdate bounded by half the smallest eigenvalue,
      // so the matrix stays SPD.
      double w = weight(rng);
      if (k % 3 == 2) {
        const double lambda_min = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense)
                                      .eigenvalues()
                                      .minCoeff();
        w = -0.5 * lambda_min / x.squaredNorm();
      }
      chol_rank_one_inplace(l, x, w);
      dense += w * x * x.transpose();
    }
    EXPECT_LT(rel_frobenius(l * l.transpose(), dense), 1e-9) << "n=" << n;
  }
}

TEST(QrRFactor, IdentityInput) {
  const auto l = qr_r_factor(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_LT((l.matrix() - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-15);
}

TEST(QrRFactor, ColumnNormByPythagoras) {
  Eigen::MatrixXd a(2, 1);
  a << 3, 4;
  EXPECT_NEAR(qr_r_factor(a)(0, 0), 5.0, 1e-14);
}

TEST(QrRFactor, GramOracle) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd a = random_matrix(rng, 10, 4);
  const auto l = qr_r_factor(a);
  EXPECT_LT(rel_frobenius(l.matrix() * l.matrix().transpose(), a.transpose() * a), 1e-10);
  for (Index i = 0; i < 4; ++i) EXPECT_GE(l(i, i), 0.0);
}

TEST(QrRFactor, DependsOnlyOnGram) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd a = random_matrix(rng, 9, 5);
  // Any orthogonal Q leaves A^T A unchanged.
  const Eigen::MatrixXd q = random_matrix(rng, 9, 9).householderQr().householderQ();
  const auto l1 = qr_r_factor(a);
  const auto l2 = qr_r_factor(q * a);
  EXPECT_LT((l1.matrix() - l2.matrix()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(QrRFactor, RankDeficientThrows) {
  Eigen::MatrixXd a(4, 2);
  a << 1, 2, 2, 4, 3, 6, 4, 8;
  EXPECT_THROW(qr_r_factor(a), RankDeficient);
}

TEST(SolveWithFactor, IdentityReturnsRhs) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd b = random_matrix(rng, 3, 2);
  EXPECT_LT((solve_with_factor(LowerTriangular::identity(3), b) - b).norm(), 1e-15);
}

TEST(SolveWithFactor, DiagonalByHand) {
  Eigen::MatrixXd u(2, 2);
  u << 2, 0, 0, 3;
  Eigen::MatrixXd b(2, 1);
  b << 4, 9;
  const Eigen::MatrixXd x = solve_with_factor(LowerTriangular{u}, b);
  EXPECT_NEAR(x(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(x(1, 0), 1.0, 1e-15);
}

TEST(SolveWithFactor, ResidualOracle) {
  std::mt19937_64 rng(9);
  for (int n = 1; n <= 20; ++n) {
    const Eigen::MatrixXd l = random_lower_factor(rng, n);
    const Eigen::MatrixXd b = random_matrix(rng, n, 3);
    const Eigen::MatrixXd x = solve_with_factor(LowerTriangular{l}, b);
    EXPECT_LT((l * l.transpose() * x - b).norm() / b.norm(), 1e-9) << "n=" << n;
  }
}

TEST(PsdFactor, AllowsZeroBlock) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  a(0, 0) = 4.0;
  const auto l = psd_factor(a);
  EXPECT_LT((l.reconstruct() - a).norm(), 1e-14);
}
