#include "icac/linalg.hpp"

#include <cmath>

#include <gtest/gtest.h>

namespace icac {
namespace {

GTEST_TEST(Linalg, PseudoinverseTruncatesSmallEigenvalues) {
  Matrix m = Matrix::Zero(3, 3);
  m.diagonal() << 4.0, 1e-12, 0.0;
  const Matrix pinv = pinv_psd(m, 1e-9);
  EXPECT_NEAR(pinv(0, 0), 0.25, 1e-15);
  EXPECT_EQ(pinv(1, 1), 0.0);
  const Matrix proj = range_projector_psd(m, 1e-9);
  EXPECT_NEAR(proj(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(proj.trace(), 1.0, 1e-15);
}

GTEST_TEST(Linalg, PsdSqrtAndProjection) {
  Matrix m(2, 2);
  // clang-format off
  m << 2, 1,
       1, 2;
  // clang-format on
  const Matrix root = psd_sqrt(m);
  EXPECT_LT((root * root - m).cwiseAbs().maxCoeff(), 1e-14);
  Matrix indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  EXPECT_NEAR(min_eigenvalue(project_psd(indefinite)), 0.0, 1e-15);
}

GTEST_TEST(Linalg, LogDetAndSolve) {
  Matrix a(2, 2);
  a << 2, 0, 0, 3;
  EXPECT_NEAR(*log_det_pd(a), std::log(6.0), 1e-15);
  EXPECT_FALSE(log_det_pd(-a).has_value());
  const Matrix b = Matrix::Ones(1, 2);
  const Matrix x = *right_solve_pd(b, a);
  EXPECT_NEAR(x(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(x(0, 1), 1.0 / 3.0, 1e-15);
}

GTEST_TEST(Linalg, ControllableBasis) {
  Matrix a = Matrix::Zero(3, 3);
  a.diagonal() << 0.5, 0.2, 0.9;
  Matrix b = Matrix::Zero(3, 1);
  b(0) = 1.0;
  b(1) = 1.0;
  const Matrix t = controllable_basis(a, b);
  ASSERT_EQ(t.cols(), 2);
  // The third coordinate is unreachable.
  EXPECT_LT(t.row(2).norm(), 1e-12);
  EXPECT_LT((t.transpose() * t - Matrix::Identity(2, 2)).norm(), 1e-12);
}

GTEST_TEST(Linalg, UnstableSubspace) {
  Matrix a(3, 3);
  // clang-format off
  a << 1.5, 1.0, 0.0,
       0.0, 0.3, 0.0,
       0.0, 0.0, -2.0;
  // clang-format on
  const Matrix t = unstable_subspace_basis(a, 1e-9);
  ASSERT_EQ(t.cols(), 2);
  // Invariance: A·T stays in range(T).
  const Matrix at = a * t;
  EXPECT_LT((at - t * (t.transpose() * at)).norm(), 1e-10);
  EXPECT_EQ(unstable_subspace_basis(0.5 * Matrix::Identity(2, 2), 1e-9).cols(),
            0);
}

GTEST_TEST(Linalg, OrthogonalComplement) {
  Matrix m(3, 1);
  m << 1, 1, 0;
  const Matrix c = orthogonal_complement(m);
  ASSERT_EQ(c.cols(), 2);
  EXPECT_LT((m.transpose() * c).norm(), 1e-14);
}

GTEST_TEST(Linalg, Lyapunov) {
  Matrix a(2, 2);
  a << 0.5, 0.1, 0.0, -0.3;
  const Matrix q = Matrix::Identity(2, 2);
  const Matrix x = solve_discrete_lyapunov(a, q);
  EXPECT_LT((a * x * a.transpose() + q - x).cwiseAbs().maxCoeff(), 1e-13);
}

GTEST_TEST(Linalg, NormsOfEmptyMatrices) {
  EXPECT_EQ(inf_norm(Matrix()), 0.0);
  EXPECT_TRUE(std::isinf(min_eigenvalue(Matrix())));
}

}  // namespace
}  // namespace icac
