#include "icac/riccati.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "icac/errors.hpp"
#include "test_systems.hpp"

namespace icac {
namespace {

using test::scalar;

LqgSystem scalar_plant(double f) {
  LqgSystem s;
  s.F = scalar(f);
  s.G = scalar(1);
  s.H = scalar(1);
  s.J = scalar(0);
  s.W = scalar(1);
  s.V = scalar(1);
  s.L = scalar(0);
  s.Q = scalar(1);
  s.R = scalar(1);
  return validate_system(s);
}

// Positive root of x² − f²x − 1 = 0, the scalar fixed point for unit
// weights.
double scalar_root(double f) {
  const double b = f * f;
  return 0.5 * (b + std::sqrt(b * b + 4.0));
}

GTEST_TEST(Kalman, ScalarQuadratic) {
  const KalmanSolution k = solve_kalman(scalar_plant(0.5));
  EXPECT_NEAR(k.Sigma(0, 0), scalar_root(0.5), 1e-10);
  EXPECT_NEAR(k.Sigma(0, 0), 1.132782, 1e-6);
  EXPECT_NEAR(k.Psi(0, 0), k.Sigma(0, 0) + 1.0, 1e-15);
  EXPECT_NEAR(k.Kp(0, 0), 0.5 * k.Sigma(0, 0) / k.Psi(0, 0), 1e-15);
}

GTEST_TEST(Kalman, ZeroDynamicsCollapse) {
  LqgSystem s = test::example_plant(1, 1);
  s.F.setZero();
  const KalmanSolution k = solve_kalman(validate_system(s));
  EXPECT_LT((k.Sigma - s.W).norm(), 1e-15);
  EXPECT_TRUE(k.Kp.isZero());
  EXPECT_NEAR(k.Psi(0, 0), (s.H * s.W * s.H.transpose())(0, 0) + 1.0, 1e-15);
}

GTEST_TEST(Kalman, ExamplePlantIsStabilizing) {
  const LqgSystem s = validate_system(test::example_plant(1, 1));
  const KalmanSolution k = solve_kalman(s);
  EXPECT_LE(kalman_residual(s, k.Sigma), 1e-10);
  EXPECT_LT(spectral_radius(s.F - k.Kp * s.H), 1.0);
  // Oracle: the plain recursion run much longer from a different start.
  const RecursionSpec spec{s.F, s.H, s.W, s.V, s.L};
  const RecursionResult long_run =
      iterate_riccati_recursion(spec, Matrix::Zero(2, 2), 1e-15, 100000);
  EXPECT_LT((long_run.fixed_point - k.Sigma).cwiseAbs().maxCoeff(), 1e-9);
}

GTEST_TEST(Lqr, ScalarQuadratics) {
  EXPECT_NEAR(solve_lqr(scalar_plant(0.5)).E(0, 0), 1.132782, 1e-6);
  const LqrSolution q = solve_lqr(scalar_plant(1.4));
  EXPECT_NEAR(q.E(0, 0), scalar_root(1.4), 1e-9);
  EXPECT_NEAR(q.E(0, 0), 2.380143, 1e-6);
  EXPECT_TRUE(q.closed_loop_stable);
}

GTEST_TEST(Lqr, ZeroStateWeight) {
  const LqrSolution q = solve_lqr(test::awgn());
  EXPECT_TRUE(q.E.isZero());
  EXPECT_TRUE(q.Klqr.isZero());
  EXPECT_EQ(q.PsiLqr, Matrix::Identity(1, 1));
  EXPECT_EQ(q.Jstar, 0.0);
}

GTEST_TEST(Lqr, NotStabilizable) {
  LqgSystem s = scalar_plant(1.4);
  s.G = scalar(0);
  EXPECT_THROW(solve_lqr(s), Error);
}

GTEST_TEST(Lqr, CostFormula) {
  const LqgSystem s = validate_system(test::example_plant(1, 1));
  const KalmanSolution k = solve_kalman(s);
  const LqrSolution q = solve_lqr(s, k);
  const double expected = (k.Kp * k.Psi * k.Kp.transpose() * q.E).trace() +
                          (k.Sigma * s.Q).trace();
  EXPECT_NEAR(q.Jstar, expected, 1e-12);
  EXPECT_LE(lqr_residual(s, q.E), 1e-10 * (1 + q.E.norm()));
  EXPECT_LT(spectral_radius(s.F - s.G * q.Klqr), 1.0);
}

GTEST_TEST(Riccati, JstarInvariantUnderOrthogonalTransform) {
  const LqgSystem s = validate_system(test::example_plant(1, 1));
  const double theta = 0.7;
  Matrix u(2, 2);
  // clang-format off
  u << std::cos(theta), -std::sin(theta),
       std::sin(theta),  std::cos(theta);
  // clang-format on
  LqgSystem t = s;
  t.F = u * s.F * u.transpose();
  t.G = u * s.G;
  t.H = s.H * u.transpose();
  t.W = u * s.W * u.transpose();
  t.L = u * s.L;
  t.Q = u * s.Q * u.transpose();
  EXPECT_NEAR(solve_lqr(validate_system(t)).Jstar, solve_lqr(s).Jstar, 1e-9);
}

GTEST_TEST(Riccati, KalmanLqrDuality) {
  const LqgSystem s = scalar_plant(0.8);
  EXPECT_NEAR(solve_kalman(s).Sigma(0, 0), solve_lqr(s).E(0, 0), 1e-10);
}

GTEST_TEST(Recursion, StartingAtFixedPoint) {
  const LqgSystem s = scalar_plant(0.5);
  const KalmanSolution k = solve_kalman(s);
  const RecursionSpec spec{s.F, s.H, s.W, s.V, s.L};
  const RecursionResult r =
      iterate_riccati_recursion(spec, k.Sigma, 1e-9, 100);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LT(r.trace.front(), 1e-12);
}

GTEST_TEST(Recursion, FromZeroIsMonotone) {
  test::RandomPlants gen(11);
  for (int n = 0; n < 20; ++n) {
    LqgSystem s = validate_system(gen.next());
    const RecursionSpec spec{s.F, s.H, s.W, s.V, s.L};
    Matrix prev = Matrix::Zero(s.F.rows(), s.F.rows());
    for (int i = 0; i < 30; ++i) {
      const Matrix next = spec.step(prev);
      EXPECT_GE(min_eigenvalue(next - prev), -1e-10 * (1 + next.norm()));
      prev = next;
    }
  }
  const LqgSystem s = scalar_plant(0.5);
  const RecursionSpec spec{s.F, s.H, s.W, s.V, s.L};
  EXPECT_NEAR(
      iterate_riccati_recursion(spec, scalar(0), 1e-13, 1000).fixed_point(0, 0),
      1.132782, 1e-6);
}

GTEST_TEST(Recursion, DivergenceIsReported) {
  // Unobservable unstable mode: the error covariance grows without bound.
  const RecursionSpec spec{scalar(1.5), scalar(0), scalar(1), scalar(1),
                           scalar(0)};
  const RecursionResult r = iterate_riccati_recursion(spec, scalar(0), 1e-9, 50);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 50);
}

GTEST_TEST(Recursion, SingularInnovation) {
  const RecursionSpec spec{scalar(0.5), scalar(1), scalar(1), scalar(0),
                           scalar(0)};
  try {
    spec.step(scalar(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularInnovation);
  }
}

}  // namespace
}  // namespace icac
