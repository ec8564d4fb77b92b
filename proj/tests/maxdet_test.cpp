#include "icac/maxdet.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "icac/capacity.hpp"
#include "icac/errors.hpp"
#include "icac/riccati.hpp"
#include "test_systems.hpp"

namespace icac::maxdet {
namespace {

// maximize Σ log(1 + πᵢ) with Σπᵢ ≤ p and πᵢ ≥ 0 as 1×1 LMIs.
MaxdetProblem parallel_problem(int n, double p, double lmi_scale = 1.0) {
  ProblemBuilder b;
  std::vector<VariableId> pis;
  for (int i = 0; i < n; ++i) {
    pis.push_back(b.add_symmetric("pi" + std::to_string(i), 1));
  }
  b.maximize_log_det("rate", [=](const Values& v) {
    Matrix d = Matrix::Identity(n, n);
    for (int i = 0; i < n; ++i) d(i, i) += v[pis[i]](0, 0);
    return d;
  });
  for (int i = 0; i < n; ++i) {
    b.add_lmi("pos" + std::to_string(i),
              [=](const Values& v) { return Matrix(lmi_scale * v[pis[i]]); });
  }
  b.add_trace_le("power", [=](const Values& v) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += v[pis[i]](0, 0);
    return s;
  }, p);
  return b.build();
}

GTEST_TEST(Maxdet, IdentityOptimum) {
  ProblemBuilder b;
  const VariableId x = b.add_symmetric("X", 3);
  b.maximize_log_det("X", [=](const Values& v) { return v[x]; });
  b.add_lmi("X <= I", [=](const Values& v) {
    return Matrix(Matrix::Identity(3, 3) - v[x]);
  });
  b.add_lmi("X >= 0", [=](const Values& v) { return v[x]; });
  const MaxdetProblem prob = b.build();
  const Solution s = solve(prob);
  ASSERT_EQ(s.status, Status::kOptimal) << s.note;
  EXPECT_NEAR(s.objective_value, 0.0, 1e-7);
  EXPECT_LT((prob.value(s.assignment, x) - Matrix::Identity(3, 3)).norm(),
            1e-6);
}

GTEST_TEST(Maxdet, SymmetricWaterFilling) {
  const MaxdetProblem prob = parallel_problem(2, 2.0);
  const Solution s = solve(prob);
  ASSERT_EQ(s.status, Status::kOptimal);
  EXPECT_NEAR(s.objective_value, 2.0 * std::log(2.0), 1e-8);
  EXPECT_NEAR(s.assignment(0), 1.0, 1e-6);
  EXPECT_NEAR(s.assignment(1), 1.0, 1e-6);
}

GTEST_TEST(Maxdet, BudgetSaturates) {
  const MaxdetProblem prob = parallel_problem(1, 3.0);
  const Solution s = solve(prob);
  ASSERT_EQ(s.status, Status::kOptimal);
  EXPECT_NEAR(s.objective_value, std::log(4.0), 1e-8);
  EXPECT_LE(s.kkt_residual, kTolKkt);
  const FeasReport rep = check_feasible(prob, s.assignment);
  EXPECT_GE(rep.worst_lmi_eig, -kTolFeas);
  EXPECT_GE(rep.worst_trace_slack, -kTolFeas);
}

GTEST_TEST(Maxdet, ObjectiveMatchesDirectEvaluation) {
  const MaxdetProblem prob = parallel_problem(3, 1.7);
  const Solution s = solve(prob);
  const double direct = *log_det_pd(prob.objective.evaluate(s.assignment));
  EXPECT_NEAR(s.objective_value, direct, 1e-12 * std::abs(direct));
}

GTEST_TEST(Maxdet, LmiScalingDoesNotMoveOptimum) {
  const Solution a = solve(parallel_problem(2, 1.3));
  const Solution b = solve(parallel_problem(2, 1.3, 7.5));
  EXPECT_LT((a.assignment - b.assignment).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(a.objective_value, b.objective_value, kTolGap);
}

GTEST_TEST(Maxdet, TighterGapMovesObjectiveLittle) {
  const MaxdetProblem prob = parallel_problem(2, 0.9);
  Options loose;
  loose.tol_gap = 1e-6;
  Options tight;
  tight.tol_gap = 1e-7;
  const double a = solve(prob, loose).objective_value;
  const double b = solve(prob, tight).objective_value;
  EXPECT_LE(std::abs(a - b), loose.tol_gap);
}

GTEST_TEST(Maxdet, AppendedNegativeLmiIsInfeasible) {
  ProblemBuilder b;
  const VariableId x = b.add_symmetric("pi", 1);
  b.maximize_log_det("rate", [=](const Values& v) {
    return Matrix(Matrix::Identity(1, 1) + v[x]);
  });
  b.add_lmi("pos", [=](const Values& v) { return v[x]; });
  b.add_lmi("never", [](const Values&) { return Matrix(-Matrix::Identity(1, 1)); });
  EXPECT_EQ(solve(b.build()).status, Status::kInfeasible);
}

GTEST_TEST(Maxdet, SingularObjectiveIsNumericalFailure) {
  ProblemBuilder b;
  const VariableId x = b.add_symmetric("x", 1);
  b.maximize_log_det("degenerate", [=](const Values& v) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1.0 + v[x](0, 0);
    return m;
  });
  b.add_lmi("box", [=](const Values& v) {
    return Matrix(Matrix::Identity(1, 1) - v[x]);
  });
  b.add_lmi("pos", [=](const Values& v) { return v[x]; });
  EXPECT_EQ(solve(b.build()).status, Status::kNumericalFailure);
}

GTEST_TEST(Maxdet, BuilderRejectsAsymmetricAndNonAffineMaps) {
  {
    ProblemBuilder b;
    const VariableId x = b.add_matrix("x", 2, 2);
    b.maximize_log_det("I", [](const Values&) {
      return Matrix(Matrix::Identity(2, 2));
    });
    b.add_lmi("asym", [=](const Values& v) { return v[x]; });
    EXPECT_THROW(b.build(), std::invalid_argument);
  }
  {
    ProblemBuilder b;
    const VariableId x = b.add_symmetric("x", 1);
    b.maximize_log_det("sq", [=](const Values& v) {
      return Matrix(v[x] * v[x] + Matrix::Identity(1, 1));
    });
    EXPECT_THROW(b.build(), std::invalid_argument);
  }
}

GTEST_TEST(Maxdet, ZeroFeasibilityAndWarmStart) {
  const MaxdetProblem prob = parallel_problem(2, 2.0);
  EXPECT_TRUE(prob.zero_feasible);
  const Solution cold = solve(prob);
  Options warm;
  warm.warm_start = cold.assignment;
  const Solution again = solve(prob, warm);
  ASSERT_EQ(again.status, Status::kOptimal);
  EXPECT_NEAR(again.objective_value, cold.objective_value, kTolGap);
}

GTEST_TEST(Maxdet, CheckFeasibleOnCapacityProblem) {
  const LqgSystem sys = test::awgn();
  const KalmanSolution k = solve_kalman(sys);
  const LqrSolution q = solve_lqr(sys, k);
  const CapacityProblem cp = build_capacity_problem(sys, k, q, 1.0);
  const Vector zero = Vector::Zero(cp.problem.num_scalars);
  const FeasReport z = check_feasible(cp.problem, zero);
  EXPECT_GE(z.worst_lmi_eig, 0.0);
  EXPECT_GE(z.worst_trace_slack, 0.0);

  const Matrix gamma = Matrix::Zero(1, 1), sigma = Matrix::Zero(1, 1);
  const FeasReport neg = check_feasible(
      cp.problem, cp.encode(gamma, -Matrix::Identity(1, 1), sigma));
  EXPECT_NEAR(neg.worst_lmi_eig, -1.0, 1e-12);

  const Solution s = solve(cp.problem);
  ASSERT_EQ(s.status, Status::kOptimal);
  EXPECT_NEAR(check_feasible(cp.problem, s.assignment).worst_trace_slack, 0.0,
              1e-7);
  EXPECT_THROW(check_feasible(cp.problem, Vector::Zero(99)), Error);
}

}  // namespace
}  // namespace icac::maxdet
