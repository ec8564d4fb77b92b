#include "icac/model.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "icac/errors.hpp"
#include "icac/system_io.hpp"
#include "test_systems.hpp"

namespace icac {
namespace {

using test::scalar;

ErrorCode code_of(const LqgSystem& sys) {
  try {
    validate_system(sys);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected validate_system to throw";
  return ErrorCode::kConfig;
}

GTEST_TEST(Validate, SymmetrizesWithinTolerance) {
  LqgSystem s = test::example_plant(1.0, 1.0);
  s.W(0, 1) = 1e-14;
  const LqgSystem v = validate_system(s);
  EXPECT_DOUBLE_EQ(v.W(0, 1), 5e-15);
  EXPECT_DOUBLE_EQ(v.W(1, 0), 5e-15);
}

GTEST_TEST(Validate, RejectsBadCovariances) {
  LqgSystem s = test::example_plant(1.0, 1.0);
  s.V = scalar(0);
  EXPECT_EQ(code_of(s), ErrorCode::kNotPd);

  s = test::example_plant(1.0, 1.0);
  s.W(0, 0) = -1.0;
  EXPECT_EQ(code_of(s), ErrorCode::kNotPsd);

  s = test::example_plant(1.0, 1.0);
  s.L = Matrix::Constant(2, 1, 5.0);
  EXPECT_EQ(code_of(s), ErrorCode::kNotPsd);
}

GTEST_TEST(Validate, RejectsInconsistentDimensions) {
  LqgSystem s = test::example_plant(1.0, 1.0);
  s.R = Matrix::Identity(2, 2);
  EXPECT_EQ(code_of(s), ErrorCode::kDimensionMismatch);
}

GTEST_TEST(Validate, DefaultsAndIdempotence) {
  LqgSystem s = test::example_plant(1.0, 0.5);
  s.L.resize(0, 0);
  const LqgSystem v = validate_system(s);
  EXPECT_TRUE(v.L.isZero());
  EXPECT_TRUE(v.Sigma1.isZero());
  EXPECT_EQ(v.Sigma1.rows(), 2);
  const LqgSystem vv = validate_system(v);
  EXPECT_EQ(vv.W, v.W);
  EXPECT_EQ(vv.Q, v.Q);
}

GTEST_TEST(Assumptions, ExamplePlantDetectable) {
  const AssumptionReport rep = check_assumptions(test::example_plant(1, 1));
  EXPECT_TRUE(rep.detectable_FH.holds);
  EXPECT_TRUE(rep.stabilizable_FG.holds);
  EXPECT_TRUE(rep.unit_circle_controllable.holds);
}

GTEST_TEST(Assumptions, UnobservedUnstableModeCarriesWitness) {
  const PbhResult r = pbh_detectable(scalar(1.4), scalar(0));
  ASSERT_FALSE(r.holds);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_NEAR(std::abs(r.witness->eigenvalue), 1.4, 1e-12);
  EXPECT_GE(std::abs(r.witness->eigenvalue), 1.0);
  EXPECT_TRUE(pbh_detectable(scalar(0.5), scalar(0)).holds);
}

GTEST_TEST(Assumptions, ComplexModes) {
  // Rotation by 60° scaled to radius 1.2, observed through one coordinate.
  const double c = 1.2 * std::cos(M_PI / 3), s = 1.2 * std::sin(M_PI / 3);
  Matrix a(2, 2);
  // clang-format off
  a << c, -s,
       s,  c;
  // clang-format on
  Matrix h(1, 2);
  h << 1, 0;
  EXPECT_TRUE(pbh_detectable(a, h).holds);
  const PbhResult r = pbh_detectable(a, Matrix::Zero(1, 2));
  ASSERT_FALSE(r.holds);
  EXPECT_NEAR(std::abs(r.witness->eigenvalue), 1.2, 1e-12);
  EXPECT_NE(r.witness->eigenvalue.imag(), 0.0);
}

GTEST_TEST(Assumptions, UnitCircleControllability) {
  // Integrator driven by no noise violates the unit-circle condition.
  LqgSystem s = test::awgn();
  s.F = scalar(1.0);
  s.H = scalar(1.0);
  s.W = scalar(0.0);
  const AssumptionReport rep = check_assumptions(validate_system(s));
  EXPECT_FALSE(rep.unit_circle_controllable.holds);
  EXPECT_FALSE(rep.filter_ok());
  EXPECT_NEAR(std::abs(rep.unit_circle_controllable.witness->eigenvalue), 1.0,
              1e-12);
}

GTEST_TEST(Assumptions, StableSystemsPassRegardlessOfMaps) {
  test::RandomPlants gen(7);
  for (int i = 0; i < 40; ++i) {
    LqgSystem s = gen.next();
    s.F *= 0.9 / (spectral_radius(s.F) + 1e-12);
    s.H.setZero();
    s.G.setZero();
    const AssumptionReport rep = check_assumptions(validate_system(s));
    EXPECT_TRUE(rep.detectable_FH.holds);
    EXPECT_TRUE(rep.stabilizable_FG.holds);
  }
}

GTEST_TEST(Channels, Embeddings) {
  const LqgSystem a = test::awgn();
  EXPECT_TRUE(a.Q.isZero());
  EXPECT_EQ(a.R, Matrix::Identity(1, 1));
  const LqgSystem w = test::parallel_awgn();
  EXPECT_EQ(w.R, Matrix::Identity(2, 2));
  EXPECT_EQ(w.dims().outputs, 2);
  const LqgSystem c = test::colored_noise();
  EXPECT_TRUE(check_assumptions(c).filter_ok());
}

GTEST_TEST(SystemJson, RoundTrip) {
  const LqgSystem s = validate_system(test::example_plant(1.0, 0.5));
  const LqgSystem back = parse_system_json(system_to_json(s));
  EXPECT_EQ(back.F, s.F);
  EXPECT_EQ(back.J, s.J);
  EXPECT_EQ(back.Sigma1, s.Sigma1);
}

GTEST_TEST(SystemJson, StrictKeys) {
  const std::string good =
      R"({"F":[[0]],"G":[[0]],"H":[[0]],"J":[[1]],"W":[[0]],"V":[[1]],)"
      R"("Q":[[0]],"R":[[1]]})";
  const LqgSystem s = parse_system_json_text(good);
  EXPECT_TRUE(s.L.isZero());

  auto code = [](const std::string& text) {
    try {
      parse_system_json_text(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kNumericalFailure;
  };
  std::string missing_v = good;
  missing_v.replace(missing_v.find(R"("V":[[1]],)"), 10, "");
  EXPECT_EQ(code(missing_v), ErrorCode::kConfig);
  std::string extra = good;
  extra.insert(1, R"("X":[[1]],)");
  EXPECT_EQ(code(extra), ErrorCode::kConfig);
  EXPECT_EQ(code(R"({"F":[[0,1],[2]]})"), ErrorCode::kConfig);
  EXPECT_EQ(code("not json"), ErrorCode::kConfig);
}

}  // namespace
}  // namespace icac
