#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icac/linalg.hpp"

namespace icac::maxdet {

inline constexpr double kTolFeas = 1e-9;
inline constexpr double kTolGap = 1e-8;
inline constexpr double kTolKkt = 1e-7;

enum class VariableKind { kSymmetric, kGeneral };

struct VariableId {
  int index = -1;
};

struct MatrixVariable {
  std::string name;
  VariableKind kind = VariableKind::kGeneral;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;  // first scalar coordinate
  Eigen::Index count = 0;   // number of scalar coordinates
};

// Symmetric-matrix-valued affine map  x ↦ constant + Σᵢ xᵢ·coeffs[i].
struct AffineMap {
  std::string name;
  Matrix constant;
  std::vector<Matrix> coeffs;

  Eigen::Index size() const { return constant.rows(); }
  Matrix evaluate(const Vector& x) const;
};

// Scalar affine function  x ↦ constant + coeffsᵀx, constrained ≤ bound.
struct TraceConstraint {
  std::string name;
  double constant = 0.0;
  Vector coeffs;
  double bound = 0.0;

  double evaluate(const Vector& x) const { return constant + coeffs.dot(x); }
};

// maximize log det A(x)  s.t.  F_k(x) ⪰ 0,  t_j(x) ≤ b_j.
struct MaxdetProblem {
  std::vector<MatrixVariable> variables;
  Eigen::Index num_scalars = 0;
  AffineMap objective;
  std::vector<AffineMap> lmis;
  std::vector<TraceConstraint> traces;
  // Set when the all-zero assignment satisfies every constraint.
  bool zero_feasible = false;

  // Reads a variable's matrix value out of a stacked assignment.
  Matrix value(const Vector& x, VariableId id) const;
  // Writes a matrix value into a stacked assignment (symmetric variables use
  // the upper triangle).
  void set_value(Vector& x, VariableId id, const Matrix& m) const;
};

// Accessor handed to the map callbacks of ProblemBuilder.
class Values {
 public:
  Values(const MaxdetProblem& problem, const Vector& x)
      : problem_(&problem), x_(&x) {}
  Matrix operator[](VariableId id) const { return problem_->value(*x_, id); }

 private:
  const MaxdetProblem* problem_;
  const Vector* x_;
};

using MatrixFn = std::function<Matrix(const Values&)>;
using ScalarFn = std::function<double(const Values&)>;

// Assembles a MaxdetProblem from callbacks that evaluate each affine map on
// named matrix variables. Coefficients are extracted by probing the callbacks
// on the basis assignments; build() then re-checks symmetry and affinity on
// random assignments and throws std::invalid_argument if either fails.
class ProblemBuilder {
 public:
  VariableId add_symmetric(const std::string& name, Eigen::Index n);
  VariableId add_matrix(const std::string& name, Eigen::Index rows,
                        Eigen::Index cols);

  void maximize_log_det(const std::string& name, MatrixFn fn);
  void add_lmi(const std::string& name, MatrixFn fn);
  void add_trace_le(const std::string& name, ScalarFn fn, double bound);

  MaxdetProblem build() const;

 private:
  struct PendingMap {
    std::string name;
    MatrixFn fn;
  };
  struct PendingTrace {
    std::string name;
    ScalarFn fn;
    double bound;
  };
  std::vector<MatrixVariable> variables_;
  Eigen::Index num_scalars_ = 0;
  std::optional<PendingMap> objective_;
  std::vector<PendingMap> lmis_;
  std::vector<PendingTrace> traces_;
};

enum class Status { kOptimal, kInfeasible, kMaxIterations, kNumericalFailure };

std::string to_string(Status status);

struct Options {
  double tol_gap = kTolGap;
  double tol_feas = kTolFeas;
  double tol_kkt = kTolKkt;
  // Barrier parameter growth per outer iteration.
  double mu = 10.0;
  int max_newton_steps = 3000;
  std::optional<Vector> warm_start;
};

struct Solution {
  Vector assignment;
  double objective_value = 0.0;  // log det A(x), natural log
  Status status = Status::kNumericalFailure;
  double kkt_residual = 0.0;
  double duality_gap_estimate = 0.0;
  int newton_steps = 0;
  std::string note;
};

struct FeasReport {
  double worst_lmi_eig = 0.0;      // min over LMIs of λ_min(F_k(x))
  double worst_trace_slack = 0.0;  // min over traces of b_j − t_j(x)
};

// Exact evaluation of every constraint at x. Throws Error{kDimensionMismatch}
// if x has the wrong length.
FeasReport check_feasible(const MaxdetProblem& problem, const Vector& x);

// Pluggable solver contract; an external conic solver can implement this.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual Solution solve(const MaxdetProblem& problem,
                         const Options& options) const = 0;
};

// Built-in primal path-following barrier method with a Phase-I feasibility
// search.
class BarrierBackend final : public Backend {
 public:
  Solution solve(const MaxdetProblem& problem,
                 const Options& options) const override;
};

Solution solve(const MaxdetProblem& problem, const Options& options = {});

}  // namespace icac::maxdet
