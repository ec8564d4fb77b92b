#include "icac/maxdet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "icac/errors.hpp"

namespace icac::maxdet {

// ---------------------------------------------------------------------------
// Problem representation

Matrix AffineMap::evaluate(const Vector& x) const {
  Matrix m = constant;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double xi = x(static_cast<Eigen::Index>(i));
    if (xi != 0.0) m.noalias() += xi * coeffs[i];
  }
  return m;
}

Matrix MaxdetProblem::value(const Vector& x, VariableId id) const {
  const MatrixVariable& v = variables.at(static_cast<std::size_t>(id.index));
  Matrix m(v.rows, v.cols);
  Eigen::Index k = v.offset;
  if (v.kind == VariableKind::kSymmetric) {
    for (Eigen::Index i = 0; i < v.rows; ++i) {
      for (Eigen::Index j = i; j < v.cols; ++j) {
        m(i, j) = x(k);
        m(j, i) = x(k);
        ++k;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < v.rows; ++i) {
      for (Eigen::Index j = 0; j < v.cols; ++j) m(i, j) = x(k++);
    }
  }
  return m;
}

void MaxdetProblem::set_value(Vector& x, VariableId id, const Matrix& m) const {
  const MatrixVariable& v = variables.at(static_cast<std::size_t>(id.index));
  if (m.rows() != v.rows || m.cols() != v.cols) {
    throw Error(ErrorCode::kDimensionMismatch,
                "value for variable " + v.name + " has the wrong shape");
  }
  if (x.size() != num_scalars) x = Vector::Zero(num_scalars);
  Eigen::Index k = v.offset;
  if (v.kind == VariableKind::kSymmetric) {
    for (Eigen::Index i = 0; i < v.rows; ++i) {
      for (Eigen::Index j = i; j < v.cols; ++j) x(k++) = 0.5 * (m(i, j) + m(j, i));
    }
  } else {
    for (Eigen::Index i = 0; i < v.rows; ++i) {
      for (Eigen::Index j = 0; j < v.cols; ++j) x(k++) = m(i, j);
    }
  }
}

VariableId ProblemBuilder::add_symmetric(const std::string& name,
                                         Eigen::Index n) {
  MatrixVariable v{name, VariableKind::kSymmetric, n, n, num_scalars_,
                   n * (n + 1) / 2};
  num_scalars_ += v.count;
  variables_.push_back(v);
  return VariableId{static_cast<int>(variables_.size()) - 1};
}

VariableId ProblemBuilder::add_matrix(const std::string& name,
                                      Eigen::Index rows, Eigen::Index cols) {
  MatrixVariable v{name, VariableKind::kGeneral, rows, cols, num_scalars_,
                   rows * cols};
  num_scalars_ += v.count;
  variables_.push_back(v);
  return VariableId{static_cast<int>(variables_.size()) - 1};
}

void ProblemBuilder::maximize_log_det(const std::string& name, MatrixFn fn) {
  objective_ = PendingMap{name, std::move(fn)};
}

void ProblemBuilder::add_lmi(const std::string& name, MatrixFn fn) {
  lmis_.push_back(PendingMap{name, std::move(fn)});
}

void ProblemBuilder::add_trace_le(const std::string& name, ScalarFn fn,
                                  double bound) {
  traces_.push_back(PendingTrace{name, std::move(fn), bound});
}

namespace {

double scale_of(const Matrix& m) {
  return 1.0 + (m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
}

AffineMap probe_map(const MaxdetProblem& shape, const std::string& name,
                    const MatrixFn& fn) {
  const Eigen::Index n = shape.num_scalars;
  Vector x = Vector::Zero(n);
  AffineMap map;
  map.name = name;
  map.constant = fn(Values(shape, x));
  if (map.constant.rows() != map.constant.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "affine map " + name + " is not square");
  }
  map.coeffs.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = 1.0;
    Matrix c = fn(Values(shape, x)) - map.constant;
    x(i) = 0.0;
    if (c.rows() != map.constant.rows() || c.cols() != map.constant.cols()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "affine map " + name + " changes shape");
    }
    map.coeffs.push_back(std::move(c));
  }

  // Structural checks on random assignments: symmetric and affine.
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 2; ++trial) {
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
    const Matrix direct = fn(Values(shape, z));
    const Matrix via_coeffs = map.evaluate(z);
    const double s = scale_of(direct);
    if ((direct - direct.transpose()).cwiseAbs().maxCoeff() > 1e-10 * s) {
      throw std::invalid_argument("affine map " + name +
                                  " is not symmetric");
    }
    if ((direct - via_coeffs).cwiseAbs().maxCoeff() > 1e-9 * s) {
      throw std::invalid_argument("map " + name + " is not affine");
    }
  }
  map.constant = symmetrize(map.constant);
  for (auto& c : map.coeffs) c = symmetrize(c);
  return map;
}

}  // namespace

MaxdetProblem ProblemBuilder::build() const {
  MaxdetProblem problem;
  problem.variables = variables_;
  problem.num_scalars = num_scalars_;
  if (!objective_) {
    throw std::invalid_argument("maxdet problem has no objective");
  }
  problem.objective = probe_map(problem, objective_->name, objective_->fn);
  for (const auto& lmi : lmis_) {
    problem.lmis.push_back(probe_map(problem, lmi.name, lmi.fn));
  }
  for (const auto& tr : traces_) {
    TraceConstraint c;
    c.name = tr.name;
    c.bound = tr.bound;
    Vector x = Vector::Zero(num_scalars_);
    c.constant = tr.fn(Values(problem, x));
    c.coeffs.resize(num_scalars_);
    for (Eigen::Index i = 0; i < num_scalars_; ++i) {
      x(i) = 1.0;
      c.coeffs(i) = tr.fn(Values(problem, x)) - c.constant;
      x(i) = 0.0;
    }
    problem.traces.push_back(std::move(c));
  }
  const FeasReport zero =
      check_feasible(problem, Vector::Zero(problem.num_scalars));
  problem.zero_feasible =
      zero.worst_lmi_eig >= 0.0 && zero.worst_trace_slack >= 0.0;
  return problem;
}

FeasReport check_feasible(const MaxdetProblem& problem, const Vector& x) {
  if (x.size() != problem.num_scalars) {
    throw Error(ErrorCode::kDimensionMismatch,
                "assignment has " + std::to_string(x.size()) +
                    " scalars, problem has " +
                    std::to_string(problem.num_scalars));
  }
  FeasReport report;
  report.worst_lmi_eig = std::numeric_limits<double>::infinity();
  report.worst_trace_slack = std::numeric_limits<double>::infinity();
  for (const auto& lmi : problem.lmis) {
    report.worst_lmi_eig =
        std::min(report.worst_lmi_eig, min_eigenvalue(lmi.evaluate(x)));
  }
  for (const auto& tr : problem.traces) {
    report.worst_trace_slack =
        std::min(report.worst_trace_slack, tr.bound - tr.evaluate(x));
  }
  return report;
}

std::string to_string(Status status) {
  switch (status) {
    case Status::kOptimal: return "Optimal";
    case Status::kInfeasible: return "Infeasible";
    case Status::kMaxIterations: return "MaxIterations";
    case Status::kNumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// Barrier machinery

namespace {

// The barrier runs in extended precision: optimal points are typically
// rank-deficient, and the small eigenvalues approaching zero along the path
// otherwise drown in the rounding of the large ones.
using Real = long double;
using MatrixL = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using VectorL = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

// −w·log det(constant + Σ xᵢ coeffs[i]) with the block required to be ≻ 0.
struct Block {
  MatrixL constant;
  std::vector<MatrixL> coeffs;
  Real weight = 1.0;
};

struct Evaluation {
  bool feasible = false;
  Real value = 0.0;
  VectorL grad;
  // Hessian = jacᵀ·jac, with column i holding √w·vec(L⁻¹CᵢL⁻ᵀ) per block.
  MatrixL jac;
};

// φ(x) = cᵀx + Σ_b w_b·(−log det B_b(x))
class Barrier {
 public:
  Barrier(std::vector<Block> blocks, VectorL linear)
      : blocks_(std::move(blocks)), linear_(std::move(linear)) {}

  Block& block(std::size_t i) { return blocks_[i]; }
  VectorL& linear() { return linear_; }

  Evaluation evaluate(const VectorL& x, bool derivatives) const {
    const Eigen::Index n = x.size();
    Evaluation ev;
    ev.value = linear_.dot(x);
    if (derivatives) {
      Eigen::Index rows = 0;
      for (const Block& b : blocks_) rows += b.constant.size();
      ev.grad = linear_;
      ev.jac = MatrixL::Zero(rows, n);
    }
    Eigen::Index row = 0;
    for (const Block& b : blocks_) {
      MatrixL s = b.constant;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (x(i) != 0.0) s.noalias() += x(i) * b.coeffs[static_cast<std::size_t>(i)];
      }
      Eigen::LLT<MatrixL> llt(((s + s.transpose()) / 2).eval());
      if (llt.info() != Eigen::Success) return ev;
      const VectorL d = llt.matrixLLT().diagonal();
      if (!((d.array() > 0.0).all()) || !d.allFinite()) return ev;
      ev.value -= b.weight * 2.0 * d.array().log().sum();
      if (!derivatives) continue;
      // Bᵢ = L⁻¹ Cᵢ L⁻ᵀ;  ∂ = −w·tr(Bᵢ),  ∂² = w·⟨Bᵢ, Bⱼ⟩.
      const auto lower = llt.matrixL();
      const Real root_w = std::sqrt(b.weight);
      const Eigen::Index k = b.constant.rows();
      for (Eigen::Index i = 0; i < n; ++i) {
        MatrixL t = lower.solve(b.coeffs[static_cast<std::size_t>(i)]);
        const MatrixL bi = lower.solve(t.transpose()).transpose();
        ev.grad(i) -= b.weight * bi.trace();
        ev.jac.col(i).segment(row, k * k) =
            root_w * Eigen::Map<const VectorL>(bi.data(), k * k);
      }
      row += k * k;
    }
    ev.feasible = std::isfinite(ev.value);
    return ev;
  }

 private:
  std::vector<Block> blocks_;
  VectorL linear_;
};

enum class CenterResult { kCentered, kStalled, kBudget, kUnbounded, kBroken };

struct Centering {
  int steps = 0;
  Real decrement_sq = 0.0;
};

// Damped Newton with backtracking on φ. `stop` may end the loop early (used
// by Phase I once a strictly feasible point appears).
template <typename Stop>
CenterResult center(const Barrier& barrier, VectorL& x, int& budget,
                    Centering& info, Stop stop) {
  constexpr Real kArmijo = 0.01;
  constexpr Real kShrink = 0.5;
  constexpr Real kCenterTol = 1e-12;
  // Inside this decrement a full Newton step stays feasible and decreases a
  // self-concordant φ, so no line search on (possibly rounding-dominated) φ.
  constexpr Real kFullStepRegion = 0.04;
  // Decrements below kNoiseFloor that stop shrinking for kStallSteps full
  // steps are the rounding floor of the Newton system, not a failure.
  constexpr Real kNoiseFloor = 1e-3;
  constexpr int kStallSteps = 5;
  Real best = std::numeric_limits<Real>::infinity();
  int stalls = 0;
  if (x.size() == 0) return CenterResult::kCentered;
  for (;;) {
    if (stop(x)) return CenterResult::kCentered;
    if (budget <= 0) return CenterResult::kBudget;
    const Evaluation ev = barrier.evaluate(x, true);
    if (!ev.feasible) return CenterResult::kBroken;
    // Newton system jacᵀjac·dx = −g through a pivoted QR of the column-scaled
    // Jacobian; this never squares its condition number and keeps λ² ≥ 0.
    VectorL dscale(ev.jac.cols());
    for (Eigen::Index i = 0; i < ev.jac.cols(); ++i) {
      const Real c = ev.jac.col(i).norm();
      dscale(i) = c > 0.0 ? 1.0 / c : 1.0;
    }
    const Eigen::ColPivHouseholderQR<MatrixL> qr(ev.jac * dscale.asDiagonal());
    const Eigen::Index n = ev.jac.cols();
    if (qr.rank() < n) return CenterResult::kBroken;
    const auto upper =
        qr.matrixR().topLeftCorner(n, n).triangularView<Eigen::Upper>();
    const VectorL rhs = qr.colsPermutation().transpose() *
                       (-(dscale.asDiagonal() * ev.grad)).eval();
    const VectorL y = upper.transpose().solve(rhs);
    const VectorL dx =
        dscale.asDiagonal() * (qr.colsPermutation() * upper.solve(y)).eval();
    if (!dx.allFinite()) return CenterResult::kBroken;
    const Real lambda_sq = y.squaredNorm();
    info.decrement_sq = lambda_sq;
    if (lambda_sq < 0.0) return CenterResult::kBroken;
    if (0.5 * lambda_sq <= kCenterTol) return CenterResult::kCentered;
    if (lambda_sq > 0.5 * best) {
      if (lambda_sq < kNoiseFloor && ++stalls >= kStallSteps) {
        return CenterResult::kCentered;
      }
    } else {
      stalls = 0;
      best = lambda_sq;
    }

    bool accepted = false;
    if (lambda_sq < kFullStepRegion) {
      const VectorL trial = x + dx;
      if (barrier.evaluate(trial, false).feasible) {
        x = trial;
        accepted = true;
      }
    }
    Real step = 1.0;
    const Real slope = ev.grad.dot(dx);
    while (!accepted && step > 1e-10) {
      const VectorL trial = x + step * dx;
      const Evaluation te = barrier.evaluate(trial, false);
      if (te.feasible && te.value <= ev.value + kArmijo * step * slope) {
        x = trial;
        accepted = true;
        break;
      }
      step *= kShrink;
    }
    --budget;
    ++info.steps;
    if (!accepted) {
      // Rounding floor: the decrease is below what φ can resolve.
      return lambda_sq < 1e-6 ? CenterResult::kStalled : CenterResult::kBroken;
    }
    if (x.lpNorm<Eigen::Infinity>() > 1e14) return CenterResult::kUnbounded;
  }
}

Block block_from_map(const AffineMap& map, Eigen::Index extra_vars) {
  Block b;
  b.constant = map.constant.cast<Real>();
  for (const auto& c : map.coeffs) b.coeffs.push_back(c.cast<Real>());
  for (Eigen::Index i = 0; i < extra_vars; ++i) {
    b.coeffs.push_back(MatrixL::Zero(map.size(), map.size()));
  }
  return b;
}

Block block_from_trace(const TraceConstraint& tr, Eigen::Index extra_vars) {
  // bound − constant − coeffsᵀx > 0 as a 1×1 block.
  Block b;
  b.constant = MatrixL::Constant(1, 1, static_cast<Real>(tr.bound) -
                                          static_cast<Real>(tr.constant));
  for (Eigen::Index i = 0; i < tr.coeffs.size(); ++i) {
    b.coeffs.push_back(MatrixL::Constant(1, 1, -tr.coeffs(i)));
  }
  for (Eigen::Index i = 0; i < extra_vars; ++i) {
    b.coeffs.push_back(MatrixL::Zero(1, 1));
  }
  return b;
}

double barrier_parameter(const MaxdetProblem& p) {
  double m = static_cast<double>(p.traces.size());
  for (const auto& lmi : p.lmis) m += static_cast<double>(lmi.size());
  return m;
}

double min_block_eig(const MaxdetProblem& p, const Vector& x,
                     bool include_objective) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& lmi : p.lmis) {
    worst = std::min(worst, min_eigenvalue(lmi.evaluate(x)));
  }
  for (const auto& tr : p.traces) worst = std::min(worst, tr.bound - tr.evaluate(x));
  if (include_objective) {
    worst = std::min(worst, min_eigenvalue(p.objective.evaluate(x)));
  }
  return worst;
}

constexpr double kPhaseOneRadius = 1e8;

enum class PhaseOne { kFeasible, kInfeasible, kBudget, kBroken };

// Phase I: minimize s subject to every block + sI ≻ 0, stopping at the first
// iterate with s < 0.
PhaseOne find_interior(const MaxdetProblem& p, bool include_objective,
                       const Options& opt, Vector& x, int& budget,
                       std::string& note) {
  const Eigen::Index n = p.num_scalars;
  if (min_block_eig(p, x, include_objective) > 0.0) return PhaseOne::kFeasible;

  std::vector<Block> blocks;
  auto add = [&blocks](Block b) {
    const Eigen::Index k = b.constant.rows();
    b.coeffs.back() = MatrixL::Identity(k, k);  // slack coordinate
    blocks.push_back(std::move(b));
  };
  for (const auto& lmi : p.lmis) add(block_from_map(lmi, 1));
  for (const auto& tr : p.traces) add(block_from_trace(tr, 1));
  if (include_objective) add(block_from_map(p.objective, 1));
  // ‖x‖ ≤ R as [[R, xᵀ], [x, R·I]] ⪰ 0 keeps phase I bounded when the
  // feasible set is not.
  {
    const Real radius = kPhaseOneRadius * (1.0 + x.norm());
    Block ball;
    ball.constant = radius * MatrixL::Identity(n + 1, n + 1);
    for (Eigen::Index i = 0; i <= n; ++i) {
      MatrixL c = MatrixL::Zero(n + 1, n + 1);
      if (i < n) c(0, i + 1) = c(i + 1, 0) = 1.0;
      ball.coeffs.push_back(std::move(c));
    }
    blocks.push_back(std::move(ball));
  }
  double m1 = 0.0;
  for (const auto& b : blocks) m1 += static_cast<double>(b.constant.rows());

  VectorL z(n + 1);
  z.head(n) = x.cast<Real>();
  z(n) = std::max(0.0, -min_block_eig(p, x, include_objective)) + 1.0;
  VectorL linear = VectorL::Zero(n + 1);
  Barrier barrier(std::move(blocks), linear);

  double t = 1.0;
  // The slack must be clearly negative so the point stays strictly feasible
  // after rounding back to double.
  auto found = [n](const VectorL& v) { return v(n) < -1e-14L; };
  for (;;) {
    barrier.linear()(n) = t;
    Centering info;
    const CenterResult r = center(barrier, z, budget, info, found);
    if (found(z)) {
      x = z.head(n).cast<double>();
      return PhaseOne::kFeasible;
    }
    if (r == CenterResult::kBudget) return PhaseOne::kBudget;
    if (r == CenterResult::kBroken || r == CenterResult::kUnbounded) {
      note = "phase I Newton iteration broke down";
      return PhaseOne::kBroken;
    }
    const double slack = static_cast<double>(z(n));
    const double lower_bound = slack - m1 / t;
    if (lower_bound > 0.0) {
      note = "phase I certifies infeasibility (min slack >= " +
             std::to_string(lower_bound) + ")";
      return PhaseOne::kInfeasible;
    }
    if (m1 / t < 0.1 * opt.tol_feas) {
      note = "no strictly feasible point (phase I optimum " +
             std::to_string(slack) + ")";
      return PhaseOne::kInfeasible;
    }
    t *= opt.mu;
  }
}

}  // namespace

Solution BarrierBackend::solve(const MaxdetProblem& p,
                               const Options& opt) const {
  const Eigen::Index n = p.num_scalars;
  Solution sol;
  int budget = opt.max_newton_steps;
  Vector x = Vector::Zero(n);
  if (opt.warm_start) {
    if (opt.warm_start->size() != n) {
      throw Error(ErrorCode::kDimensionMismatch, "warm start has wrong length");
    }
    x = *opt.warm_start;
  }

  const PhaseOne ph = find_interior(p, true, opt, x, budget, sol.note);
  if (ph != PhaseOne::kFeasible) {
    sol.assignment = x;
    sol.newton_steps = opt.max_newton_steps - budget;
    if (ph == PhaseOne::kBudget) {
      sol.status = Status::kMaxIterations;
    } else if (ph == PhaseOne::kBroken) {
      sol.status = Status::kNumericalFailure;
    } else {
      // Distinguish an empty feasible set from an objective that is singular
      // everywhere on it.
      Vector probe = x;
      int probe_budget = opt.max_newton_steps;
      std::string probe_note;
      if (find_interior(p, false, opt, probe, probe_budget, probe_note) ==
          PhaseOne::kFeasible) {
        sol.status = Status::kNumericalFailure;
        sol.note = "objective matrix is singular on the feasible set";
        sol.assignment = probe;
      } else {
        sol.status = Status::kInfeasible;
      }
    }
    return sol;
  }

  std::vector<Block> blocks;
  blocks.push_back(block_from_map(p.objective, 0));
  for (const auto& lmi : p.lmis) blocks.push_back(block_from_map(lmi, 0));
  for (const auto& tr : p.traces) blocks.push_back(block_from_trace(tr, 0));
  Barrier barrier(std::move(blocks), VectorL::Zero(n));
  const double m = barrier_parameter(p);
  VectorL xl = x.cast<Real>();

  double t = 1.0;
  Centering last;
  last.decrement_sq = std::numeric_limits<double>::infinity();
  auto never = [](const VectorL&) { return false; };
  for (;;) {
    barrier.block(0).weight = t;
    Centering info;
    const CenterResult r = center(barrier, xl, budget, info, never);
    last = info;
    if (r == CenterResult::kBudget) {
      sol.status = Status::kMaxIterations;
      break;
    }
    if (r == CenterResult::kBroken) {
      sol.status = Status::kNumericalFailure;
      sol.note = "barrier Newton iteration broke down (last centered gap " +
                 std::to_string(m * opt.mu / t) + ")";
      break;
    }
    if (r == CenterResult::kUnbounded) {
      sol.status = Status::kNumericalFailure;
      sol.note = "objective appears unbounded";
      break;
    }
    if (m == 0.0 || m / t <= opt.tol_gap) {
      sol.status = Status::kOptimal;
      break;
    }
    t *= opt.mu;
  }

  x = xl.cast<double>();
  sol.assignment = x;
  sol.newton_steps = opt.max_newton_steps - budget;
  sol.duality_gap_estimate = m / t;
  const auto logdet = log_det_pd(p.objective.evaluate(x));
  sol.objective_value =
      logdet ? *logdet : -std::numeric_limits<double>::infinity();
  // Stationarity residual of the Lagrangian with the barrier duals: the
  // centering Newton decrement, in the local norm, scaled by 1/t.
  sol.kkt_residual = std::sqrt(std::max(0.0, static_cast<double>(last.decrement_sq))) / t;
  if (sol.status == Status::kOptimal && !(sol.kkt_residual <= opt.tol_kkt)) {
    sol.status = Status::kNumericalFailure;
    sol.note = "KKT residual " + std::to_string(sol.kkt_residual) +
               " above tolerance";
  }
  return sol;
}

Solution solve(const MaxdetProblem& problem, const Options& options) {
  return BarrierBackend{}.solve(problem, options);
}

}  // namespace icac::maxdet
