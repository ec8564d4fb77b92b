#include "icac/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "icac/errors.hpp"

namespace icac {
namespace {

using maxdet::Values;
using maxdet::VariableId;

Matrix block_diag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

Matrix upsilon(const Matrix& gamma, const Matrix& pi, const Matrix& sigma_hat) {
  const Eigen::Index r = sigma_hat.rows();
  const Eigen::Index p = pi.rows();
  Matrix u(r + p, r + p);
  u << sigma_hat, gamma.transpose(), gamma, pi;
  return u;
}

// Tr(Σ̂ KᵀΨ_L K) + Tr(Π Ψ_L) + 2 Tr(Γ KᵀΨ_L): the part of the LQR cost above
// 𝒥* that the coding policy adds.
double excess_cost(const LqrSolution& lqr, const Matrix& gamma,
                   const Matrix& pi, const Matrix& sigma_hat) {
  const Matrix kt_psi = lqr.Klqr.transpose() * lqr.PsiLqr;
  return (sigma_hat * kt_psi * lqr.Klqr).trace() + (pi * lqr.PsiLqr).trace() +
         2.0 * (gamma * kt_psi).trace();
}

// Linear-in-(Γ, Π, Σ̂) pieces only; no inverse, so safe inside the builder.
struct LinearParts {
  Matrix psi_y, ky_psi_y, drift;
};

LinearParts linear_parts(const LqgSystem& sys, const KalmanSolution& kalman,
                         const Matrix& gamma, const Matrix& pi,
                         const Matrix& sigma_hat) {
  const Matrix& F = sys.F;
  const Matrix& G = sys.G;
  const Matrix& H = sys.H;
  const Matrix& J = sys.J;
  LinearParts out;
  out.psi_y = H * sigma_hat * H.transpose() + J * pi * J.transpose() +
              H * gamma.transpose() * J.transpose() +
              J * gamma * H.transpose() + kalman.Psi;
  out.ky_psi_y = F * sigma_hat * H.transpose() +
                 F * gamma.transpose() * J.transpose() +
                 G * gamma * H.transpose() + G * pi * J.transpose() +
                 kalman.Kp * kalman.Psi;
  out.drift = F * sigma_hat * F.transpose() + G * pi * G.transpose() +
              G * gamma * F.transpose() + F * gamma.transpose() * G.transpose() +
              kalman.Kp * kalman.Psi * kalman.Kp.transpose();
  return out;
}

Matrix evolution_lmi(const LqgSystem& sys, const KalmanSolution& kalman,
                     const Matrix& gamma, const Matrix& pi,
                     const Matrix& sigma_hat) {
  const LinearParts lp = linear_parts(sys, kalman, gamma, pi, sigma_hat);
  const Eigen::Index r = sigma_hat.rows();
  const Eigen::Index l = lp.psi_y.rows();
  Matrix out(r + l, r + l);
  out << lp.drift - sigma_hat, lp.ky_psi_y, lp.ky_psi_y.transpose(), lp.psi_y;
  return out;
}

// Feasibility of a candidate in full coordinates, at absolute tolerance tol.
bool feasible_point(const LqgSystem& sys, const KalmanSolution& kalman,
                    const LqrSolution& lqr, double budget, const Matrix& gamma,
                    const Matrix& pi, const Matrix& sigma_hat, double tol) {
  if (min_eigenvalue(symmetrize(upsilon(gamma, pi, sigma_hat))) < -tol) {
    return false;
  }
  if (min_eigenvalue(symmetrize(
          evolution_lmi(sys, kalman, gamma, pi, sigma_hat))) < -tol) {
    return false;
  }
  return excess_cost(lqr, gamma, pi, sigma_hat) <= budget + tol;
}

CapacityStatus from_solver(maxdet::Status s) {
  switch (s) {
    case maxdet::Status::kOptimal:
      return CapacityStatus::kOptimal;
    case maxdet::Status::kInfeasible:
      return CapacityStatus::kInfeasible;
    case maxdet::Status::kMaxIterations:
      return CapacityStatus::kMaxIterations;
    case maxdet::Status::kNumericalFailure:
      break;
  }
  return CapacityStatus::kNumericalFailure;
}

void require_assumptions(const LqgSystem& sys, const AssumptionReport& rep) {
  std::string failed;
  if (!rep.detectable_FH.holds) {
    failed += "(F, H) not detectable: " + describe(rep.detectable_FH) + "; ";
  }
  if (!rep.unit_circle_controllable.holds) {
    failed += "noise not controllable on the unit circle: " +
              describe(rep.unit_circle_controllable) + "; ";
  }
  if (!sys.Q.isZero(0.0) && !rep.stabilizable_FG.holds) {
    failed += "(F, G) not stabilizable: " + describe(rep.stabilizable_FG) + "; ";
  }
  if (!failed.empty()) {
    failed.resize(failed.size() - 2);
    throw Error(ErrorCode::kAssumptionViolation, failed);
  }
}

}  // namespace

std::string to_string(Parameterization form) {
  return form == Parameterization::kBlockwise ? "blockwise" : "joint";
}

std::string to_string(CapacityStatus status) {
  switch (status) {
    case CapacityStatus::kOptimal:
      return "optimal";
    case CapacityStatus::kInfeasible:
      return "infeasible";
    case CapacityStatus::kNumericalFailure:
      return "numerical_failure";
    case CapacityStatus::kMaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

PolicyMatrices policy_matrices(const LqgSystem& sys,
                               const KalmanSolution& kalman,
                               const Matrix& gamma, const Matrix& pi,
                               const Matrix& sigma_hat) {
  PolicyMatrices pm;
  pm.Gamma = gamma;
  pm.Pi = symmetrize(pi);
  pm.SigmaHat = symmetrize(sigma_hat);
  const LinearParts lp = linear_parts(sys, kalman, pm.Gamma, pm.Pi, pm.SigmaHat);
  pm.PsiY = symmetrize(lp.psi_y);
  pm.KyPsiY = lp.ky_psi_y;
  pm.Drift = symmetrize(lp.drift);
  pm.SigmaHatPinv = pinv_psd(pm.SigmaHat, kRankTol);
  pm.M = symmetrize(pm.Pi - pm.Gamma * pm.SigmaHatPinv * pm.Gamma.transpose());
  const auto ky = right_solve_pd(pm.KyPsiY, pm.PsiY);
  const auto ld_y = log_det_pd(pm.PsiY);
  const auto ld = log_det_pd(kalman.Psi);
  if (!ky || !ld_y || !ld) {
    throw Error(ErrorCode::kNumericalFailure,
                "output innovation covariance is not positive definite");
  }
  pm.Ky = *ky;
  pm.rate_nats = 0.5 * (*ld_y - *ld);
  return pm;
}

Matrix fixed_point_defect(const PolicyMatrices& pm) {
  return symmetrize(pm.SigmaHat -
                    (pm.Drift - pm.Ky * pm.PsiY * pm.Ky.transpose()));
}

RecursionSpec decoder_recursion(const LqgSystem& sys,
                                const KalmanSolution& kalman,
                                const PolicyMatrices& pm) {
  const Matrix feedback = pm.Gamma * pm.SigmaHatPinv;
  RecursionSpec spec;
  spec.A = sys.F + sys.G * feedback;
  spec.C = sys.H + sys.J * feedback;
  spec.Wn = symmetrize(sys.G * pm.M * sys.G.transpose() +
                       kalman.Kp * kalman.Psi * kalman.Kp.transpose());
  spec.Vn = symmetrize(sys.J * pm.M * sys.J.transpose() + kalman.Psi);
  spec.Ln = sys.G * pm.M * sys.J.transpose() + kalman.Kp * kalman.Psi;
  return spec;
}

void CapacityProblem::decode(const Vector& x, Matrix& gamma, Matrix& pi,
                             Matrix& sigma_hat) const {
  const Eigen::Index r = basis.rows();
  const Eigen::Index rc = basis.cols();
  const Eigen::Index p = Klqr.rows();
  gamma = Matrix::Zero(p, r);
  pi = Matrix::Zero(p, p);
  sigma_hat = Matrix::Zero(r, r);
  if (on_floor) {
    if (rc > 0) sigma_hat = basis * problem.value(x, ids[0]) * basis.transpose();
    gamma = -Klqr * sigma_hat;
    pi = Klqr * sigma_hat * Klqr.transpose();
    return;
  }
  if (form == Parameterization::kJoint) {
    const Matrix u = problem.value(x, ids[0]);
    sigma_hat = basis * u.topLeftCorner(rc, rc) * basis.transpose();
    gamma = u.bottomLeftCorner(p, rc) * basis.transpose();
    pi = u.bottomRightCorner(p, p);
    return;
  }
  pi = problem.value(x, ids[0]);
  if (rc > 0) {
    sigma_hat = basis * problem.value(x, ids[1]) * basis.transpose();
    gamma = problem.value(x, ids[2]) * basis.transpose();
  }
}

Vector CapacityProblem::encode(const Matrix& gamma, const Matrix& pi,
                               const Matrix& sigma_hat) const {
  Vector x = Vector::Zero(problem.num_scalars);
  const Matrix sc = basis.transpose() * sigma_hat * basis;
  const Matrix gc = gamma * basis;
  if (on_floor) {
    if (basis.cols() > 0) problem.set_value(x, ids[0], sc);
    return x;
  }
  if (form == Parameterization::kJoint) {
    problem.set_value(x, ids[0], upsilon(gc, pi, sc));
    return x;
  }
  problem.set_value(x, ids[0], pi);
  if (basis.cols() > 0) {
    problem.set_value(x, ids[1], sc);
    problem.set_value(x, ids[2], gc);
  }
  return x;
}

CapacityProblem build_capacity_problem(const LqgSystem& sys,
                                       const KalmanSolution& kalman,
                                       const LqrSolution& lqr, double p,
                                       Parameterization form) {
  if (!std::isfinite(p)) {
    throw Error(ErrorCode::kConfig, "budget p must be finite");
  }
  const double jstar = lqr.Jstar;
  if (p < jstar - maxdet::kTolFeas) {
    throw Error(ErrorCode::kBudgetBelowFloor,
                "budget " + std::to_string(p) +
                    " is below the minimum LQR cost " + std::to_string(jstar));
  }
  const Eigen::Index r = sys.F.rows();
  const Eigen::Index np = sys.G.cols();
  const Eigen::Index l = sys.H.rows();

  CapacityProblem cp;
  cp.form = form;
  cp.budget = p;
  cp.cost_floor = jstar;
  cp.Klqr = lqr.Klqr;
  cp.log_det_psi = log_det_pd(kalman.Psi).value_or(0.0);
  const double excess = p - jstar;
  cp.on_floor = excess <= maxdet::kTolFeas * std::max(1.0, std::abs(jstar));

  // Every feasible point keeps Σ̂ inside a known subspace (and, on the floor,
  // the evolution LMI has known null directions); restricting to it leaves a
  // problem with a strictly feasible point.
  Matrix lmi_basis;
  if (cp.on_floor) {
    // With Γ = −KΣ̂, Π = KΣ̂Kᵀ, the evolution LMI is annihilated by (v, −K_pᵀv)
    // for v in the stable left-invariant subspace of B = A − K_p C, and
    // forces Σ̂v = 0 there.
    const Matrix a = sys.F - sys.G * lqr.Klqr;
    const Matrix c = sys.H - sys.J * lqr.Klqr;
    cp.basis = unstable_subspace_basis(a - kalman.Kp * c, kUnitCircleTol);
    const Matrix stable_left = orthogonal_complement(cp.basis);
    Matrix null_dirs(r + l, stable_left.cols());
    null_dirs << stable_left, -kalman.Kp.transpose() * stable_left;
    lmi_basis = orthogonal_complement(null_dirs);
  } else {
    Matrix inputs(r, np + l);
    inputs << sys.G, kalman.Kp;
    cp.basis = controllable_basis(sys.F, inputs);
    lmi_basis = block_diag(cp.basis, Matrix::Identity(l, l));
  }
  const Matrix T = cp.basis;
  const Eigen::Index rc = T.cols();
  const Matrix Tl = lmi_basis;

  maxdet::ProblemBuilder b;
  // Every map below is written against full-coordinate (Γ, Π, Σ̂).
  std::function<void(const Values&, Matrix&, Matrix&, Matrix&)> full;

  if (cp.on_floor) {
    if (rc > 0) cp.ids.push_back(b.add_symmetric("SigmaHat_c", rc));
    const Matrix K = lqr.Klqr;
    const auto ids = cp.ids;
    full = [=](const Values& v, Matrix& g, Matrix& pi, Matrix& sh) {
      sh = rc > 0 ? Matrix(T * v[ids[0]] * T.transpose()) : Matrix::Zero(r, r);
      g = -K * sh;
      pi = K * sh * K.transpose();
    };
    if (rc > 0) {
      b.add_lmi("SigmaHat", [ids](const Values& v) { return v[ids[0]]; });
    }
  } else if (form == Parameterization::kJoint) {
    cp.ids.push_back(b.add_symmetric("Upsilon_c", rc + np));
    const auto ids = cp.ids;
    full = [=](const Values& v, Matrix& g, Matrix& pi, Matrix& sh) {
      const Matrix u = v[ids[0]];
      sh = T * u.topLeftCorner(rc, rc) * T.transpose();
      g = u.bottomLeftCorner(np, rc) * T.transpose();
      pi = u.bottomRightCorner(np, np);
    };
    b.add_lmi("Upsilon", [ids](const Values& v) { return v[ids[0]]; });
    // Tr(Υ N), N = [Kᵀ; I] Ψ_LQR [K, I], restricted to the reduced variable.
    Matrix kt_i(r + np, np);
    kt_i << lqr.Klqr.transpose(), Matrix::Identity(np, np);
    const Matrix Tb = block_diag(T, Matrix::Identity(np, np));
    const Matrix N = Tb.transpose() * kt_i * lqr.PsiLqr * kt_i.transpose() * Tb;
    b.add_trace_le(
        "lqr_cost",
        [ids, N](const Values& v) { return (v[ids[0]] * N).trace(); }, excess);
  } else {
    cp.ids.push_back(b.add_symmetric("Pi", np));
    if (rc > 0) {
      cp.ids.push_back(b.add_symmetric("SigmaHat_c", rc));
      cp.ids.push_back(b.add_matrix("Gamma_c", np, rc));
    }
    const auto ids = cp.ids;
    full = [=](const Values& v, Matrix& g, Matrix& pi, Matrix& sh) {
      pi = v[ids[0]];
      if (rc > 0) {
        sh = T * v[ids[1]] * T.transpose();
        g = v[ids[2]] * T.transpose();
      } else {
        sh = Matrix::Zero(r, r);
        g = Matrix::Zero(np, r);
      }
    };
    b.add_lmi("Upsilon", [ids, rc, np](const Values& v) {
      if (rc == 0) return v[ids[0]];
      return upsilon(v[ids[2]], v[ids[0]], v[ids[1]]);
    });
    b.add_trace_le(
        "lqr_cost",
        [full, lqr, jstar](const Values& v) {
          Matrix g, pi, sh;
          full(v, g, pi, sh);
          return excess_cost(lqr, g, pi, sh) + jstar;
        },
        p);
  }

  const LqgSystem s = sys;
  const KalmanSolution k = kalman;
  b.add_lmi("evolution", [full, s, k, Tl](const Values& v) {
    Matrix g, pi, sh;
    full(v, g, pi, sh);
    return Matrix(Tl.transpose() * evolution_lmi(s, k, g, pi, sh) * Tl);
  });
  b.maximize_log_det("PsiY", [full, s, k](const Values& v) {
    Matrix g, pi, sh;
    full(v, g, pi, sh);
    return linear_parts(s, k, g, pi, sh).psi_y;
  });

  cp.problem = b.build();
  return cp;
}

PreparedSystem prepare_system(const LqgSystem& sys_in) {
  PreparedSystem out;
  out.sys = validate_system(sys_in);
  out.assumptions = check_assumptions(out.sys);
  require_assumptions(out.sys, out.assumptions);
  out.kalman = solve_kalman(out.sys);
  out.lqr = solve_lqr(out.sys, out.kalman);
  return out;
}

CapacityResult compute_capacity(const LqgSystem& sys_in, double p,
                                const CapacityOptions& options) {
  const PreparedSystem prep = prepare_system(sys_in);
  CapacityResult out =
      compute_capacity(prep.sys, prep.kalman, prep.lqr, p, options);
  out.assumptions = prep.assumptions;
  return out;
}

CapacityResult compute_capacity(const LqgSystem& sys,
                                const KalmanSolution& kalman,
                                const LqrSolution& lqr, double p,
                                const CapacityOptions& options) {
  CapacityResult out;
  out.kalman = kalman;
  out.lqr = lqr;
  const CapacityProblem cp = build_capacity_problem(sys, kalman, lqr, p,
                                                    options.form);
  maxdet::Options solver_opts = options.solver;
  if (solver_opts.warm_start &&
      solver_opts.warm_start->size() != cp.problem.num_scalars) {
    solver_opts.warm_start.reset();
  }
  const maxdet::Solution sol = maxdet::solve(cp.problem, solver_opts);

  CapacitySolution& cs = out.solution;
  cs.status = from_solver(sol.status);
  cs.budget = p;
  cs.cost_floor = lqr.Jstar;
  cs.duality_gap = sol.duality_gap_estimate;
  cs.kkt_residual = sol.kkt_residual;
  cs.newton_steps = sol.newton_steps;
  cs.note = sol.note;
  cs.assignment = sol.assignment;
  if (sol.assignment.size() != cp.problem.num_scalars ||
      cs.status == CapacityStatus::kInfeasible) {
    return out;
  }

  cp.decode(sol.assignment, cs.Gamma, cs.Pi, cs.SigmaHat);
  cs.Pi = symmetrize(cs.Pi);
  cs.SigmaHat = symmetrize(cs.SigmaHat);
  cs.Upsilon = upsilon(cs.Gamma, cs.Pi, cs.SigmaHat);

  const PolicyMatrices pm =
      policy_matrices(sys, kalman, cs.Gamma, cs.Pi, cs.SigmaHat);
  cs.PsiY = pm.PsiY;
  cs.Ky = pm.Ky;
  cs.M = pm.M;
  cs.capacity_nats = pm.rate_nats;
  if (min_eigenvalue(pm.PsiY) < kPsiYFloor) {
    cs.status = CapacityStatus::kNumericalFailure;
    cs.note = "output innovation covariance is near-singular";
  }

  CertificateReport& cert = out.certificates;
  PolicyMatrices policy = pm;
  const double budget = p - lqr.Jstar;
  if (options.perturb && min_eigenvalue(pm.M) < kTolPd) {
    const double tr_pi = cs.Pi.trace();
    const double tr_psi_lqr = lqr.PsiLqr.trace();
    const double used = excess_cost(lqr, cs.Gamma, cs.Pi, cs.SigmaHat);
    const Eigen::Index np = cs.Pi.rows();
    bool accepted = false;
    for (double eps = 1e-6; eps <= 1e-2 * (1.0 + 1e-9) && !accepted;
         eps *= 10.0) {
      // Scale ε·Tr(Π)/p down, if needed, so the cost budget still holds.
      const double room = std::max(0.0, budget - (1.0 - eps) * used);
      const double eps2 = std::min(eps * tr_pi / static_cast<double>(np),
                                   room / tr_psi_lqr);
      const Matrix g = (1.0 - eps) * cs.Gamma;
      const Matrix pi =
          (1.0 - eps) * cs.Pi + eps2 * Matrix::Identity(np, np);
      const Matrix sh = (1.0 - eps) * cs.SigmaHat;
      if (!feasible_point(sys, kalman, lqr, budget, g, pi, sh,
                          options.solver.tol_feas)) {
        continue;
      }
      PolicyMatrices cand = policy_matrices(sys, kalman, g, pi, sh);
      if (pm.rate_nats - cand.rate_nats > kRateSacrifice) continue;
      if (min_eigenvalue(cand.M) < kTolPd) continue;
      policy = std::move(cand);
      cert.perturbation_applied = std::make_pair(eps, eps2);
      accepted = true;
    }
    if (!accepted) {
      cert.notes.emplace_back(
          "no perturbation on the grid made M positive definite");
    }
  }
  cs.policy = policy;
  cert.m_star_min_eig = min_eigenvalue(policy.M);

  if (!options.run_certificates) return out;

  cert.riccati_residual = inf_norm(fixed_point_defect(pm)) /
                          (1.0 + inf_norm(cs.SigmaHat));
  const Eigen::Index r = cs.SigmaHat.rows();
  cert.range_defect =
      inf_norm(cs.Gamma * (Matrix::Identity(r, r) -
                           cs.SigmaHat * pm.SigmaHatPinv));
  const Matrix feedback = cs.Gamma * pm.SigmaHatPinv;
  cert.detectable_closed_loop =
      pbh_detectable(sys.F + sys.G * feedback, sys.H + sys.J * feedback);
  try {
    const RecursionResult rec = iterate_riccati_recursion(
        decoder_recursion(sys, kalman, policy), policy.SigmaHat, kTolCert,
        kCertMaxIter);
    cert.recursion_converged = rec.converged;
    cert.recursion_iters = rec.iterations;
    cert.recursion_defect = rec.relative_step;
  } catch (const Error& e) {
    cert.recursion_converged = false;
    cert.notes.emplace_back(std::string("decoder recursion: ") + e.what());
  }
  if (cert.riccati_residual > kTolCert) {
    cert.notes.emplace_back("fixed-point residual above tolerance");
  }
  if (!cert.detectable_closed_loop.holds) {
    cert.notes.emplace_back("closed-loop pair not detectable: " +
                            describe(cert.detectable_closed_loop));
  }
  return out;
}

std::vector<SweepPoint> capacity_sweep(const LqgSystem& sys_in,
                                       const std::vector<double>& p_values,
                                       const SweepOptions& options) {
  if (!std::is_sorted(p_values.begin(), p_values.end())) {
    throw Error(ErrorCode::kConfig, "sweep budgets must be ascending");
  }
  const PreparedSystem prep = prepare_system(sys_in);
  const LqgSystem& sys = prep.sys;
  const KalmanSolution& kalman = prep.kalman;
  const LqrSolution& lqr = prep.lqr;

  std::vector<SweepPoint> points(p_values.size());
  auto solve_point = [&](std::size_t i, std::optional<Vector>* warm) {
    SweepPoint& pt = points[i];
    pt.p = p_values[i];
    CapacityOptions opts = options.capacity;
    if (warm && *warm) opts.solver.warm_start = *warm;
    try {
      const CapacityResult res = compute_capacity(sys, kalman, lqr, pt.p, opts);
      pt.status = to_string(res.solution.status);
      if (res.solution.status == CapacityStatus::kOptimal) {
        pt.capacity_nats = res.solution.capacity_nats;
        pt.certified = res.certificates.certified();
        if (warm) *warm = res.solution.assignment;
      }
    } catch (const Error& e) {
      pt.status = e.code() == ErrorCode::kBudgetBelowFloor
                      ? to_string(CapacityStatus::kInfeasible)
                      : std::string(to_string(e.code()));
    }
  };

  const int jobs = std::max(1, options.jobs);
  if (jobs == 1 || points.size() < 2) {
    std::optional<Vector> warm;
    for (std::size_t i = 0; i < points.size(); ++i) {
      solve_point(i, options.warm_start ? &warm : nullptr);
    }
    return points;
  }
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < points.size(); i += jobs) {
        solve_point(i, nullptr);
      }
    });
  }
  for (auto& t : workers) t.join();
  return points;
}

EquivalenceReport verify_equivalence(const LqgSystem& sys, double p,
                                     const CapacityOptions& options) {
  CapacityOptions a = options;
  a.form = Parameterization::kBlockwise;
  a.run_certificates = false;
  a.solver.warm_start.reset();
  CapacityOptions b = a;
  b.form = Parameterization::kJoint;
  EquivalenceReport rep;
  rep.blockwise_nats = compute_capacity(sys, p, a).solution.capacity_nats;
  rep.joint_nats = compute_capacity(sys, p, b).solution.capacity_nats;
  rep.delta = std::abs(rep.blockwise_nats - rep.joint_nats);
  return rep;
}

}  // namespace icac
