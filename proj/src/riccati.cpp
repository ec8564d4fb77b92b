#include "icac/riccati.hpp"

#include <cmath>
#include <string>

#include "icac/errors.hpp"

namespace icac {

Matrix RecursionSpec::gain(const Matrix& sigma, Matrix* innovation) const {
  const Matrix psi = symmetrize(C * sigma * C.transpose() + Vn);
  auto k = right_solve_pd(A * sigma * C.transpose() + Ln, psi);
  if (!k) {
    throw Error(ErrorCode::kSingularInnovation,
                "innovation covariance lost positive definiteness");
  }
  if (innovation) *innovation = psi;
  return *k;
}

Matrix RecursionSpec::step(const Matrix& sigma) const {
  Matrix psi;
  const Matrix k = gain(sigma, &psi);
  return symmetrize(A * sigma * A.transpose() + Wn - k * psi * k.transpose());
}

RecursionResult iterate_riccati_recursion(const RecursionSpec& spec,
                                          const Matrix& start, double tol,
                                          int max_iter) {
  RecursionResult out;
  Matrix current = symmetrize(start);
  for (int i = 0; i < max_iter; ++i) {
    Matrix next = spec.step(current);
    out.iterations = i + 1;
    if (!next.allFinite()) {
      out.fixed_point = current;
      return out;
    }
    const double defect = inf_norm(next - current);
    out.trace.push_back(defect);
    out.relative_step = defect / (1.0 + inf_norm(current));
    const bool done = out.relative_step <= tol;
    current = std::move(next);
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.fixed_point = current;
  return out;
}

double kalman_residual(const LqgSystem& sys, const Matrix& sigma) {
  const RecursionSpec spec{sys.F, sys.H, sys.W, sys.V, sys.L};
  return inf_norm(sigma - spec.step(sigma));
}

double lqr_residual(const LqgSystem& sys, const Matrix& E) {
  const RecursionSpec dual{sys.F.transpose(), sys.G.transpose(), sys.Q, sys.R,
                           Matrix::Zero(sys.F.rows(), sys.G.cols())};
  return inf_norm(E - dual.step(E));
}

KalmanSolution solve_kalman(const LqgSystem& sys, const RiccatiOptions& opts) {
  const RecursionSpec spec{sys.F, sys.H, sys.W, sys.V, sys.L};
  RecursionResult run =
      iterate_riccati_recursion(spec, sys.W, opts.tol, opts.max_iter);
  if (!run.converged) {
    throw Error(ErrorCode::kNoConvergence,
                "Kalman Riccati recursion did not converge in " +
                    std::to_string(run.iterations) + " iterations");
  }
  KalmanSolution sol;
  sol.Sigma = run.fixed_point;
  sol.Kp = spec.gain(sol.Sigma, &sol.Psi);
  sol.iterations = run.iterations;
  sol.residual = kalman_residual(sys, sol.Sigma);
  const double rho = spectral_radius(sys.F - sol.Kp * sys.H);
  if (!(rho < 1.0)) {
    throw Error(ErrorCode::kNotStabilizing,
                "Kalman fixed point is not stabilizing (spectral radius of "
                "F - Kp H = " +
                    std::to_string(rho) + ")");
  }
  return sol;
}

double optimal_cost(const LqgSystem& sys, const KalmanSolution& kalman,
                    const Matrix& E) {
  return (kalman.Kp * kalman.Psi * kalman.Kp.transpose() * E).trace() +
         (kalman.Sigma * sys.Q).trace();
}

LqrSolution solve_lqr(const LqgSystem& sys, const KalmanSolution& kalman,
                      const RiccatiOptions& opts) {
  const Eigen::Index r = sys.F.rows();
  const Eigen::Index p = sys.G.cols();
  LqrSolution sol;
  if (sys.Q.isZero(0.0)) {
    sol.E = Matrix::Zero(r, r);
    sol.Klqr = Matrix::Zero(p, r);
    sol.PsiLqr = sys.R;
    sol.Jstar = 0.0;
    sol.closed_loop_stable = spectral_radius(sys.F) < 1.0;
    return sol;
  }
  const PbhResult stab = pbh_stabilizable(sys.F, sys.G);
  if (!stab.holds) {
    throw Error(ErrorCode::kNotStabilizable,
                "(F, G) is not stabilizable: " + describe(stab));
  }
  const RecursionSpec dual{sys.F.transpose(), sys.G.transpose(), sys.Q, sys.R,
                           Matrix::Zero(r, p)};
  RecursionResult run =
      iterate_riccati_recursion(dual, sys.Q, opts.tol, opts.max_iter);
  if (!run.converged) {
    throw Error(ErrorCode::kNoConvergence,
                "LQR Riccati recursion did not converge in " +
                    std::to_string(run.iterations) + " iterations");
  }
  sol.E = run.fixed_point;
  sol.PsiLqr = symmetrize(sys.R + sys.G.transpose() * sol.E * sys.G);
  sol.Klqr = sol.PsiLqr.llt().solve(sys.G.transpose() * sol.E * sys.F);
  sol.Jstar = optimal_cost(sys, kalman, sol.E);
  sol.iterations = run.iterations;
  sol.residual = lqr_residual(sys, sol.E);
  sol.closed_loop_stable = spectral_radius(sys.F - sys.G * sol.Klqr) < 1.0;
  return sol;
}

LqrSolution solve_lqr(const LqgSystem& sys, const RiccatiOptions& opts) {
  return solve_lqr(sys, solve_kalman(sys, opts), opts);
}

}  // namespace icac
