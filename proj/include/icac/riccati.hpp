#pragma once

#include <limits>
#include <vector>

#include "icac/linalg.hpp"
#include "icac/model.hpp"

namespace icac {

inline constexpr double kRiccatiTol = 1e-11;
inline constexpr int kRiccatiMaxIter = 200000;

// Steady-state predictor: Σ = FΣFᵀ + W − K_pΨK_pᵀ, Ψ = HΣHᵀ + V,
// K_p = (FΣHᵀ + L)Ψ⁻¹.
struct KalmanSolution {
  Matrix Sigma;
  Matrix Kp;
  Matrix Psi;
  int iterations = 0;
  double residual = 0.0;
};

// Steady-state regulator: E = FᵀEF + Q − K_LQRᵀΨ_LQR K_LQR,
// Ψ_LQR = R + GᵀEG, K_LQR = Ψ_LQR⁻¹GᵀEF, and the optimal average cost
// 𝒥* = Tr(K_pΨK_pᵀE) + Tr(ΣQ).
struct LqrSolution {
  Matrix E;
  Matrix Klqr;
  Matrix PsiLqr;
  double Jstar = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool closed_loop_stable = false;  // ρ(F − G K_LQR) < 1
};

// One step of the filter-form Riccati recursion
//   Σ' = AΣAᵀ + Wn − (AΣCᵀ + Ln)(CΣCᵀ + Vn)⁻¹(AΣCᵀ + Ln)ᵀ.
// The Kalman predictor uses (F, H, W, V, L); the LQR value recursion is the
// dual (Fᵀ, Gᵀ, Q, R, 0).
struct RecursionSpec {
  Matrix A, C;
  Matrix Wn, Vn, Ln;

  // Throws Error{kSingularInnovation} when CΣCᵀ + Vn is not positive definite.
  Matrix step(const Matrix& sigma) const;
  // Gain (AΣCᵀ + Ln)(CΣCᵀ + Vn)⁻¹ and innovation covariance at Σ.
  Matrix gain(const Matrix& sigma, Matrix* innovation = nullptr) const;
};

struct RecursionResult {
  Matrix fixed_point;
  bool converged = false;
  int iterations = 0;
  // ‖Σ_{i+1} − Σ_i‖∞ per step.
  std::vector<double> trace;
  // Last step scaled as in the stopping rule, ‖Σ_{i+1} − Σ_i‖∞ / (1 + ‖Σ_i‖∞).
  double relative_step = std::numeric_limits<double>::infinity();
};

// Iterates until ‖Σ_{i+1} − Σ_i‖∞ ≤ tol·(1 + ‖Σ_i‖∞) or max_iter steps.
// Non-finite iterates stop the loop with converged = false.
RecursionResult iterate_riccati_recursion(const RecursionSpec& spec,
                                          const Matrix& start, double tol,
                                          int max_iter);

struct RiccatiOptions {
  double tol = kRiccatiTol;
  int max_iter = kRiccatiMaxIter;
};

// Throws Error{kNoConvergence | kNotStabilizing}.
KalmanSolution solve_kalman(const LqgSystem& sys, const RiccatiOptions& opts = {});

// Throws Error{kNoConvergence | kNotStabilizable}. Q = 0 short-circuits to
// E = 0, K_LQR = 0, Ψ_LQR = R.
LqrSolution solve_lqr(const LqgSystem& sys, const KalmanSolution& kalman,
                      const RiccatiOptions& opts = {});
LqrSolution solve_lqr(const LqgSystem& sys, const RiccatiOptions& opts = {});

// Tr(K_pΨK_pᵀE) + Tr(ΣQ)
double optimal_cost(const LqgSystem& sys, const KalmanSolution& kalman,
                    const Matrix& E);

// ‖Σ − (FΣFᵀ + W − K_pΨK_pᵀ)‖∞ with K_p, Ψ re-derived from Σ.
double kalman_residual(const LqgSystem& sys, const Matrix& sigma);
// ‖E − (FᵀEF + Q − K_LQRᵀΨ_LQR K_LQR)‖∞ with the gain re-derived from E.
double lqr_residual(const LqgSystem& sys, const Matrix& E);

}  // namespace icac
