#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icac/maxdet.hpp"
#include "icac/model.hpp"
#include "icac/riccati.hpp"

namespace icac {

// Eigenvalues of Σ̂ below kRankTol·λ_max are treated as zero in Σ̂†.
inline constexpr double kRankTol = 1e-9;
// Fixed-point certificate tolerance (scaled by 1 + ‖Σ̂‖∞) and recursion cap.
inline constexpr double kTolCert = 1e-6;
inline constexpr int kCertMaxIter = 100000;
// Minimum eigenvalue required of the message covariance M after perturbation.
inline constexpr double kTolPd = 1e-9;
// Largest rate loss (nats) accepted from the positive-definiteness
// perturbation.
inline constexpr double kRateSacrifice = 1e-4;
// Ψ_y with a smaller eigenvalue is reported as a numerical failure.
inline constexpr double kPsiYFloor = 1e-10;

enum class Parameterization {
  kBlockwise,  // variables (Γ, Π, Σ̂) with separate block LMIs
  kJoint,      // single variable Υ = [[Σ̂, Γᵀ], [Γ, Π]]
};

std::string to_string(Parameterization form);

// Ψ_y, K_y and friends for a candidate (Γ, Π, Σ̂).
struct PolicyMatrices {
  Matrix Gamma, Pi, SigmaHat;
  Matrix SigmaHatPinv;
  Matrix M;        // Π − Γ Σ̂† Γᵀ
  Matrix PsiY;     // H Σ̂ Hᵀ + J Π Jᵀ + H Γᵀ Jᵀ + J Γ Hᵀ + Ψ
  Matrix KyPsiY;   // F Σ̂ Hᵀ + F Γᵀ Jᵀ + G Γ Hᵀ + G Π Jᵀ + K_p Ψ
  Matrix Ky;       // KyPsiY · Ψ_y⁻¹
  Matrix Drift;    // F Σ̂ Fᵀ + G Π Gᵀ + G Γ Fᵀ + F Γᵀ Gᵀ + K_p Ψ K_pᵀ
  double rate_nats = 0.0;
};

// The assembled determinant-maximization problem together with the map from
// solver coordinates back to (Γ, Π, Σ̂).
struct CapacityProblem {
  maxdet::MaxdetProblem problem;
  Parameterization form = Parameterization::kBlockwise;
  // Orthonormal basis of the subspace Σ̂ can occupy (reachable subspace of
  // the estimate dynamics); Σ̂ = T Σc Tᵀ.
  Matrix basis;
  // p = 𝒥*: the trace constraint pins Υ[K_LQRᵀ; I] = 0, so Γ = −K_LQR Σ̂ and
  // Π = K_LQR Σ̂ K_LQRᵀ are eliminated.
  bool on_floor = false;
  double budget = 0.0;
  double cost_floor = 0.0;
  double log_det_psi = 0.0;
  Matrix Klqr;
  std::vector<maxdet::VariableId> ids;

  // (Γ, Π, Σ̂) in full coordinates.
  void decode(const Vector& x, Matrix& gamma, Matrix& pi,
              Matrix& sigma_hat) const;
  // Best-effort inverse of decode (projects onto the reduced coordinates).
  Vector encode(const Matrix& gamma, const Matrix& pi,
                const Matrix& sigma_hat) const;
};

// Throws Error{kBudgetBelowFloor} when p < 𝒥* − tol_feas.
CapacityProblem build_capacity_problem(
    const LqgSystem& sys, const KalmanSolution& kalman, const LqrSolution& lqr,
    double p, Parameterization form = Parameterization::kBlockwise);

enum class CapacityStatus { kOptimal, kInfeasible, kNumericalFailure, kMaxIterations };

std::string to_string(CapacityStatus status);

struct CapacitySolution {
  CapacityStatus status = CapacityStatus::kNumericalFailure;
  Matrix Gamma, Pi, SigmaHat;
  Matrix Upsilon;
  Matrix PsiY, Ky, M;
  double capacity_nats = 0.0;
  double budget = 0.0;
  double cost_floor = 0.0;
  // Policy actually used for coding (after the positive-definiteness
  // perturbation when one was applied; otherwise the optimum itself).
  PolicyMatrices policy;
  double duality_gap = 0.0;
  double kkt_residual = 0.0;
  int newton_steps = 0;
  std::string note;
  Vector assignment;  // raw solver coordinates (usable as a warm start)
};

struct CertificateReport {
  double riccati_residual = 0.0;  // ‖fixed-point defect‖∞ / (1 + ‖Σ̂‖∞)
  double range_defect = 0.0;      // ‖Γ (I − Σ̂ Σ̂†)‖∞
  PbhResult detectable_closed_loop;
  bool recursion_converged = false;
  int recursion_iters = 0;
  double recursion_defect = 0.0;  // last relative step of the recursion
  double m_star_min_eig = 0.0;
  std::optional<std::pair<double, double>> perturbation_applied;  // (ε, ε′)
  std::vector<std::string> notes;

  bool certified() const {
    return riccati_residual <= kTolCert && detectable_closed_loop.holds;
  }
};

struct CapacityOptions {
  Parameterization form = Parameterization::kBlockwise;
  maxdet::Options solver;
  bool perturb = true;
  bool run_certificates = true;
};

struct CapacityResult {
  CapacitySolution solution;
  CertificateReport certificates;
  AssumptionReport assumptions;
  KalmanSolution kalman;
  LqrSolution lqr;
};

// Validated system with its assumption report and Riccati solutions.
struct PreparedSystem {
  LqgSystem sys;
  AssumptionReport assumptions;
  KalmanSolution kalman;
  LqrSolution lqr;
};

// Throws Error{kAssumptionViolation} with the failing PBH witnesses, plus
// the validation and Riccati errors.
PreparedSystem prepare_system(const LqgSystem& sys);

// Validates the system, checks the standing assumptions (throws
// Error{kAssumptionViolation}), solves the filter/regulator Riccati
// equations, the capacity program, and evaluates certificates. Throws
// Error{kBudgetBelowFloor} for p < 𝒥*.
CapacityResult compute_capacity(const LqgSystem& sys, double p,
                                const CapacityOptions& options = {});

// Same pipeline with precomputed filter/regulator solutions.
CapacityResult compute_capacity(const LqgSystem& sys,
                                const KalmanSolution& kalman,
                                const LqrSolution& lqr, double p,
                                const CapacityOptions& options);

PolicyMatrices policy_matrices(const LqgSystem& sys,
                               const KalmanSolution& kalman,
                               const Matrix& gamma, const Matrix& pi,
                               const Matrix& sigma_hat);

// Σ̂ − (Drift − K_y Ψ_y K_yᵀ), the fixed-point defect at a candidate point.
Matrix fixed_point_defect(const PolicyMatrices& pm);

// Decoder-error recursion of the coding policy (filter form):
// A = F + GΓΣ̂†, C = H + JΓΣ̂†, process noise GMGᵀ + K_pΨK_pᵀ, measurement
// noise JMJᵀ + Ψ, cross term GMJᵀ + K_pΨ.
RecursionSpec decoder_recursion(const LqgSystem& sys,
                                const KalmanSolution& kalman,
                                const PolicyMatrices& pm);

struct SweepPoint {
  double p = 0.0;
  std::optional<double> capacity_nats;  // none when infeasible/failed
  bool certified = false;
  std::string status;
};

struct SweepOptions {
  CapacityOptions capacity;
  bool warm_start = true;
  int jobs = 1;  // > 1 implies cold starts
};

// p_values must be ascending. Per-point failures are recorded, not thrown.
std::vector<SweepPoint> capacity_sweep(const LqgSystem& sys,
                                       const std::vector<double>& p_values,
                                       const SweepOptions& options = {});

struct EquivalenceReport {
  double blockwise_nats = 0.0;
  double joint_nats = 0.0;
  double delta = 0.0;
};

// Solves both parameterizations independently.
EquivalenceReport verify_equivalence(const LqgSystem& sys, double p,
                                     const CapacityOptions& options = {});

}  // namespace icac
