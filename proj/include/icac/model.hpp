#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icac/linalg.hpp"

namespace icac {

// Eigenvalues with |λ| ≥ 1 − kUnitCircleTol count as unstable in PBH tests.
inline constexpr double kUnitCircleTol = 1e-9;

// Relative slack allowed on the smallest eigenvalue of PSD inputs:
// λ_min ≥ −kPsdTol·(1 + ‖M‖₂).
inline constexpr double kPsdTol = 1e-10;

// Relative asymmetry tolerated before a covariance/weight is rejected.
inline constexpr double kSymmetryTol = 1e-8;

struct Dimensions {
  Eigen::Index states = 0;   // r
  Eigen::Index inputs = 0;   // p
  Eigen::Index outputs = 0;  // l
};

// Discrete-time LQG plant
//   s_{i+1} = F s_i + G x_i + w_i
//   y_i     = H s_i + J x_i + v_i
// with E[w wᵀ] = W, E[v vᵀ] = V, E[w vᵀ] = L, s_1 ~ N(0, Sigma1), and LQR
// weights Q (state) and R (input).
struct LqgSystem {
  Matrix F, G, H, J;
  Matrix W, V, L;
  Matrix Sigma1;
  Matrix Q, R;

  Dimensions dims() const {
    return {F.rows(), G.cols(), H.rows()};
  }
};

// Returns a normalized copy: symmetric parts enforced on W, V, Q, R, Sigma1
// (tiny negative eigenvalues clipped), empty L/Sigma1 replaced by zeros.
// Throws Error{kDimensionMismatch | kNotPsd | kNotPd}.
LqgSystem validate_system(const LqgSystem& sys);

struct PbhWitness {
  std::complex<double> eigenvalue;
  // Right eigenvector for detectability, left eigenvector otherwise.
  Eigen::VectorXcd vector;
};

struct PbhResult {
  bool holds = true;
  std::optional<PbhWitness> witness;
};

// (A, C) detectable: rank [A − λI; C] = n for every |λ| ≥ 1 − tol.
PbhResult pbh_detectable(const Matrix& a, const Matrix& c,
                         double tol = kUnitCircleTol);

// (A, B) stabilizable: rank [A − λI, B] = n for every |λ| ≥ 1 − tol.
PbhResult pbh_stabilizable(const Matrix& a, const Matrix& b,
                           double tol = kUnitCircleTol);

// (A, B) controllable on the unit circle: rank [A − λI, B] = n for every
// eigenvalue with ||λ| − 1| ≤ tol.
PbhResult pbh_unit_circle_controllable(const Matrix& a, const Matrix& b,
                                       double tol = kUnitCircleTol);

struct AssumptionReport {
  PbhResult detectable_FH;
  PbhResult stabilizable_FG;
  PbhResult unit_circle_controllable;
  std::vector<std::string> notes;

  // Everything the Kalman filter needs (detectability + unit-circle
  // controllability of the noise-decorrelated pair).
  bool filter_ok() const {
    return detectable_FH.holds && unit_circle_controllable.holds;
  }
};

AssumptionReport check_assumptions(const LqgSystem& sys);

// Gaussian channel in state-space form, with ISI when G ≠ 0.
struct IsiChannel {
  Matrix F, G, H, J;
  Matrix W, V, L;
};

// Embeds a channel as an LQG system with Q = 0 and R = I, so that an LQR
// budget p is an average transmit-power constraint Tr E[x xᵀ] ≤ p.
LqgSystem from_isi_channel(const IsiChannel& channel);

// Human-readable one-line description of a PBH failure, for reports.
std::string describe(const PbhResult& result);

}  // namespace icac
