#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "icac/capacity.hpp"
#include "icac/linalg.hpp"
#include "icac/model.hpp"
#include "icac/riccati.hpp"

namespace icac {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The key is
// the user seed; the upper counter words select an independent substream, so
// trial k draws from Philox(seed, stream = k) regardless of scheduling.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

  // One raw block; exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

enum class GainSchedule {
  kSteadyState,  // steady-state K_p and decoder gain throughout
  kTimeVarying,  // filter and decoder Riccati recursions run online
};

inline constexpr double kBlowupNorm = 1e12;

struct SimConfig {
  long horizon = 200000;
  int trials = 10;
  std::uint64_t seed = 1;
  long burn_in = 1000;
  GainSchedule schedule = GainSchedule::kSteadyState;
  int jobs = 1;
  // Optional trajectory dump (CSV); at most trajectory_steps rows per trial.
  std::optional<std::string> trajectory_csv;
  long trajectory_steps = std::numeric_limits<long>::max();
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

struct SimulationReport {
  Estimate empirical_cost;         // filtered-state cost with Tr(ΣQ) correction
  Estimate true_state_cost;        // (1/n) Σ sᵀQs + xᵀRx, for diagnostics
  Estimate empirical_rate_nats;
  double innovation_lag1 = 0.0;    // max |lag-1 correlation| of whitened innovations
  long innovation_samples = 0;     // pooled sample count behind innovation_lag1
  double state_norm_max = 0.0;
  Matrix decoder_error_cov_final;  // pooled sample covariance of ŝ − ŝ̂
  std::vector<double> trial_costs;
  std::vector<double> trial_rates;
};

// Monte Carlo of the coding policy x = −K ŝ̂ + ΓΣ̂†(ŝ − ŝ̂) + m, m ~ N(0, M),
// using solution.policy. Throws Error{kNumericalBlowup} if ‖s‖ > 1e12 and
// Error{kConfig} for an invalid configuration.
SimulationReport run_closed_loop(const LqgSystem& sys,
                                 const KalmanSolution& kalman,
                                 const LqrSolution& lqr,
                                 const CapacitySolution& solution,
                                 const SimConfig& cfg);

// Samples are the columns of `innovations`. Rate = ½(log det Ψ̂_y − log det Ψ)
// with Ψ̂_y the sample covariance; std-error from 10 batch means. Throws
// Error{kTooFewSamples} below 100·l² samples.
Estimate estimate_rate(const Matrix& innovations, const Matrix& psi);

// Filtered-state cost over n = inputs.cols() steps; `states` holds
// ŝ_1 … ŝ_{n+1} as columns. Throws Error{kDimensionMismatch}.
double empirical_cost(const Matrix& states, const Matrix& inputs,
                      const Matrix& Q, const Matrix& R, const Matrix& Sigma);

// Largest absolute entry of the lag-1 correlation matrix of the columns of
// `samples` after whitening by their sample covariance.
double lag1_autocorrelation(const Matrix& samples);

}  // namespace icac
