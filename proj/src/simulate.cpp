#include "icac/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "icac/errors.hpp"

namespace icac {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;
constexpr int kBatches = 10;

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
             std::uint32_t& lo) {
  const std::uint64_t prod = std::uint64_t{a} * std::uint64_t{b};
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

// Mean and standard error of the mean from equal-size batch means.
Estimate batch_means(const std::vector<double>& values) {
  const std::size_t size = values.size() / kBatches;
  Estimate est;
  if (size == 0) return est;
  std::vector<double> means(kBatches, 0.0);
  for (int b = 0; b < kBatches; ++b) {
    for (std::size_t i = 0; i < size; ++i) means[b] += values[b * size + i];
    means[b] /= static_cast<double>(size);
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= kBatches;
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= kBatches - 1;
  est.mean = mean;
  est.std_error = std::sqrt(var / kBatches);
  return est;
}

Estimate across_trials(const std::vector<double>& values) {
  Estimate est;
  const double n = static_cast<double>(values.size());
  for (double v : values) est.mean += v;
  est.mean /= n;
  if (values.size() < 2) return est;
  double var = 0.0;
  for (double v : values) var += (v - est.mean) * (v - est.mean);
  est.std_error = std::sqrt(var / (n - 1.0) / n);
  return est;
}

double log_det_sample_cov(const Matrix& cov, const char* what) {
  const auto ld = log_det_pd(symmetrize(cov));
  if (!ld) {
    throw Error(ErrorCode::kNumericalFailure,
                std::string(what) + " sample covariance is singular");
  }
  return *ld;
}

struct TrialResult {
  double cost = 0.0;
  double true_cost = 0.0;
  Estimate rate;
  std::vector<double> stage_costs;       // for single-trial error bars
  std::vector<double> true_stage_costs;
  Matrix innov_s0, innov_s1;             // Σ νᵢνᵢᵀ and Σ νᵢ₊₁νᵢᵀ
  std::vector<Matrix> batch_s0;          // Σ νᵢνᵢᵀ per batch
  std::vector<long> batch_count;
  long innov_count = 0;
  Matrix err_s0;                         // Σ δᵢδᵢᵀ, δ = ŝ − ŝ̂
  double state_norm_max = 0.0;
  std::string trajectory;
};

class Normal {
 public:
  Normal(std::uint64_t seed, std::uint64_t stream) : gen_(seed, stream) {}
  Vector draw(Eigen::Index n) {
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = dist_(gen_);
    return z;
  }

 private:
  Philox4x32 gen_;
  std::normal_distribution<double> dist_;
};

void append_row(std::ostringstream& os, long step, int trial,
                std::initializer_list<const Vector*> parts) {
  os << step << ',' << trial;
  for (const Vector* v : parts) {
    for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << (*v)(i);
  }
  os << '\n';
}

std::string trajectory_header(const Dimensions& d) {
  std::ostringstream os;
  os << "step,trial";
  auto cols = [&](const char* name, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << name << '_' << i;
  };
  cols("s", d.states);
  cols("shat", d.states);
  cols("shathat", d.states);
  cols("x", d.inputs);
  cols("y", d.outputs);
  os << '\n';
  return os.str();
}

struct Plan {
  const LqgSystem* sys;
  const KalmanSolution* kalman;
  Matrix K;               // K_LQR
  Matrix feedback;        // ΓΣ̂†
  Matrix msg_sqrt;        // M^{1/2}
  Matrix noise_sqrt;      // [[W, L], [Lᵀ, V]]^{1/2}
  Matrix sigma_sqrt;      // Σ^{1/2}
  Matrix init_sqrt;       // (steady decoder error covariance)^{1/2}
  Matrix Ky;              // steady decoder gain
  RecursionSpec decoder;  // for the time-varying schedule
  Matrix decoder_start;
  Matrix y_map;           // H − J K
  Matrix x_map;           // F − G K
};

TrialResult run_trial(const Plan& plan, const SimConfig& cfg, int trial) {
  const LqgSystem& sys = *plan.sys;
  const KalmanSolution& kalman = *plan.kalman;
  const Dimensions d = sys.dims();
  const Eigen::Index r = d.states, l = d.outputs;
  const bool time_varying = cfg.schedule == GainSchedule::kTimeVarying;
  Normal rng(cfg.seed, static_cast<std::uint64_t>(trial));

  TrialResult out;
  const long n = cfg.horizon - cfg.burn_in;
  out.stage_costs.reserve(n);
  out.true_stage_costs.reserve(n);
  out.innov_s0 = Matrix::Zero(l, l);
  out.innov_s1 = Matrix::Zero(l, l);
  out.err_s0 = Matrix::Zero(r, r);
  out.batch_s0.assign(kBatches, Matrix::Zero(l, l));
  out.batch_count.assign(kBatches, 0);
  const long batch_size = n / kBatches;

  Vector s, shat, shathat = Vector::Zero(r);
  Matrix enc_cov, dec_cov;
  RecursionSpec encoder{sys.F, sys.H, sys.W, sys.V, sys.L};
  if (time_varying) {
    shat = Vector::Zero(r);
    s = psd_sqrt(sys.Sigma1) * rng.draw(r);
    enc_cov = sys.Sigma1;
    dec_cov = plan.decoder_start;
  } else {
    shat = plan.init_sqrt * rng.draw(r);
    s = shat + plan.sigma_sqrt * rng.draw(r);
  }

  std::ostringstream traj;
  traj << std::setprecision(17) << std::scientific;
  Vector prev_innov;
  double cost_sum = 0.0, true_sum = 0.0;
  for (long i = 1; i <= cfg.horizon; ++i) {
    const Vector noise = plan.noise_sqrt * rng.draw(r + l);
    const Vector m = plan.msg_sqrt * rng.draw(plan.msg_sqrt.cols());
    const Vector x = -plan.K * shathat + plan.feedback * (shat - shathat) + m;
    const Vector y = sys.H * s + sys.J * x + noise.tail(l);

    Matrix kp = kalman.Kp;
    if (time_varying) kp = encoder.gain(enc_cov);
    Matrix ky = plan.Ky;
    if (time_varying) ky = plan.decoder.gain(dec_cov);

    const Vector e = y - sys.J * x - sys.H * shat;
    const Vector nu = y - plan.y_map * shathat;

    if (i <= cfg.trajectory_steps && cfg.trajectory_csv) {
      append_row(traj, i, trial, {&s, &shat, &shathat, &x, &y});
    }
    if (i > cfg.burn_in) {
      const double stage = shat.dot(sys.Q * shat) + x.dot(sys.R * x);
      const double true_stage = s.dot(sys.Q * s) + x.dot(sys.R * x);
      out.stage_costs.push_back(stage);
      out.true_stage_costs.push_back(true_stage);
      cost_sum += stage;
      true_sum += true_stage;
      const Matrix outer = nu * nu.transpose();
      out.innov_s0 += outer;
      const long b = std::min<long>((i - cfg.burn_in - 1) / batch_size,
                                    kBatches - 1);
      out.batch_s0[b] += outer;
      ++out.batch_count[b];
      if (prev_innov.size() > 0) out.innov_s1 += nu * prev_innov.transpose();
      prev_innov = nu;
      ++out.innov_count;
      const Vector delta = shat - shathat;
      out.err_s0 += delta * delta.transpose();
    }

    s = sys.F * s + sys.G * x + noise.head(r);
    shat = sys.F * shat + sys.G * x + kp * e;
    shathat = plan.x_map * shathat + ky * nu;
    if (time_varying) {
      enc_cov = encoder.step(enc_cov);
      dec_cov = plan.decoder.step(dec_cov);
    }

    const double norm = s.norm();
    if (!std::isfinite(norm) || norm > kBlowupNorm) {
      throw Error(ErrorCode::kNumericalBlowup,
                  "state norm exceeded 1e12 at step " + std::to_string(i) +
                      " of trial " + std::to_string(trial));
    }
    if (i > cfg.burn_in) {
      out.state_norm_max = std::max(out.state_norm_max, norm);
    }
  }

  const double nd = static_cast<double>(n);
  const double terminal = shat.dot(sys.Q * shat);
  const double trace_sq = (kalman.Sigma * sys.Q).trace();
  out.cost = (cost_sum + terminal) / nd + (nd + 1.0) / nd * trace_sq;
  out.true_cost = true_sum / nd;
  for (double& c : out.stage_costs) c += trace_sq;

  const double ld_psi = log_det_sample_cov(kalman.Psi, "encoder innovation");
  std::vector<double> batch_rates;
  for (int b = 0; b < kBatches; ++b) {
    const Matrix cov = out.batch_s0[b] / static_cast<double>(out.batch_count[b]);
    batch_rates.push_back(
        0.5 * (log_det_sample_cov(cov, "decoder innovation") - ld_psi));
  }
  out.rate = across_trials(batch_rates);
  out.rate.mean =
      0.5 * (log_det_sample_cov(out.innov_s0 / nd, "decoder innovation") - ld_psi);
  out.trajectory = traj.str();
  return out;
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed),
           static_cast<std::uint32_t>(seed >> 32)},
      counter_{0u, 0u, static_cast<std::uint32_t>(stream),
               static_cast<std::uint32_t>(stream >> 32)} {}

std::array<std::uint32_t, 4> Philox4x32::block(
    std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

Philox4x32::result_type Philox4x32::operator()() {
  if (used_ == 4) {
    buffer_ = block(counter_, key_);
    if (++counter_[0] == 0) ++counter_[1];
    used_ = 0;
  }
  return buffer_[used_++];
}

Estimate estimate_rate(const Matrix& innovations, const Matrix& psi) {
  const Eigen::Index l = innovations.rows();
  if (psi.rows() != l || psi.cols() != l) {
    throw Error(ErrorCode::kDimensionMismatch,
                "innovation samples and Ψ disagree in dimension");
  }
  const Eigen::Index count = innovations.cols();
  if (count < 100 * l * l || count < kBatches) {
    throw Error(ErrorCode::kTooFewSamples,
                std::to_string(count) + " innovation samples, need at least " +
                    std::to_string(std::max<Eigen::Index>(100 * l * l, kBatches)));
  }
  const auto ld_psi = log_det_pd(symmetrize(psi));
  if (!ld_psi) throw Error(ErrorCode::kNotPd, "Ψ is not positive definite");

  auto rate_of = [&](Eigen::Index begin, Eigen::Index size) {
    const auto block = innovations.middleCols(begin, size);
    const Matrix cov = block * block.transpose() / static_cast<double>(size);
    return 0.5 * (log_det_sample_cov(cov, "innovation") - *ld_psi);
  };
  const Eigen::Index size = count / kBatches;
  std::vector<double> rates;
  for (int b = 0; b < kBatches; ++b) rates.push_back(rate_of(b * size, size));
  Estimate est = across_trials(rates);
  est.mean = rate_of(0, count);
  return est;
}

double empirical_cost(const Matrix& states, const Matrix& inputs,
                      const Matrix& Q, const Matrix& R, const Matrix& Sigma) {
  const Eigen::Index n = inputs.cols();
  if (n == 0 || states.cols() != n + 1 || Q.rows() != states.rows() ||
      Q.cols() != states.rows() || R.rows() != inputs.rows() ||
      R.cols() != inputs.rows() || Sigma.rows() != Q.rows() ||
      Sigma.cols() != Q.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cost needs n+1 state columns, n input columns and matching "
                "weights");
  }
  const double nd = static_cast<double>(n);
  double sum = states.col(n).dot(Q * states.col(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    sum += states.col(i).dot(Q * states.col(i)) +
           inputs.col(i).dot(R * inputs.col(i));
  }
  return sum / nd + (nd + 1.0) / nd * (Sigma * Q).trace();
}

double lag1_autocorrelation(const Matrix& samples) {
  const Eigen::Index n = samples.cols();
  if (n < 2) {
    throw Error(ErrorCode::kTooFewSamples, "lag-1 correlation needs 2 samples");
  }
  const Matrix c0 = samples * samples.transpose() / static_cast<double>(n);
  const Matrix c1 = samples.rightCols(n - 1) *
                    samples.leftCols(n - 1).transpose() /
                    static_cast<double>(n - 1);
  Eigen::LLT<Matrix> llt(symmetrize(c0));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumericalFailure, "samples are degenerate");
  }
  const Matrix left = llt.matrixL().solve(c1);
  const Matrix white = llt.matrixL().solve(left.transpose()).transpose();
  return white.cwiseAbs().maxCoeff();
}

SimulationReport run_closed_loop(const LqgSystem& sys,
                                 const KalmanSolution& kalman,
                                 const LqrSolution& lqr,
                                 const CapacitySolution& solution,
                                 const SimConfig& cfg) {
  if (cfg.trials < 1 || cfg.burn_in < 0 || cfg.horizon <= cfg.burn_in) {
    throw Error(ErrorCode::kConfig,
                "need trials >= 1 and horizon > burn_in >= 0");
  }
  const Dimensions d = sys.dims();
  const PolicyMatrices& pm = solution.policy;
  if (pm.Gamma.rows() != d.inputs || pm.Gamma.cols() != d.states ||
      pm.M.rows() != d.inputs || pm.SigmaHat.rows() != d.states) {
    throw Error(ErrorCode::kDimensionMismatch,
                "policy matrices do not match the system");
  }
  if (min_eigenvalue(pm.M) < -kPsdTol * (1.0 + spectral_norm(pm.M))) {
    throw Error(ErrorCode::kNotPsd, "message covariance M is not PSD");
  }
  const long n = cfg.horizon - cfg.burn_in;
  if (n < 100 * d.outputs * d.outputs || n < kBatches) {
    throw Error(ErrorCode::kTooFewSamples,
                "post-burn-in horizon too short for the rate estimate");
  }

  Plan plan;
  plan.sys = &sys;
  plan.kalman = &kalman;
  plan.K = lqr.Klqr;
  plan.feedback = pm.Gamma * pm.SigmaHatPinv;
  plan.msg_sqrt = psd_sqrt(pm.M);
  Matrix joint(d.states + d.outputs, d.states + d.outputs);
  joint << sys.W, sys.L, sys.L.transpose(), sys.V;
  plan.noise_sqrt = psd_sqrt(symmetrize(joint));
  plan.sigma_sqrt = psd_sqrt(kalman.Sigma);
  plan.decoder = decoder_recursion(sys, kalman, pm);
  plan.decoder_start = pm.SigmaHat;
  const RecursionResult steady = iterate_riccati_recursion(
      plan.decoder, pm.SigmaHat, kRiccatiTol, kCertMaxIter);
  const Matrix steady_cov = steady.converged ? steady.fixed_point : pm.SigmaHat;
  plan.Ky = steady.converged ? plan.decoder.gain(steady_cov) : pm.Ky;
  plan.init_sqrt = psd_sqrt(steady_cov);
  plan.y_map = sys.H - sys.J * lqr.Klqr;
  plan.x_map = sys.F - sys.G * lqr.Klqr;

  std::vector<TrialResult> results(cfg.trials);
  const int jobs = std::clamp(cfg.jobs, 1, cfg.trials);
  if (jobs == 1) {
    for (int t = 0; t < cfg.trials; ++t) results[t] = run_trial(plan, cfg, t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (int t = next++; t < cfg.trials; t = next++) {
            results[t] = run_trial(plan, cfg, t);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : workers) th.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  SimulationReport rep;
  Matrix s0 = Matrix::Zero(d.outputs, d.outputs);
  Matrix s1 = Matrix::Zero(d.outputs, d.outputs);
  Matrix e0 = Matrix::Zero(d.states, d.states);
  long count = 0, lagged = 0;
  std::vector<double> true_costs;
  for (const TrialResult& tr : results) {
    rep.trial_costs.push_back(tr.cost);
    rep.trial_rates.push_back(tr.rate.mean);
    true_costs.push_back(tr.true_cost);
    rep.state_norm_max = std::max(rep.state_norm_max, tr.state_norm_max);
    s0 += tr.innov_s0;
    s1 += tr.innov_s1;
    e0 += tr.err_s0;
    count += tr.innov_count;
    lagged += tr.innov_count - 1;
  }
  if (cfg.trials >= 2) {
    rep.empirical_cost = across_trials(rep.trial_costs);
    rep.true_state_cost = across_trials(true_costs);
    rep.empirical_rate_nats = across_trials(rep.trial_rates);
  } else {
    const TrialResult& only = results.front();
    rep.empirical_cost = {only.cost, batch_means(only.stage_costs).std_error};
    rep.true_state_cost = {only.true_cost,
                           batch_means(only.true_stage_costs).std_error};
    rep.empirical_rate_nats = only.rate;
  }
  rep.innovation_samples = count;
  const Matrix c0 = symmetrize(s0 / static_cast<double>(count));
  const Matrix c1 = s1 / static_cast<double>(std::max(1L, lagged));
  Eigen::LLT<Matrix> llt(c0);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumericalFailure,
                "decoder innovation covariance is singular");
  }
  const Matrix left = llt.matrixL().solve(c1);
  rep.innovation_lag1 =
      llt.matrixL().solve(left.transpose()).transpose().cwiseAbs().maxCoeff();
  rep.decoder_error_cov_final = symmetrize(e0 / static_cast<double>(count));

  if (cfg.trajectory_csv) {
    std::ofstream os(*cfg.trajectory_csv);
    if (!os) {
      throw Error(ErrorCode::kConfig,
                  "cannot write trajectory file " + *cfg.trajectory_csv);
    }
    os << trajectory_header(d);
    for (const TrialResult& tr : results) os << tr.trajectory;
  }
  return rep;
}

}  // namespace icac
