#include "icac/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "icac/capacity.hpp"
#include "icac/simulate.hpp"
#include "icac/system_io.hpp"

#ifndef ICAC_VERSION
#define ICAC_VERSION "dev"
#endif

namespace icac::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNatsPerBit = 0.69314718055994530942;

struct CommonArgs {
  std::string config;
  double p = std::numeric_limits<double>::quiet_NaN();
  std::string p_mode = "fixed";
  bool bits = false;
  std::string out_dir;
  double tol_gap = maxdet::kTolGap;
  bool uncertified_ok = false;
  int jobs = 1;
};

struct SimArgs {
  std::uint64_t seed = 1;
  long horizon = 200000;
  int trials = 10;
  long burn_in = 1000;
  std::string schedule = "steady";
  bool trajectory = false;
  long trajectory_steps = 1000;
};

// Collects output files and writes the manifest next to each of them.
class Manifest {
 public:
  Manifest(std::string command, const CommonArgs& common,
           std::vector<std::string> argv)
      : command_(std::move(command)),
        config_(common.config),
        argv_(std::move(argv)),
        start_(std::chrono::steady_clock::now()) {}

  void set(const std::string& key, json value) { params_[key] = std::move(value); }

  // Writes `text` to <out_dir>/<name> followed by its manifest.
  std::string write(const std::string& out_dir, const std::string& name,
                    const std::string& text) {
    fs::create_directories(out_dir);
    const fs::path path = fs::path(out_dir) / name;
    write_file(path, text);
    outputs_.push_back(path.string());
    return path.string();
  }

  void record(const std::string& path) { outputs_.push_back(path); }

  void finish() const {
    const double wall = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start_)
                            .count();
    json doc = {{"command", command_},
                {"config_path", config_},
                {"parameters", params_},
                {"output_paths", outputs_},
                {"tool_version", ICAC_VERSION},
                {"wall_time_seconds", wall},
                {"argv", argv_}};
    for (const std::string& out : outputs_) {
      write_file(out + ".manifest.json", doc.dump(2) + "\n");
    }
  }

 private:
  static void write_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
      throw Error(ErrorCode::kConfig, "cannot write " + path.string());
    }
    os << text;
  }

  std::string command_;
  std::string config_;
  std::vector<std::string> argv_;
  std::chrono::steady_clock::time_point start_;
  json params_ = json::object();
  std::vector<std::string> outputs_;
};

void add_common(CLI::App* sub, CommonArgs& a, bool needs_p) {
  sub->add_option("config", a.config, "system JSON file")->required();
  sub->add_option("--p", a.p, needs_p ? "LQR cost budget" : "fixed budget");
  sub->add_option("--p-mode", a.p_mode,
                  "fixed | jstar-plus:<delta> (budget = J* + delta)");
  sub->add_flag("--bits", a.bits, "report rates in bits");
  sub->add_option("--out", a.out_dir, "directory for result files");
  sub->add_option("--tol-gap", a.tol_gap, "solver duality-gap tolerance")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--uncertified-ok", a.uncertified_ok,
                "accept solutions whose certificates fail");
  sub->add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber);
}

CapacityOptions capacity_options(const CommonArgs& a) {
  CapacityOptions opts;
  opts.solver.tol_gap = a.tol_gap;
  return opts;
}

double resolve_budget(const CommonArgs& a, double jstar) {
  const BudgetMode mode = parse_budget_mode(a.p_mode);
  if (!mode.relative && std::isnan(a.p)) {
    throw Error(ErrorCode::kConfig, "--p is required with --p-mode fixed");
  }
  return mode.resolve(a.p, jstar);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string rate_text(double nats, bool bits) {
  return bits ? fmt(nats / kNatsPerBit) + " bits" : fmt(nats) + " nats";
}

int status_exit(CapacityStatus status) {
  switch (status) {
    case CapacityStatus::kOptimal: return kExitOk;
    case CapacityStatus::kInfeasible: return kExitInfeasible;
    default: return kExitSolver;
  }
}

json certificates_json(const CertificateReport& c) {
  json doc = {{"certified", c.certified()},
              {"riccati_residual", c.riccati_residual},
              {"range_defect", c.range_defect},
              {"closed_loop_detectable", c.detectable_closed_loop.holds},
              {"closed_loop_witness", describe(c.detectable_closed_loop)},
              {"recursion_converged", c.recursion_converged},
              {"recursion_iterations", c.recursion_iters},
              {"recursion_defect", c.recursion_defect},
              {"m_min_eigenvalue", c.m_star_min_eig},
              {"notes", c.notes}};
  if (c.perturbation_applied) {
    doc["perturbation"] = {{"epsilon", c.perturbation_applied->first},
                           {"epsilon_prime", c.perturbation_applied->second}};
  } else {
    doc["perturbation"] = nullptr;
  }
  return doc;
}

json capacity_json(const CapacityResult& r) {
  const CapacitySolution& s = r.solution;
  json doc = {{"status", to_string(s.status)},
              {"Jstar", r.lqr.Jstar},
              {"budget", s.budget},
              {"capacity_nats", s.capacity_nats},
              {"capacity_bits", s.capacity_nats / kNatsPerBit},
              {"duality_gap", s.duality_gap},
              {"kkt_residual", s.kkt_residual},
              {"newton_steps", s.newton_steps},
              {"note", s.note},
              {"certificates", certificates_json(r.certificates)}};
  if (s.status != CapacityStatus::kInfeasible && s.Gamma.size() > 0) {
    doc["Gamma"] = matrix_to_json(s.Gamma);
    doc["Pi"] = matrix_to_json(s.Pi);
    doc["SigmaHat"] = matrix_to_json(s.SigmaHat);
    doc["M"] = matrix_to_json(s.M);
    doc["PsiY"] = matrix_to_json(s.PsiY);
    doc["Ky"] = matrix_to_json(s.Ky);
  }
  return doc;
}

void print_certificates(std::ostream& out, const CertificateReport& c) {
  out << "certificates: " << (c.certified() ? "pass" : "FAIL") << "\n"
      << "  fixed-point residual   " << fmt(c.riccati_residual) << "\n"
      << "  closed loop detectable " << (c.detectable_closed_loop.holds ? "yes" : "no");
  if (!c.detectable_closed_loop.holds) {
    out << " (" << describe(c.detectable_closed_loop) << ")";
  }
  out << "\n  decoder recursion      "
      << (c.recursion_converged ? "converged" : "did not converge") << " in "
      << c.recursion_iters << " iterations\n"
      << "  min eig M              " << fmt(c.m_star_min_eig) << "\n";
  for (const std::string& note : c.notes) out << "  note: " << note << "\n";
}

// Infeasible budgets are reported with 𝒥* rather than thrown.
int infeasible(std::ostream& err, double p, double jstar) {
  err << "infeasible: budget p = " << fmt(p) << " is below J* = " << fmt(jstar)
      << "\n";
  return kExitInfeasible;
}

int cmd_capacity(const CommonArgs& a, const std::vector<std::string>& argv,
                 std::ostream& out, std::ostream& err) {
  Manifest manifest("capacity", a, argv);
  const PreparedSystem prep = prepare_system(load_system_file(a.config));
  const double jstar = prep.lqr.Jstar;
  const double p = resolve_budget(a, jstar);
  manifest.set("p", p);
  manifest.set("p_mode", a.p_mode);
  manifest.set("tol_gap", a.tol_gap);
  out << "J* = " << fmt(jstar) << "\np = " << fmt(p) << "\n";
  if (p < jstar - maxdet::kTolFeas) return infeasible(err, p, jstar);

  CapacityResult res =
      compute_capacity(prep.sys, prep.kalman, prep.lqr, p, capacity_options(a));
  res.assumptions = prep.assumptions;
  const CapacitySolution& s = res.solution;
  out << "status = " << to_string(s.status) << "\n";
  if (a.bits) {
    out << "capacity_bits = " << fmt(s.capacity_nats / kNatsPerBit) << "\n";
  } else {
    out << "capacity_nats = " << fmt(s.capacity_nats) << "\n";
  }
  print_certificates(out, res.certificates);
  if (!a.out_dir.empty()) {
    manifest.write(a.out_dir, "capacity.json", capacity_json(res).dump(2) + "\n");
    manifest.finish();
  }
  if (s.status == CapacityStatus::kInfeasible) return infeasible(err, p, jstar);
  if (s.status != CapacityStatus::kOptimal) {
    err << "solver failure: " << s.note << "\n";
  }
  return status_exit(s.status);
}

struct SweepRow {
  double value = 0.0;
  std::optional<double> jstar;
  double p_used = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> capacity;
  bool certified = false;
  std::string status;
};

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  const char* eol = "\r\n";
  os << "sweep_value,Jstar,p_used,capacity_nats,capacity_bits,certified,status"
     << eol;
  for (const SweepRow& row : rows) {
    os << csv_number(row.value) << ','
       << (row.jstar ? csv_number(*row.jstar) : "") << ','
       << (std::isnan(row.p_used) ? "" : csv_number(row.p_used)) << ','
       << (row.capacity ? csv_number(*row.capacity) : "") << ','
       << (row.capacity ? csv_number(*row.capacity / kNatsPerBit) : "") << ','
       << (row.certified ? "true" : "false") << ',' << csv_field(row.status)
       << eol;
  }
  return os.str();
}

SweepRow sweep_parameter_point(const LqgSystem& base, const CommonArgs& a,
                               const GridSpec& grid, double value) {
  SweepRow row;
  row.value = value;
  try {
    const PreparedSystem prep =
        prepare_system(with_parameter(base, grid.param, value));
    row.jstar = prep.lqr.Jstar;
    row.p_used = resolve_budget(a, prep.lqr.Jstar);
    const CapacityResult res = compute_capacity(
        prep.sys, prep.kalman, prep.lqr, row.p_used, capacity_options(a));
    row.status = to_string(res.solution.status);
    if (res.solution.status == CapacityStatus::kOptimal) {
      row.capacity = res.solution.capacity_nats;
      row.certified = res.certificates.certified();
    }
  } catch (const Error& e) {
    row.status = e.code() == ErrorCode::kBudgetBelowFloor
                     ? to_string(CapacityStatus::kInfeasible)
                     : std::string(to_string(e.code()));
  }
  return row;
}

int cmd_sweep(const CommonArgs& a, const std::string& grid_text,
              const std::vector<std::string>& argv, std::ostream& out,
              std::ostream& err) {
  Manifest manifest("sweep", a, argv);
  const GridSpec grid = parse_grid(grid_text);
  const BudgetMode mode = parse_budget_mode(a.p_mode);
  const std::vector<double> values = grid.values();
  manifest.set("grid", grid_text);
  manifest.set("p_mode", a.p_mode);
  if (!std::isnan(a.p)) manifest.set("p", a.p);
  manifest.set("tol_gap", a.tol_gap);
  manifest.set("jobs", a.jobs);

  const LqgSystem base = load_system_file(a.config);
  std::vector<SweepRow> rows(values.size());
  if (grid.param == "p") {
    const PreparedSystem prep = prepare_system(base);
    const double offset = mode.relative ? prep.lqr.Jstar + mode.delta : 0.0;
    std::vector<double> budgets;
    for (double v : values) budgets.push_back(offset + v);
    SweepOptions opts;
    opts.capacity = capacity_options(a);
    opts.jobs = a.jobs;
    opts.warm_start = a.jobs == 1;
    const std::vector<SweepPoint> pts = capacity_sweep(base, budgets, opts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      rows[i] = {values[i], prep.lqr.Jstar, pts[i].p, pts[i].capacity_nats,
                 pts[i].certified, pts[i].status};
    }
  } else {
    if (!mode.relative && std::isnan(a.p)) {
      throw Error(ErrorCode::kConfig, "--p is required with --p-mode fixed");
    }
    const int jobs = std::max(1, std::min<int>(a.jobs, values.size()));
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < values.size(); i += jobs) {
          rows[i] = sweep_parameter_point(base, a, grid, values[i]);
        }
      });
    }
    for (auto& t : workers) t.join();
  }

  const std::string csv = sweep_csv(rows);
  if (a.out_dir.empty()) {
    out << csv;
  } else {
    const std::string path = manifest.write(a.out_dir, "sweep.csv", csv);
    manifest.finish();
    out << "wrote " << path << "\n";
  }
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) {
    return !r.capacity.has_value();
  });
  if (failed > 0) err << failed << " of " << rows.size() << " points failed\n";
  return kExitOk;
}

int cmd_verify(const CommonArgs& a, const std::vector<std::string>& argv,
               std::ostream& out, std::ostream& err) {
  Manifest manifest("verify", a, argv);
  const PreparedSystem prep = prepare_system(load_system_file(a.config));
  const double jstar = prep.lqr.Jstar;
  const double p = resolve_budget(a, jstar);
  manifest.set("p", p);
  manifest.set("p_mode", a.p_mode);
  manifest.set("tol_gap", a.tol_gap);
  if (p < jstar - maxdet::kTolFeas) return infeasible(err, p, jstar);

  const CapacityOptions opts = capacity_options(a);
  const CapacityResult res =
      compute_capacity(prep.sys, prep.kalman, prep.lqr, p, opts);
  if (res.solution.status != CapacityStatus::kOptimal) {
    err << "capacity solve ended with status " << to_string(res.solution.status)
        << " " << res.solution.note << "\n";
    return status_exit(res.solution.status);
  }
  const EquivalenceReport eq = verify_equivalence(prep.sys, p, opts);
  out << "J* = " << fmt(jstar) << "\np = " << fmt(p) << "\ncapacity = "
      << rate_text(res.solution.capacity_nats, a.bits) << "\n";
  print_certificates(out, res.certificates);
  out << "  parameterization delta " << fmt(eq.delta) << " nats (blockwise "
      << fmt(eq.blockwise_nats) << ", joint " << fmt(eq.joint_nats) << ")\n";

  if (!a.out_dir.empty()) {
    json doc = capacity_json(res);
    doc["equivalence"] = {{"blockwise_nats", eq.blockwise_nats},
                          {"joint_nats", eq.joint_nats},
                          {"delta", eq.delta}};
    manifest.write(a.out_dir, "verify.json", doc.dump(2) + "\n");
    manifest.finish();
  }
  return kExitOk;
}

int cmd_simulate(const CommonArgs& a, const SimArgs& s,
                 const std::vector<std::string>& argv, std::ostream& out,
                 std::ostream& err) {
  Manifest manifest("simulate", a, argv);
  const PreparedSystem prep = prepare_system(load_system_file(a.config));
  const double jstar = prep.lqr.Jstar;
  const double p = resolve_budget(a, jstar);
  manifest.set("p", p);
  manifest.set("p_mode", a.p_mode);
  manifest.set("tol_gap", a.tol_gap);
  manifest.set("seed", s.seed);
  manifest.set("horizon", s.horizon);
  manifest.set("trials", s.trials);
  manifest.set("burn_in", s.burn_in);
  manifest.set("schedule", s.schedule);
  manifest.set("jobs", a.jobs);
  if (p < jstar - maxdet::kTolFeas) return infeasible(err, p, jstar);

  const CapacityResult res =
      compute_capacity(prep.sys, prep.kalman, prep.lqr, p, capacity_options(a));
  if (res.solution.status != CapacityStatus::kOptimal) {
    err << "capacity solve ended with status " << to_string(res.solution.status)
        << " " << res.solution.note << "\n";
    return status_exit(res.solution.status);
  }
  if (!res.certificates.certified() && !a.uncertified_ok) {
    err << "solution is not certified; pass --uncertified-ok to simulate it\n";
    return kExitSolver;
  }

  SimConfig cfg;
  cfg.horizon = s.horizon;
  cfg.trials = s.trials;
  cfg.seed = s.seed;
  cfg.burn_in = s.burn_in;
  cfg.jobs = a.jobs;
  if (s.schedule == "steady") {
    cfg.schedule = GainSchedule::kSteadyState;
  } else if (s.schedule == "time-varying") {
    cfg.schedule = GainSchedule::kTimeVarying;
  } else {
    throw Error(ErrorCode::kConfig, "--schedule must be steady or time-varying");
  }
  std::string traj_path;
  if (s.trajectory) {
    if (a.out_dir.empty()) {
      throw Error(ErrorCode::kConfig, "--trajectory needs --out");
    }
    fs::create_directories(a.out_dir);
    traj_path = (fs::path(a.out_dir) / "trajectory.csv").string();
    cfg.trajectory_csv = traj_path;
    cfg.trajectory_steps = s.trajectory_steps;
  }
  const SimulationReport rep =
      run_closed_loop(prep.sys, prep.kalman, prep.lqr, res.solution, cfg);

  const double n = static_cast<double>(rep.innovation_samples);
  const double unit = a.bits ? kNatsPerBit : 1.0;
  const char* unit_name = a.bits ? " bits" : " nats";
  out << "J* = " << fmt(jstar) << "\np = " << fmt(p) << "\n"
      << "empirical cost  = " << fmt(rep.empirical_cost.mean) << " +/- "
      << fmt(rep.empirical_cost.std_error) << " (budget " << fmt(p) << ")\n"
      << "true-state cost = " << fmt(rep.true_state_cost.mean) << " +/- "
      << fmt(rep.true_state_cost.std_error) << "\n"
      << "empirical rate  = " << fmt(rep.empirical_rate_nats.mean / unit)
      << " +/- " << fmt(rep.empirical_rate_nats.std_error / unit) << unit_name
      << " (capacity " << fmt(res.solution.capacity_nats / unit) << unit_name
      << ")\n"
      << "innovation lag-1 = " << fmt(rep.innovation_lag1) << " (bound "
      << fmt(4.0 / std::sqrt(n)) << ")\n"
      << "max state norm  = " << fmt(rep.state_norm_max) << "\n";

  if (!a.out_dir.empty()) {
    json doc = {
        {"Jstar", jstar},
        {"budget", p},
        {"capacity_nats", res.solution.capacity_nats},
        {"certified", res.certificates.certified()},
        {"empirical_cost", {{"mean", rep.empirical_cost.mean},
                            {"std_error", rep.empirical_cost.std_error}}},
        {"true_state_cost", {{"mean", rep.true_state_cost.mean},
                             {"std_error", rep.true_state_cost.std_error}}},
        {"empirical_rate_nats", {{"mean", rep.empirical_rate_nats.mean},
                                 {"std_error", rep.empirical_rate_nats.std_error}}},
        {"innovation_lag1", rep.innovation_lag1},
        {"innovation_samples", rep.innovation_samples},
        {"state_norm_max", rep.state_norm_max},
        {"decoder_error_cov_final", matrix_to_json(rep.decoder_error_cov_final)},
        {"trial_costs", rep.trial_costs},
        {"trial_rates", rep.trial_rates}};
    if (!traj_path.empty()) manifest.record(traj_path);
    manifest.write(a.out_dir, "simulate.json", doc.dump(2) + "\n");
    manifest.finish();
  }
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kNotPsd:
    case ErrorCode::kNotPd:
    case ErrorCode::kConfig:
    case ErrorCode::kAssumptionViolation:
    case ErrorCode::kTooFewSamples:
      return kExitConfig;
    case ErrorCode::kBudgetBelowFloor:
    case ErrorCode::kInfeasible:
      return kExitInfeasible;
    case ErrorCode::kNumericalBlowup:
      return kExitBlowup;
    default:
      return kExitSolver;
  }
}

std::vector<double> GridSpec::values() const {
  std::vector<double> out;
  if (steps == 1) return {from};
  for (int i = 0; i < steps; ++i) {
    out.push_back(from + (to - from) * static_cast<double>(i) / (steps - 1));
  }
  out.back() = to;
  return out;
}

GridSpec parse_grid(const std::string& text) {
  auto fail = [&] {
    return Error(ErrorCode::kConfig,
                 "grid must look like <param>=<from>:<to>:<steps>, got '" +
                     text + "'");
  };
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw fail();
  GridSpec g;
  g.param = text.substr(0, eq);
  if (g.param != "p" && g.param != "g" && g.param != "J") {
    throw Error(ErrorCode::kConfig,
                "sweep parameter must be p, g or J, got '" + g.param + "'");
  }
  std::istringstream is(text.substr(eq + 1));
  char c1 = 0, c2 = 0;
  if (!(is >> g.from >> c1 >> g.to >> c2 >> g.steps) || c1 != ':' ||
      c2 != ':' || !is.eof()) {
    throw fail();
  }
  if (g.steps < 1 || !std::isfinite(g.from) || !std::isfinite(g.to)) {
    throw fail();
  }
  return g;
}

BudgetMode parse_budget_mode(const std::string& text) {
  if (text == "fixed") return {};
  const std::string prefix = "jstar-plus:";
  if (text.rfind(prefix, 0) == 0) {
    std::istringstream is(text.substr(prefix.size()));
    double delta = 0.0;
    if (is >> delta && is.eof() && std::isfinite(delta)) return {true, delta};
  }
  throw Error(ErrorCode::kConfig,
              "--p-mode must be 'fixed' or 'jstar-plus:<delta>', got '" +
                  text + "'");
}

LqgSystem with_parameter(const LqgSystem& base, const std::string& param,
                         double value) {
  LqgSystem sys = base;
  if (param == "g") {
    sys.G = value * base.G;
  } else if (param == "J") {
    if (base.J.rows() != 1 || base.J.cols() != 1) {
      throw Error(ErrorCode::kConfig, "a J sweep needs a 1x1 feedthrough");
    }
    sys.J(0, 0) = value;
  } else {
    throw Error(ErrorCode::kConfig, "unknown system parameter '" + param + "'");
  }
  return sys;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

std::string csv_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17e", value);
  return buf;
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Control-and-communication capacity of LQG systems", "icac"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ICAC_VERSION);

  CommonArgs cap_args, sweep_args, verify_args, sim_args;
  SimArgs sim;
  std::string grid, manifest_path;

  auto* cap = app.add_subcommand("capacity", "capacity at one budget");
  add_common(cap, cap_args, true);
  auto* sweep = app.add_subcommand("sweep", "capacity over a parameter grid");
  add_common(sweep, sweep_args, false);
  sweep->add_option("--sweep", grid, "<param>=<from>:<to>:<steps>")->required();
  auto* verify = app.add_subcommand("verify", "certificates and cross-checks");
  add_common(verify, verify_args, true);
  auto* simulate = app.add_subcommand("simulate", "closed-loop Monte Carlo");
  add_common(simulate, sim_args, true);
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--horizon", sim.horizon, "steps per trial");
  simulate->add_option("--trials", sim.trials, "independent trials");
  simulate->add_option("--burn-in", sim.burn_in, "discarded initial steps");
  simulate->add_option("--schedule", sim.schedule, "steady | time-varying");
  simulate->add_flag("--trajectory", sim.trajectory,
                     "dump trajectories to <out>/trajectory.csv");
  simulate->add_option("--trajectory-steps", sim.trajectory_steps,
                       "rows per trial in the trajectory dump");
  auto* replay = app.add_subcommand("replay", "re-run the command in a manifest");
  replay->add_option("manifest", manifest_path, "manifest JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (cap->parsed()) return cmd_capacity(cap_args, args, out, err);
    if (sweep->parsed()) return cmd_sweep(sweep_args, grid, args, out, err);
    if (verify->parsed()) return cmd_verify(verify_args, args, out, err);
    if (simulate->parsed()) return cmd_simulate(sim_args, sim, args, out, err);
    if (replay->parsed()) {
      std::ifstream is(manifest_path);
      if (!is) throw Error(ErrorCode::kConfig, "cannot read " + manifest_path);
      const json doc = json::parse(is);
      const auto argv = doc.at("argv").get<std::vector<std::string>>();
      if (!argv.empty() && argv.front() == "replay") {
        throw Error(ErrorCode::kConfig, "manifest refers to another replay");
      }
      return run(argv, out, err);
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    err << "malformed JSON: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "unexpected failure: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitConfig;
}

}  // namespace icac::cli
