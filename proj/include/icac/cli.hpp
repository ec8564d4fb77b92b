#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "icac/errors.hpp"
#include "icac/model.hpp"

namespace icac::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitInfeasible = 3,
  kExitSolver = 4,
  kExitBlowup = 5,
};

int exit_code_for(ErrorCode code);

// "<param>=<from>:<to>:<steps>" with param ∈ {p, g, J}; steps ≥ 1 points,
// endpoints included.
struct GridSpec {
  std::string param;
  double from = 0.0;
  double to = 0.0;
  int steps = 1;

  std::vector<double> values() const;
};
GridSpec parse_grid(const std::string& text);

// "fixed" or "jstar-plus:<δ>".
struct BudgetMode {
  bool relative = false;
  double delta = 0.0;

  double resolve(double p, double jstar) const {
    return relative ? jstar + delta : p;
  }
};
BudgetMode parse_budget_mode(const std::string& text);

// Returns a copy of `base` with the named scalar replaced: "g" scales G,
// "J" sets a 1×1 feedthrough. Throws Error{kConfig} otherwise.
LqgSystem with_parameter(const LqgSystem& base, const std::string& param,
                         double value);

// RFC 4180 field quoting.
std::string csv_field(const std::string& text);
// Round-trip scientific notation.
std::string csv_number(double value);

// Runs one command line (without the program name). Human-readable output
// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace icac::cli
