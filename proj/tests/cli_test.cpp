#include "icac/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace icac::cli {
namespace {

namespace fs = std::filesystem;

const std::string kConfigs = ICAC_CONFIG_DIR;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("icac_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string str() const { return path_.string(); }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GTEST_TEST(CliParse, Grid) {
  const GridSpec g = parse_grid("p=1:3:5");
  EXPECT_EQ(g.param, "p");
  const std::vector<double> v = g.values();
  ASSERT_EQ(v.size(), 5u);
  EXPECT_DOUBLE_EQ(v.front(), 1.0);
  EXPECT_DOUBLE_EQ(v[1], 1.5);
  EXPECT_DOUBLE_EQ(v.back(), 3.0);
  EXPECT_EQ(parse_grid("J=0:1:1").values(), std::vector<double>{0.0});
  EXPECT_THROW(parse_grid("q=1:2:3"), Error);
  EXPECT_THROW(parse_grid("p=1:2"), Error);
  EXPECT_THROW(parse_grid("p=1:2:0"), Error);
}

GTEST_TEST(CliParse, BudgetMode) {
  EXPECT_FALSE(parse_budget_mode("fixed").relative);
  const BudgetMode m = parse_budget_mode("jstar-plus:2.5");
  EXPECT_TRUE(m.relative);
  EXPECT_DOUBLE_EQ(m.resolve(100.0, 10.0), 12.5);
  EXPECT_DOUBLE_EQ(parse_budget_mode("fixed").resolve(100.0, 10.0), 100.0);
  EXPECT_THROW(parse_budget_mode("jstar-plus:"), Error);
  EXPECT_THROW(parse_budget_mode("relative"), Error);
}

GTEST_TEST(CliParse, CsvQuoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
  EXPECT_EQ(std::stod(csv_number(0.1)), 0.1);
}

GTEST_TEST(CliParse, ExitCodes) {
  EXPECT_EQ(exit_code_for(ErrorCode::kConfig), kExitConfig);
  EXPECT_EQ(exit_code_for(ErrorCode::kAssumptionViolation), kExitConfig);
  EXPECT_EQ(exit_code_for(ErrorCode::kBudgetBelowFloor), kExitInfeasible);
  EXPECT_EQ(exit_code_for(ErrorCode::kNumericalBlowup), kExitBlowup);
  EXPECT_EQ(exit_code_for(ErrorCode::kNumericalFailure), kExitSolver);
}

GTEST_TEST(CliRun, AwgnCapacityInBits) {
  TempDir dir("awgn");
  const Outcome o = invoke({"capacity", kConfigs + "/awgn.json", "--p", "1",
                            "--bits", "--out", dir.str()});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  EXPECT_NE(o.out.find("capacity_bits"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "capacity.json"));
  EXPECT_TRUE(fs::exists(dir / "capacity.json.manifest.json"));
  const std::string json = slurp(dir / "capacity.json");
  const auto pos = json.find("\"capacity_bits\":");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NEAR(std::stod(json.substr(pos + 16)), 0.5, 1e-6);
  const std::string manifest = slurp(dir / "capacity.json.manifest.json");
  for (const char* key : {"command", "config_path", "parameters", "output_paths",
                          "tool_version", "wall_time_seconds"}) {
    EXPECT_NE(manifest.find(key), std::string::npos) << key;
  }
}

GTEST_TEST(CliRun, BelowFloorIsInfeasible) {
  const Outcome o =
      invoke({"capacity", kConfigs + "/example_J1.json", "--p", "20"});
  EXPECT_EQ(o.code, kExitInfeasible);
  EXPECT_NE(o.err.find("infeasible"), std::string::npos);
  EXPECT_NE(o.err.find("J*"), std::string::npos);
}

GTEST_TEST(CliRun, ConfigErrors) {
  EXPECT_EQ(invoke({"capacity", kConfigs + "/missing.json", "--p", "1"}).code,
            kExitConfig);
  EXPECT_EQ(invoke({"capacity", kConfigs + "/awgn.json"}).code, kExitConfig);
  EXPECT_EQ(invoke({"bogus"}).code, kExitConfig);

  TempDir dir("nov");
  const fs::path cfg = dir / "no_v.json";
  std::ofstream(cfg) << R"({"F":[[0]],"G":[[0]],"H":[[0]],"J":[[1]],"W":[[0]],)"
                     << R"("Q":[[0]],"R":[[1]]})";
  const Outcome o = invoke({"capacity", cfg.string(), "--p", "1"});
  EXPECT_EQ(o.code, kExitConfig);
  EXPECT_NE(o.err.find("V"), std::string::npos);
}

GTEST_TEST(CliRun, SweepCsv) {
  TempDir dir("sweep");
  const Outcome o = invoke({"sweep", kConfigs + "/awgn.json", "--sweep",
                            "p=0:3:4", "--out", dir.str()});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  const std::string csv = slurp(dir / "sweep.csv");
  EXPECT_EQ(csv.rfind("sweep_value,Jstar,p_used,capacity_nats,capacity_bits,"
                      "certified,status\r\n",
                      0),
            0u);
  int rows = 0;
  for (char c : csv) rows += c == '\n';
  EXPECT_EQ(rows, 5);
  EXPECT_TRUE(fs::exists(dir / "sweep.csv.manifest.json"));
}

GTEST_TEST(CliRun, SimulateReplayIsDeterministic) {
  TempDir dir("replay");
  const Outcome o = invoke({"simulate", kConfigs + "/awgn.json", "--p", "1",
                            "--horizon", "5000", "--trials", "2", "--seed", "7",
                            "--out", dir.str()});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  const std::string first = slurp(dir / "simulate.json");
  ASSERT_FALSE(first.empty());
  fs::remove(dir / "simulate.json");
  const Outcome again =
      invoke({"replay", (dir / "simulate.json.manifest.json").string()});
  ASSERT_EQ(again.code, kExitOk) << again.err;
  EXPECT_EQ(slurp(dir / "simulate.json"), first);
}

GTEST_TEST(CliRun, VerifyAgreesAcrossForms) {
  const Outcome o = invoke({"verify", kConfigs + "/example_J1.json",
                            "--p-mode", "jstar-plus:5"});
  EXPECT_EQ(o.code, kExitOk) << o.err;
}

}  // namespace
}  // namespace icac::cli
