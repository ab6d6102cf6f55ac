#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "gtest/gtest.h"
#include "json.hpp"
#include "scissor/io.h"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string output;  // stdout and stderr
};

Result Cli(const std::string& args) {
  const std::string cmd = std::string(SCISSOR_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("scissor_cli_test_" + std::string(
                                      ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string Read(const std::string& path) { return scissor::io::read_file(path); }

int CountLines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

TEST_F(CliTest, MissingTargetFileIsInvalid) {
  const Result r = Cli("morph --target " + Out("nope.csv") + " --units 20 --out " + Out("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("not found"), std::string::npos);
}

TEST_F(CliTest, ZeroUnitsIsInvalid) {
  const Result r = Cli("morph --target circle:R=1 --units 0 --out " + Out("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("--units"), std::string::npos);
}

TEST_F(CliTest, BadSubcommandPrintsUsage) {
  Result r = Cli("frobnicate");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("Usage"), std::string::npos);
  r = Cli("analyze wobble --out " + Out("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("Usage"), std::string::npos);
}

TEST_F(CliTest, MalformedValuesAreInvalid) {
  EXPECT_EQ(Cli("morph --target circle --units 5 --weights 1,2 --out " + Out("o")).code, 2);
  EXPECT_EQ(Cli("morph --target circle:Q=3 --units 5 --out " + Out("o")).code, 2);
  EXPECT_EQ(Cli("write --target circle --out " + Out("o")).code, 2);
  EXPECT_EQ(Cli("write --target circle --units 5 --grid 5:9 --out " + Out("o")).code, 2);
  EXPECT_EQ(Cli("write --target circle --units 5 --psi-range 3 --out " + Out("o")).code, 2);
  EXPECT_EQ(Cli("analyze closure --units 9:3 --out " + Out("o")).code, 2);
}

TEST_F(CliTest, MorphCircleGivesUniformDesign) {
  const Result r = Cli("morph --target circle:R=1 --units 20 --quiet --out " + Out("m"));
  ASSERT_EQ(r.code, 0) << r.output;
  const nlohmann::json d = nlohmann::json::parse(Read(Out("m/design.json")));
  const std::vector<double> a = d["params"]["alphas"].get<std::vector<double>>();
  ASSERT_EQ(a.size(), 20u);
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  EXPECT_LT(*hi - *lo, 1e-6);
  EXPECT_GT(*lo, 0.5);
  EXPECT_EQ(CountLines(Read(Out("m/shape.csv"))), 21);
  EXPECT_TRUE(fs::exists(Out("m/overlay.svg")));
  const nlohmann::json m = nlohmann::json::parse(Read(Out("m/manifest.json")));
  EXPECT_EQ(m["command"], "morph");
  EXPECT_EQ(m["outputs"]["shape.csv"],
            scissor::io::hex64(scissor::io::fnv1a64(Read(Out("m/shape.csv")))));
}

TEST_F(CliTest, SimulateReproducesMorphShape) {
  ASSERT_EQ(Cli("morph --target spiral --units 12 --quiet --out " + Out("m")).code, 0);
  const Result r = Cli("simulate --design " + Out("m/design.json") + " --out " + Out("s"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(Read(Out("m/shape.csv")), Read(Out("s/shape.csv")));
}

TEST_F(CliTest, SimulateReproducesWriteTrajectory) {
  ASSERT_EQ(Cli("write --target circle --units 5 --restarts 2 --iterations 60 --quiet --out " +
                Out("w"))
                .code,
            0);
  const Result r = Cli("simulate --design " + Out("w/design.json") + " --out " + Out("s"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(Read(Out("w/trajectory.csv")), Read(Out("s/trajectory.csv")));
}

TEST_F(CliTest, WriteTableHasOneRowPerRestartAndBestIsMinimum) {
  const Result r =
      Cli("write --target circle:R=1 --units 4 --restarts 15 --seed 0 --iterations 40 --samples 60 "
          "--quiet --out " + Out("w"));
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream table(Read(Out("w/gridsearch.csv")));
  std::string line;
  std::getline(table, line);
  EXPECT_EQ(line, "n_units,seed,loss,feasible,failed,message");
  double best = std::numeric_limits<double>::infinity();
  int rows = 0;
  while (std::getline(table, line)) {
    ++rows;
    std::istringstream fields(line);
    std::string n, seed, loss;
    std::getline(fields, n, ',');
    std::getline(fields, seed, ',');
    std::getline(fields, loss, ',');
    EXPECT_EQ(n, "4");
    EXPECT_EQ(seed, std::to_string(rows - 1));
    best = std::min(best, std::stod(loss));
  }
  EXPECT_EQ(rows, 15);
  const nlohmann::json d = nlohmann::json::parse(Read(Out("w/design.json")));
  EXPECT_EQ(d["loss"].get<double>(), best);
  EXPECT_TRUE(fs::exists(Out("w/collage.svg")));
}

TEST_F(CliTest, GridSweepTableShape) {
  const Result r = Cli("write --target " + std::string(SCISSOR_DATA_DIR) +
                       "/letter_D.csv --grid 10:100:5 --restarts 15 --iterations 1 --samples 12 "
                       "--quiet --out " + Out("g"));
  ASSERT_TRUE(r.code == 0 || r.code == 3) << r.output;
  EXPECT_EQ(CountLines(Read(Out("g/gridsearch.csv"))), 1 + 19 * 15);
}

TEST_F(CliTest, RerunIsByteIdentical) {
  const std::string args =
      "write --target circle --units 5 --restarts 3 --iterations 80 --seed 4 --quiet --out ";
  ASSERT_EQ(Cli(args + Out("a")).code, 0);
  ASSERT_EQ(Cli(args + Out("b") + " --threads 2").code, 0);
  for (const char* f : {"design.json", "trajectory.csv", "gridsearch.csv", "collage.svg"}) {
    EXPECT_EQ(Read(Out("a/") + f), Read(Out("b/") + f)) << f;
  }
}

TEST_F(CliTest, ClosureTable) {
  const Result r = Cli("analyze closure --alpha 0.6 --units 5:12 --out " + Out("c"));
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string csv = Read(Out("c/closure.csv"));
  EXPECT_EQ(CountLines(csv), 9);
  EXPECT_TRUE(fs::exists(Out("c/closure.svg")));
}

TEST_F(CliTest, PerturbationAndSensitivity) {
  Result r = Cli("analyze perturbation --epsilon 1e-4,2e-4 --out " + Out("p"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(CountLines(Read(Out("p/perturbation.csv"))), 1 + 2 * 30);
  const nlohmann::json s = nlohmann::json::parse(Read(Out("p/summary.json")));
  EXPECT_TRUE(s.contains("loglog_slope"));
  r = Cli("analyze sensitivity --units 10,20 --samples 50 --out " + Out("s"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(CountLines(Read(Out("s/sensitivity.csv"))), 31);
  EXPECT_TRUE(fs::exists(Out("s/sensitivity.svg")));
}

TEST_F(CliTest, ConfigFileSuppliesFlagsAndFlagsWin) {
  {
    std::ofstream cfg(Out("cfg.json"));
    cfg << R"({"analyze": {"closure": {"alpha": [0.6, 0.7], "units": "5:7"}}})";
  }
  Result r = Cli("--config " + Out("cfg.json") + " analyze closure --out " + Out("c"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(CountLines(Read(Out("c/closure.csv"))), 7);
  r = Cli("--config " + Out("cfg.json") + " analyze closure --units 5:5 --out " + Out("d"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(CountLines(Read(Out("d/closure.csv"))), 3);
  EXPECT_EQ(Cli("--config " + Out("missing.json") + " analyze closure --out " + Out("e")).code, 2);
}

TEST_F(CliTest, InterruptFlushesPartialTable) {
  const std::string cmd = "sh -c '" + std::string(SCISSOR_CLI_PATH) +
                          " write --target circle --units 6 --restarts 40 --quiet --out " +
                          Out("w") + " & pid=$!; sleep 2; kill -INT $pid; wait $pid'";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 130);
  const std::string csv = Read(Out("w/gridsearch.csv"));
  EXPECT_GE(CountLines(csv), 1);
  EXPECT_LT(CountLines(csv), 41);
  EXPECT_TRUE(fs::exists(Out("w/manifest.json")));
}

}  // namespace
