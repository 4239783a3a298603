#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include "common.hpp"

using namespace pmhom;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("pmhom-cli-" + name);
  fs::remove_all(p);
  return p;
}

int cli(const std::string& args, const std::string& env = {}) {
  std::string cmd = env + " " + std::string(PMHOM_CLI) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string problem_path(const std::string& name) { return source_path("problems/" + name + ".pm"); }

}  // namespace

TEST(Sweep, ParsesNameAndValues) {
  SweepAxis a = parse_sweep("b=0.3,0.6");
  EXPECT_EQ(a.name, "b");
  EXPECT_EQ(a.values, (std::vector<std::string>{"0.3", "0.6"}));
  EXPECT_THROW(parse_sweep("b"), ParseError);
  EXPECT_THROW(parse_sweep("=1"), ParseError);
  EXPECT_THROW(parse_sweep("b="), ParseError);
}

TEST(Sweep, GridIsACartesianProduct) {
  std::string text = read_text(source_path("problems/ex2.pm"));
  auto grid = sweep_grid(text, {parse_sweep("a=0.1,0.2"), parse_sweep("b=0.3,0.6,0.9")});
  ASSERT_EQ(grid.size(), 6u);
  EXPECT_EQ(point_label(grid.front()), "a=0.1_b=0.3");
  EXPECT_EQ(point_label({}), "default");
  EXPECT_THROW(sweep_grid(text, {parse_sweep("c=1")}), ValidationError);
  EXPECT_THROW(sweep_grid(text, {parse_sweep("b=1"), parse_sweep("b=2")}), ValidationError);
}

TEST(Cli, DivergentExampleExitsWithThree) {
  auto out = scratch("divergent");
  EXPECT_EQ(cli("example ex2-divergent --out " + out.string()), 3);
  EXPECT_TRUE(fs::exists(out / "report.txt"));
}

TEST(Cli, CheckWritesConstantsAndWitnesses) {
  auto out = scratch("check");
  EXPECT_EQ(cli("check " + problem_path("ex4") + " --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "constants.csv"));
  EXPECT_TRUE(fs::exists(out / "witnesses.csv"));
  std::string drift = read_text((out / "drift.csv").string());
  EXPECT_EQ(std::count(drift.begin(), drift.end(), '\n'), 4);
}

TEST(Cli, ClosedFormExampleWritesComparison) {
  auto out = scratch("ex3");
  EXPECT_EQ(cli("example ex3 --ell 4 --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "comparison.csv"));
}

TEST(Cli, RepeatedRunsAreIdentical) {
  auto a = scratch("det-a"), b = scratch("det-b");
  ASSERT_EQ(cli("solve " + problem_path("ex4") + " --out " + a.string()), 0);
  ASSERT_EQ(cli("solve " + problem_path("ex4") + " --out " + b.string()), 0);
  for (const auto& name : {"report.txt", "residual.csv", "ledger.txt"})
    EXPECT_EQ(read_text((a / name).string()), read_text((b / name).string())) << name;
}

TEST(Cli, SweepWritesOneDirectoryPerPoint) {
  auto out = scratch("sweep");
  EXPECT_EQ(cli("check " + problem_path("ex2") + " --sweep b=0.3,0.6 --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "b=0.3" / "constants.csv"));
  EXPECT_TRUE(fs::exists(out / "b=0.6" / "constants.csv"));
}

TEST(Cli, UsageErrorsExitWithOne) {
  auto out = scratch("usage");
  EXPECT_EQ(cli("check " + problem_path("ex2") + " --sweep c=1 --out " + out.string()), 1);
  EXPECT_EQ(cli("check " + problem_path("ex2") + " --no-such-flag"), 1);
  EXPECT_EQ(cli("check /nonexistent.pm --out " + out.string()), 1);
  EXPECT_EQ(cli("solve " + problem_path("ex3-field") + " --out " + out.string()), 1);
  EXPECT_EQ(cli("--help"), 0);
}

TEST(Cli, OutputRootFromEnvironment) {
  auto out = scratch("env");
  EXPECT_EQ(cli("check " + problem_path("ex4"), "PMHOM_OUT=" + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "constants.csv"));
}
