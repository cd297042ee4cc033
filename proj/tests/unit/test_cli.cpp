#include "stochreg/errors.hpp"
#include "stochreg/io.hpp"
#include "stochreg/problems.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef STOCHREG_CLI_PATH
#error "STOCHREG_CLI_PATH must point at the stochreg binary"
#endif

using namespace stochreg;
namespace fs = std::filesystem;

namespace {

// one scratch directory per test so ctest -j cannot collide
fs::path dir() {
  const std::string name = ::testing::UnitTest::GetInstance()->current_test_info()->name();
  const fs::path d = fs::temp_directory_path() / ("stochreg_cli_" + name);
  static std::string made;
  if (made != name) {
    fs::remove_all(d);
    fs::create_directories(d);
    made = name;
  }
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun cli(const std::string& args) {
  const fs::path o = dir() / "stdout.txt", e = dir() / "stderr.txt";
  const std::string cmd = std::string("\"") + STOCHREG_CLI_PATH + "\" " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

std::string p(const std::string& name) { return (dir() / name).string(); }

std::vector<double> column(const CsvTable& t, const std::string& name) {
  std::size_t k = 0;
  while (k < t.header.size() && t.header[k] != name) ++k;
  std::vector<double> out;
  for (const auto& r : t.rows) out.push_back(parse_double(r.at(k)));
  return out;
}

}  // namespace

TEST(Cli, GenerateIsDeterministic) {
  ASSERT_EQ(cli("generate s-shaw --n 32 --nu 1 --eps 0.01 --seed 5 -o " + p("g1.json")).code, 0);
  ASSERT_EQ(cli("generate s-shaw --n 32 --nu 1 --eps 0.01 --seed 5 -o " + p("g2.json")).code, 0);
  ASSERT_EQ(cli("generate s-shaw --n 32 --nu 1 --eps 0.01 --seed 6 -o " + p("g3.json")).code, 0);
  EXPECT_EQ(slurp(p("g1.json")), slurp(p("g2.json")));
  EXPECT_NE(slurp(p("g1.json")), slurp(p("g3.json")));
}

TEST(Cli, GenerateWithoutNoiseHasZeroDelta) {
  const CliRun r = cli("generate s-gravity --n 16 --eps 0 -o " + p("exact.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("delta 0\n"), std::string::npos) << r.out;
  const InstanceFile f = load_instance(p("exact.json"));
  ASSERT_TRUE(f.data.has_value());
  EXPECT_EQ(f.data->delta, 0.0);
  EXPECT_EQ(f.data->y_delta, f.inst.y_dag);
}

TEST(Cli, SmoothedSolutionHasUnitSupNorm) {
  ASSERT_EQ(cli("generate s-phillips --n 40 --nu 2 --eps 0.01 -o " + p("nu2.json")).code, 0);
  const InstanceFile f = load_instance(p("nu2.json"));
  EXPECT_NEAR(f.inst.x_dag.cwiseAbs().maxCoeff(), 1.0, 1e-14);
}

TEST(Cli, SvrgWithMOneMatchesLandweber) {
  ASSERT_EQ(cli("generate s-shaw --n 24 --nu 1 --eps 0.01 -o " + p("m1.json")).code, 0);
  ASSERT_EQ(cli("solve " + p("m1.json") + " --method svrg --M 1 --c0 c --max-epochs 30 -o " + p("svrg.csv")).code, 0);
  ASSERT_EQ(cli("solve " + p("m1.json") + " --method landweber --c0 c --max-epochs 30 -o " + p("lw.csv")).code, 0);
  const CsvTable a = parse_csv(slurp(p("svrg.csv"))), b = parse_csv(slurp(p("lw.csv")));
  // SVRG stops on whole outer loops (28 of the 28.8 iterations), so compare the common prefix
  for (const char* col : {"error_sq", "residual_sq"}) {
    const auto x = column(a, col), y = column(b, col);
    ASSERT_EQ(x.size(), 29u);
    ASSERT_EQ(y.size(), 31u);
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin())) << col;
  }
  EXPECT_TRUE(fs::exists(p("svrg.csv.json")));
}

TEST(Cli, SolveIsByteStable) {
  ASSERT_EQ(cli("generate s-shaw --n 24 --nu 1 --eps 0.01 -o " + p("rep.json")).code, 0);
  const std::string args = "solve " + p("rep.json") + " --method sgd --c0 c/n --max-epochs 20 --seed 9 -o ";
  ASSERT_EQ(cli(args + p("r1.csv")).code, 0);
  ASSERT_EQ(cli(args + p("r2.csv")).code, 0);
  EXPECT_EQ(slurp(p("r1.csv")), slurp(p("r2.csv")));
  EXPECT_FALSE(slurp(p("r1.csv")).empty());
}

TEST(Cli, LandweberConvergesOnDiagonalSystem) {
  RowMatrix a = RowMatrix::Zero(2, 2);
  a.diagonal() << 1.0, 0.5;
  save_instance(p("diag.json"), make_instance("diag", a, Vector{{1.0, 1.0}}));
  // default step 1/|B| = 2 gives contraction factors 0 and 0.75
  const CliRun r = cli("solve " + p("diag.json") + " --method landweber --max-epochs 200 -o " + p("diag.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto e = column(parse_csv(slurp(p("diag.csv"))), "error_sq");
  EXPECT_LE(e.back(), 1e-20);
}

TEST(Cli, DivergenceExitCode) {
  ASSERT_EQ(cli("generate s-shaw --n 16 --eps 0.01 -o " + p("div.json")).code, 0);
  const CliRun r = cli("solve " + p("div.json") + " --method sgd --c0 1000 --allow-inadmissible --max-epochs 50");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("c0 ="), std::string::npos) << r.err;
}

TEST(Cli, InputErrorExitCodes) {
  EXPECT_EQ(cli("generate s-nothing --n 16 -o " + p("x.json")).code, 4);
  EXPECT_EQ(cli("generate s-phillips --n 10 -o " + p("x.json")).code, 4);
  ASSERT_EQ(cli("generate s-shaw --n 16 -o " + p("in.json")).code, 0);
  EXPECT_EQ(cli("solve " + p("in.json") + " --method sgd").code, 4);
  EXPECT_EQ(cli("solve " + p("in.json") + " --method sgd --c0 2c").code, 4);
  EXPECT_EQ(cli("solve " + p("in.json") + " --method sgd --c0 1000").code, 4);
  EXPECT_EQ(cli("solve " + p("in.json") + " --bogus-flag").code, 4);
  EXPECT_EQ(cli("verify --inject-fault nonsense").code, 4);
}

TEST(Cli, IoErrorExitCode) {
  std::ofstream(p("blocker")) << "x";
  EXPECT_EQ(cli("generate s-shaw --n 16 -o " + p("blocker") + "/sub/x.json").code, 5);
  EXPECT_EQ(cli("solve " + p("missing.json") + " --method sgd --c0 c").code, 5);
}

TEST(Cli, ExperimentWritesResults) {
  std::ofstream(p("spec.json")) << R"({"schema_version": 1, "problem": "s-shaw", "n": 16, "nu": [1],
    "epsilon": [0.01], "methods": [{"method": "landweber"}, {"method": "svrg", "c0": "c/M", "M": 4}],
    "runs": 1, "max_epochs": 30, "base_seed": 2})";
  const CliRun r = cli("experiment " + p("spec.json") + " -o " + p("exp"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("2 of 2 cells completed"), std::string::npos) << r.out;
  const CsvTable t = parse_csv(slurp(p("exp") + "/results.csv"));
  ASSERT_EQ(t.rows.size(), 2u);
  for (double se : column(t, "runs")) EXPECT_EQ(se, 1.0);
  EXPECT_TRUE(fs::exists(p("exp") + "/results.json"));
}

TEST(Cli, VerifyFaultExitCode) {
  const CliRun r = cli("verify --level fast --inject-fault svrg-sign --report " + p("verify.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("FAIL recursion_check"), std::string::npos);
  EXPECT_TRUE(fs::exists(p("verify.json")));
}
