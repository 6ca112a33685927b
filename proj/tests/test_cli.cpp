#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ddual/scenarios.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ddual;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ddual_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string(DDUAL_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WEXITSTATUS(status), slurp(out), slurp(err)};
  }

  fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump();
    return p;
  }

  // Coarse robot grid so the control runs stay quick.
  json small_robot(const std::string& id) {
    json j = id == "robot_nav" ? to_json(robot_nav_defaults()) : to_json(robot_nav_disturbed_defaults());
    j["grid"]["cells"] = {24, 24};
    return j;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SolveControlWritesFieldsAndReport) {
  const auto cfg = write_config("robot.json", small_robot("robot_nav"));
  const auto r = run("solve-control --config " + cfg.string() + " --out " + (dir_ / "r1").string());
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"V.csv", "policy.csv", "rho.csv", "sigma.csv", "report.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir_ / "r1" / f)) << f;
  EXPECT_FALSE(fs::exists(dir_ / "r1" / "d_star.csv"));

  std::ifstream vs(dir_ / "r1" / "V.csv");
  const ScalarField V = read_scalar_csv(vs);
  EXPECT_EQ(V.grid.size(), 25u * 25u);
  std::ifstream ps(dir_ / "r1" / "policy.csv");
  EXPECT_EQ(read_vector_csv(ps).components, 2);

  const json report = json::parse(slurp(dir_ / "r1" / "report.json"));
  EXPECT_TRUE(report["converged"].get<bool>());
  const json manifest = json::parse(slurp(dir_ / "r1" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "solve-control");
  EXPECT_EQ(manifest["headline"]["J_p"], report["J_p"]);
  EXPECT_FALSE(fs::exists(dir_ / "r1" / "manifest.json.tmp"));
}

TEST_F(Cli, RobustAddsWorstDisturbance) {
  const auto cfg = write_config("robot.json", small_robot("robot_nav_disturbed"));
  const auto r = run("solve-control --robust --config " + cfg.string() + " --out " + (dir_ / "r2").string());
  EXPECT_NE(r.code, 1) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "r2" / "d_star.csv"));
  std::ifstream ds(dir_ / "r2" / "d_star.csv");
  EXPECT_EQ(read_vector_csv(ds).components, 2);
}

TEST_F(Cli, IterationCapGivesExitTwo) {
  const auto cfg = write_config("robot.json", small_robot("robot_nav"));
  const auto r =
      run("solve-control --max-iterations 1 --config " + cfg.string() + " --out " + (dir_ / "r3").string());
  EXPECT_EQ(r.code, 2);
  const json manifest = json::parse(slurp(dir_ / "r3" / "manifest.json"));
  EXPECT_FALSE(manifest["converged"].get<bool>());
}

TEST_F(Cli, MalformedConfigNamesTheField) {
  json j = small_robot("robot_nav");
  j["input_radius"] = "fast";
  const auto cfg = write_config("bad.json", j);
  const auto r = run("solve-control --config " + cfg.string() + " --out " + (dir_ / "bad").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("'input_radius'"), std::string::npos) << r.err;

  std::ofstream(dir_ / "broken.json") << "{ not json";
  EXPECT_EQ(run("solve-mdp --config " + (dir_ / "broken.json").string()).code, 1);
  EXPECT_EQ(run("solve-mdp --config " + (dir_ / "missing.json").string()).code, 1);
  EXPECT_EQ(run("no-such-command").code, 1);
}

TEST_F(Cli, SolveMdpTrafficFiles) {
  const auto r = run("solve-mdp --scenario traffic7 --out " + (dir_ / "t").string());
  ASSERT_EQ(r.code, 0) << r.err;
  for (int k = 1; k <= 7; ++k) EXPECT_TRUE(fs::exists(dir_ / "t" / ("policy_" + std::to_string(k) + ".json")));
  const json cum = json::parse(slurp(dir_ / "t" / "cumulative_density.json"));
  ASSERT_EQ(cum.size(), 7u);
  const json report = json::parse(slurp(dir_ / "t" / "report.json"));
  EXPECT_NEAR(cum[6].get<double>(), report["rho_max"][6].get<double>(), 0.02 * report["rho_max"][6].get<double>());
  EXPECT_GT(report["cost"].get<double>(), report["unconstrained_cost"].get<double>());
}

TEST_F(Cli, SolveMdpUnconstrainedIsDeterministic) {
  const auto r = run("solve-mdp --scenario traffic7 --unconstrained --out " + (dir_ / "u").string());
  ASSERT_EQ(r.code, 0) << r.err;
  for (int k = 1; k <= 7; ++k) {
    const json pi = json::parse(slurp(dir_ / "u" / ("policy_" + std::to_string(k) + ".json")));
    for (int s = 0; s < 7; ++s) {
      if (s == k - 1) continue;
      double top = 0.0;
      for (const auto& p : pi[s]) top = std::max(top, p.get<double>());
      EXPECT_EQ(top, 1.0) << k << ' ' << s;
    }
  }
}

TEST_F(Cli, SolveMdpProblemFile) {
  std::mt19937_64 rng(4);
  const MdpModel m = random_model(rng, 4, 2, 0.9);
  json cfg = {{"mdps", {to_json(m)}}, {"rho_max", {nullptr, nullptr, nullptr, nullptr}}, {"eps", 1e-4}};
  const auto path = write_config("problem.json", cfg);
  const auto r = run("solve-mdp --config " + path.string() + " --out " + (dir_ / "p").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(slurp(dir_ / "p" / "report.json"));
  EXPECT_NEAR(report["objective"].get<double>(), m.phi_plus.dot(value_iteration(m).V), 1e-4);
}

TEST_F(Cli, CheckDualityPrintsSmallGap) {
  const auto r = run("solve-mdp --check-duality --seed 5 --out " + (dir_ / "d").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("gap"), std::string::npos);
  const json rows = json::parse(slurp(dir_ / "d" / "duality.json"));
  for (const auto& row : rows)
    EXPECT_LE(std::abs(row["gap"].get<double>()), 1e-8 * std::max(1.0, std::abs(row["J_p"].get<double>())));
}

TEST_F(Cli, DensityMethodsAndCompare) {
  ASSERT_EQ(run("density --method fdm --out " + (dir_ / "f").string()).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "f" / "rho_fdm.csv"));
  ASSERT_EQ(run("density --method kde --trials 300 --seed 7 --out " + (dir_ / "k").string()).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "k" / "kde_samples.csv"));
  const auto r = run("density --compare fdm kde --trials 2000 --out " + (dir_ / "c").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("max relative deviation"), std::string::npos);
  EXPECT_EQ(run("density --method magic").code, 1);
}

TEST_F(Cli, SeededRunsReproduce) {
  ASSERT_EQ(run("density --method kde --trials 300 --seed 11 --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(run("density --method kde --trials 300 --seed 11 --out " + (dir_ / "b").string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "rho_kde.csv"), slurp(dir_ / "b" / "rho_kde.csv"));
  ASSERT_EQ(run("solve-mdp --scenario traffic7 --out " + (dir_ / "m1").string()).code, 0);
  ASSERT_EQ(run("solve-mdp --scenario traffic7 --out " + (dir_ / "m2").string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "m1" / "report.json"), slurp(dir_ / "m2" / "report.json"));
}

TEST_F(Cli, VerifyPasses) {
  const auto r = run("verify --out " + (dir_ / "v").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}
