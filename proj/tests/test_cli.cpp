// End-to-end checks of the command-line tool, run as a subprocess.

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "beliefdyn/numerics.hpp"
#include "beliefdyn/stationary.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "beliefdyn_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliRun run(const std::string& args, const fs::path& work) {
  const fs::path out = work / "stdout.txt", err = work / "stderr.txt";
  const std::string cmd =
      std::string(BELIEFDYN_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::map<std::string, std::string> report(const fs::path& p) {
  std::map<std::string, std::string> kv;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::vector<std::pair<double, double>> read_xy(const fs::path& p) {
  std::vector<std::pair<double, double>> rows;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto c = line.find(',');
    rows.emplace_back(std::stod(line.substr(0, c)), std::stod(line.substr(c + 1)));
  }
  return rows;
}

}  // namespace

TEST(Cli, StationaryHomogeneousMatchesClosedForm) {
  const fs::path w = scratch("stat_homog");
  const CliRun r = run("stationary --preset homogeneous --alpha 0.5 --sigma2 0.01 --out " + (w / "o").string(), w);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(w / "o" / "manifest.json"));
  EXPECT_TRUE(fs::exists(w / "o" / "density.csv"));
  const auto rows = read_xy(w / "o" / "marginal.csv");
  ASSERT_EQ(rows.size(), 401u);
  for (const auto& [x, rho] : rows) EXPECT_NEAR(rho, beliefdyn::homogeneous_closed_form(0.5, 0.01, x), 1e-6);
  const auto kv = report(w / "o" / "report.txt");
  EXPECT_EQ(kv.at("method"), "closed_form_product");
  EXPECT_EQ(kv.at("converged"), "true");
  EXPECT_NE(r.out.find("contraction"), std::string::npos);
}

TEST(Cli, StationaryBoundedConfidenceIsBimodal) {
  const fs::path w = scratch("stat_rect");
  const CliRun r = run("stationary --preset bounded-rect --alpha 0.1 --sigma2 0.001 --out " + (w / "o").string(), w);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto kv = report(w / "o" / "report.txt");
  EXPECT_EQ(kv.at("method"), "successive_approximation");
  EXPECT_EQ(kv.at("mode_count"), "2");
  EXPECT_EQ(kv.at("convergence_guarantee"), "unguaranteed");
  EXPECT_TRUE(fs::exists(w / "o" / "convergence.csv"));
}

TEST(Cli, StationaryNotConvergedIsFlagged) {
  const fs::path w = scratch("stat_nc");
  const CliRun r = run("stationary --preset bounded-rect --max-iter 2 --grid 41,81 --out " + (w / "o").string(), w);
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(report(w / "o" / "report.txt").at("converged"), "false");
  EXPECT_TRUE(fs::exists(w / "o" / "density.csv"));
}

TEST(Cli, MissingConfigIsConfigError) {
  const fs::path w = scratch("missing_cfg");
  const CliRun r = run("stationary --config /nonexistent/x.yaml --out " + (w / "o").string(), w);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("cannot read config file"), std::string::npos);
  const CliRun none = run("stationary --out " + (w / "o").string(), w);
  EXPECT_EQ(none.code, 2);
  const CliRun bad = run("stationary --preset homogeneous --sigma2 0 --out " + (w / "o").string(), w);
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("NonPositiveNoise"), std::string::npos);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const fs::path w = scratch("precedence");
  {
    std::ofstream cfg(w / "s.yaml");
    cfg << "preset: homogeneous\npreset_params: {alpha: 0.2}\nsigma2: 0.04\n";
  }
  const CliRun r = run("stationary --config " + (w / "s.yaml").string() + " --sigma2 0.01 --grid 41,201 --out " +
                        (w / "o").string(),
                    w);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_xy(w / "o" / "marginal.csv");
  for (const auto& [x, rho] : rows) EXPECT_NEAR(rho, beliefdyn::homogeneous_closed_form(0.2, 0.01, x), 1e-5);
  EXPECT_NE(slurp(w / "o" / "manifest.json").find("config_text"), std::string::npos);
}

TEST(Cli, TransientRejectsBoundedConfidence) {
  const fs::path w = scratch("tr_rect");
  const CliRun r = run("transient --preset bounded-rect --out " + (w / "o").string(), w);
  EXPECT_EQ(r.code, 4);
}

TEST(Cli, TransientSnapshotsAndLaplaceCheck) {
  const fs::path w = scratch("tr_event");
  const CliRun r = run("transient --preset event-driven --param influence=constant --snapshot-times 0,1,10,200 "
                    "--laplace-check 0.5,1 --grid 101,201 --out " + (w / "o").string(),
                    w);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"phi.csv", "marginal_t.csv", "snapshot_t0.csv", "snapshot_t1.csv", "snapshot_t10.csv",
                        "snapshot_t200.csv", "laplace.csv", "report.txt", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(w / "o" / f)) << f;
  }
  const auto kv = report(w / "o" / "report.txt");
  EXPECT_LT(std::stod(kv.at("laplace_max_relative_residual")), 1e-4);
  // The mean starts at 1 and decays as exp(-0.1 t): relaxed only after many time constants.
  EXPECT_GT(std::stod(kv.at("l1_to_stationary_at_t10")), 0.5);
  EXPECT_LT(std::stod(kv.at("l1_to_stationary_at_t200")), 1e-2);
  std::ifstream phi(w / "o" / "phi.csv");
  std::string header;
  std::getline(phi, header);
  EXPECT_EQ(header, "t,p,phi");
}

TEST(Cli, TransientLaplaceOnSymmetricPresetIsZero) {
  const fs::path w = scratch("tr_sym");
  const CliRun r = run("transient --preset homogeneous --laplace-check 1.0 --grid 41,81 --out " + (w / "o").string(), w);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::stod(report(w / "o" / "report.txt").at("laplace_max_relative_residual")), 0.0);
}

TEST(Cli, McDeterministicAndStepGuard) {
  const fs::path w = scratch("mc_det");
  const std::string common = "mc --preset bounded-rect --alpha 0.3 --U 200 --seed 7 --dt 0.01 --t-final 2 ";
  ASSERT_EQ(run(common + "--out " + (w / "a").string(), w).code, 0);
  ASSERT_EQ(run(common + "--threads 2 --out " + (w / "b").string(), w).code, 0);
  for (const char* f : {"trajectory.csv", "histogram.csv", "histogram_time_averaged.csv", "report.txt"}) {
    EXPECT_EQ(slurp(w / "a" / f), slurp(w / "b" / f)) << f;
  }
  std::ifstream traj(w / "a" / "trajectory.csv");
  std::string header;
  std::getline(traj, header);
  EXPECT_EQ(header, "t,stat_name,value");
  const CliRun big = run("mc --preset bounded-rect --dt 0.5 --t-final 1 --out " + (w / "c").string(), w);
  EXPECT_EQ(big.code, 5);
}

TEST(Cli, ReplayReproducesOutputs) {
  const fs::path w = scratch("replay");
  ASSERT_EQ(run("mc --preset community --U 100 --seed 3 --dt 0.01 --t-final 1 --snapshot-times 0.5 --out " +
                    (w / "a").string(),
                w)
                .code,
            0);
  const CliRun r = run("replay " + (w / "a" / "manifest.json").string() + " --out " + (w / "b").string(), w);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& entry : fs::directory_iterator(w / "a")) {
    const auto name = entry.path().filename();
    if (name == "manifest.json") continue;
    EXPECT_EQ(slurp(entry.path()), slurp(w / "b" / name)) << name;
  }
}

TEST(Cli, McValidateAgainstStationaryDensity) {
  const fs::path w = scratch("mc_validate");
  ASSERT_EQ(run("stationary --preset bounded-rect --alpha 0.3 --sigma2 0.001 --out " + (w / "stat").string(), w).code,
            0);
  const CliRun r = run("mc --preset bounded-rect --alpha 0.3 --sigma2 0.001 --U 1000 --seed 7 --dt 0.02 --t-final 200 "
                    "--personalities stratified --record-every 1000 --validate-against " +
                        (w / "stat" / "density.csv").string() + " --out " + (w / "mc").string(),
                    w);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(std::stod(report(w / "mc" / "report.txt").at("validate_l1")), 0.1);
  EXPECT_NE(r.out.find("L1 distance"), std::string::npos);
}

TEST(Cli, ValidateFilteringAndExpectedFailure) {
  const fs::path w = scratch("validate");
  const CliRun r = run("validate --only model,3 --out " + (w / "o").string(), w);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS  config.zero-noise"), std::string::npos);
  EXPECT_NE(r.out.find("PASS  3"), std::string::npos);
  EXPECT_EQ(r.out.find(" 1  "), std::string::npos);
  EXPECT_EQ(run("validate --only nonsense", w).code, 2);
}

TEST(Cli, ScenariosListsPresets) {
  const fs::path w = scratch("scenarios");
  const CliRun r = run("scenarios", w);
  ASSERT_EQ(r.code, 0);
  for (const char* n : {"homogeneous", "inhomogeneous", "proximity", "community", "bounded-rect", "event-driven",
                        "independent"}) {
    EXPECT_NE(r.out.find(n), std::string::npos) << n;
  }
}

TEST(Cli, UnknownSubcommandOrFlagIsConfigError) {
  const fs::path w = scratch("bad_args");
  EXPECT_EQ(run("frobnicate", w).code, 2);
  EXPECT_EQ(run("stationary --preset homogeneous --bogus 1", w).code, 2);
  EXPECT_EQ(run("stationary --preset homogeneous --grid 2,5 --out " + (w / "o").string(), w).code, 2);
}
