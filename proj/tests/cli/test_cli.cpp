#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "lyapnet/io/weights.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kCli = LYAPNET_CLI;
const fs::path kConfigs = fs::path(LYAPNET_SOURCE_DIR) / "configs";

fs::path scratch(const std::string& name) {
  fs::path dir = fs::path(LYAPNET_BINARY_DIR) / "cli_runs" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = kCli.string() + " " + args + " --log-level quiet > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  fs::path path = dir / "config.json";
  lyapnet::io::write_json(path, doc);
  return path;
}

json toy_fixture(double a, bool perturbed) {
  return {{"name", "toy"},
          {"seed", 3},
          {"plant", {{"kind", "toy"}, {"a", a}, {"perturbed", perturbed}}},
          {"networks", {{"controller", {2}}, {"lyapunov", {4}}}},
          {"box", {{"lower", {-1.0}}, {"upper", {1.0}}}},
          {"eps1", 0.5},
          {"eps2", 0.1}};
}

}  // namespace

TEST(Cli, MissingPlantFieldIsAValidationError) {
  fs::path dir = scratch("missing_plant");
  json doc = lyapnet::io::read_json(kConfigs / "pendulum_small.json");
  doc.erase("plant");
  fs::path cfg = write_config(dir, doc);
  EXPECT_EQ(run("fit --config " + cfg.string() + " --out " + dir.string()), 2);
  doc = lyapnet::io::read_json(kConfigs / "pendulum_small.json");
  doc["plant"].erase("gravity");
  cfg = write_config(dir, doc);
  EXPECT_EQ(run("fit --config " + cfg.string() + " --out " + dir.string()), 2);
}

TEST(Cli, AlgorithmThreeIsAValidationError) {
  fs::path dir = scratch("algorithm3");
  EXPECT_EQ(run("synthesize --config " + (kConfigs / "toy1d.json").string() + " --out " + dir.string() +
                " --algorithm 3"),
            2);
  EXPECT_FALSE(fs::exists(dir / "checkpoint.json"));
}

TEST(Cli, FitIsDeterministicAndUsesTableShapes) {
  fs::path a = scratch("fit_a"), b = scratch("fit_b");
  const std::string cfg = (kConfigs / "pendulum_small.json").string();
  ASSERT_EQ(run("fit --config " + cfg + " --out " + a.string() + " --seed 7"), 0);
  ASSERT_EQ(run("fit --config " + cfg + " --out " + b.string() + " --seed 7"), 0);
  EXPECT_EQ(lyapnet::io::read_file(a / "dynamics.json"), lyapnet::io::read_file(b / "dynamics.json"));
  lyapnet::FeedforwardNetwork net = lyapnet::io::read_network(a / "dynamics.json");
  ASSERT_EQ(net.layer_count(), 3);
  EXPECT_EQ(net.layer(0).weight.rows(), 5);
  EXPECT_EQ(net.layer(1).weight.rows(), 5);
  json report = lyapnet::io::read_json(a / "fit_report.json");
  EXPECT_LE(report["fit"]["holdout_mse"].get<double>(), 1e-5);
  EXPECT_EQ(report["config"]["seed"], 7);
  EXPECT_EQ(report["outputs"]["dynamics.json"], lyapnet::io::git_blob_hash(lyapnet::io::read_file(a / "dynamics.json")));
}

TEST(Cli, PendulumPipelineCertifiesAndVerifies) {
  fs::path dir = scratch("pendulum");
  const std::string common = " --config " + (kConfigs / "pendulum_small.json").string() + " --out " + dir.string();
  EXPECT_EQ(run("synthesize" + common), 2);  // no dynamics weights yet
  ASSERT_EQ(run("fit" + common), 0);
  ASSERT_EQ(run("synthesize" + common), 0);
  json report = lyapnet::io::read_json(dir / "report.json");
  EXPECT_TRUE(report["verification"]["certified"].get<bool>());
  const std::string weights = (dir / "dynamics.json").string();
  EXPECT_EQ(report["inputs"][weights], lyapnet::io::git_blob_hash(lyapnet::io::read_file(weights)));
  EXPECT_EQ(report["config"]["networks"]["lyapunov"], json({8, 4, 4}));
  EXPECT_EQ(run("verify" + common), 0);
  EXPECT_TRUE(lyapnet::io::read_json(dir / "verify_report.json")["verification"]["certified"].get<bool>());
  ASSERT_EQ(run("roa" + common), 0);
  EXPECT_GT(lyapnet::io::read_json(dir / "roa.json")["roa"]["rho"].get<double>(), 0.0);
  ASSERT_EQ(run("simulate" + common + " --samples 5"), 0);
  json sim = lyapnet::io::read_json(dir / "simulate_summary.json");
  ASSERT_EQ(sim["trajectories"].size(), 10u);
  for (const json& t : sim["trajectories"]) EXPECT_TRUE(t["converged"].get<bool>()) << t.dump();
}

TEST(Cli, ToySynthesisThenVerifyAndSimulateFromEquilibrium) {
  fs::path dir = scratch("toy");
  const std::string common = " --config " + (kConfigs / "toy1d.json").string() + " --out " + dir.string();
  for (int algorithm : {1, 2}) {
    ASSERT_EQ(run("synthesize" + common + " --algorithm " + std::to_string(algorithm)), 0);
    json report = lyapnet::io::read_json(dir / "report.json");
    EXPECT_TRUE(report["verification"]["certified"].get<bool>());
    EXPECT_EQ(report["config"]["synthesis"]["algorithm"], algorithm);
    EXPECT_EQ(run("verify" + common), 0);
  }
  std::ofstream(dir / "x0.csv") << "x0\n0\n";
  ASSERT_EQ(run("simulate" + common + " --initial-states " + (dir / "x0.csv").string() + " --source network"), 0);
  std::ifstream in(dir / "trajectories" / "network_0.csv");
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.substr(line.find(',') + 1), "0,0,0");
    ++rows;
  }
  EXPECT_EQ(rows, 201);
}

TEST(Cli, UncertifiedExitCodeAndOverride) {
  fs::path dir = scratch("uncertified");
  json doc = toy_fixture(1.2, true);
  doc["synthesis"] = {{"max_iterations", 1}, {"loss", {{"max_epochs", 1}}}};
  const std::string common = " --config " + write_config(dir, doc).string() + " --out " + dir.string();
  EXPECT_EQ(run("synthesize" + common), 1);
  EXPECT_FALSE(lyapnet::io::read_json(dir / "report.json")["verification"]["certified"].get<bool>());
  EXPECT_EQ(run("synthesize" + common + " --allow-uncertified"), 0);
  EXPECT_EQ(run("verify" + common), 1);
}

TEST(Cli, RoaOnAbsoluteValueFixture) {
  fs::path dir = scratch("roa_abs");
  json doc = toy_fixture(0.5, false);
  doc["box"] = {{"lower", {-2.0}}, {"upper", {1.0}}};
  const std::string common = " --config " + write_config(dir, doc).string() + " --out " + dir.string();
  ASSERT_EQ(run("synthesize" + common), 0);
  ASSERT_EQ(run("roa" + common), 0);
  EXPECT_NEAR(lyapnet::io::read_json(dir / "roa.json")["roa"]["rho"].get<double>(), 1.0, 1e-6);
}

TEST(Cli, CheckpointShapeMismatchIsRejected) {
  fs::path dir = scratch("mismatch");
  json doc = toy_fixture(0.5, false);
  const std::string out = " --out " + dir.string();
  ASSERT_EQ(run("synthesize --config " + write_config(dir, doc).string() + out), 0);
  doc["networks"]["lyapunov"] = {6};
  EXPECT_EQ(run("verify --config " + write_config(dir, doc).string() + out), 2);
}
