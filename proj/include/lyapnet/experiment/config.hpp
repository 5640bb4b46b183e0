#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lyapnet/certify/verify.hpp"
#include "lyapnet/plants/fit.hpp"
#include "lyapnet/plants/pendulum.hpp"
#include "lyapnet/plants/simulate.hpp"
#include "lyapnet/plants/toy.hpp"
#include "lyapnet/train/trainer.hpp"
#include "lyapnet/train/warm_start.hpp"

namespace lyapnet::experiment {

enum class PlantKind { Pendulum, Toy };

const char* to_string(PlantKind kind);

enum class Initialization { Random, Lqr };

const char* to_string(Initialization init);

struct NetworkShapes {
  double leak_slope = 0.1;
  std::vector<int> dynamics{5, 5};
  std::vector<int> controller{2, 2};
  std::vector<int> lyapunov{8, 4, 4};
};

struct SynthesisConfig {
  int algorithm = 1;
  Initialization initialization = Initialization::Random;
  train::WarmStartOptions warm_start;
  /// Initial r and the diagonal of Sigma for random initialization.
  double r_init = 1.0;
  double sigma = 0.1;
  train::LossConfig loss;
  int max_iterations = 500;
  double time_budget_seconds = 1800.0;
  std::size_t counterexample_cap = 50;
  double dedup_tolerance = 1e-6;
  std::size_t initial_samples = 0;
  double minmax_step = 1e-3;
  /// Nested boxes solved in order before the experiment box, each warm-started from the last.
  std::vector<certify::Box> box_schedule;
};

struct SolverConfig {
  double tolerance = 1e-6;
  long node_budget = 2'000'000;
  double time_budget_seconds = 600.0;
  milp::BoundMethod bound_method = milp::BoundMethod::Interval;
};

/// One experiment: plant, networks, verified box, training and solver settings.
struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  PlantKind plant = PlantKind::Pendulum;
  plants::PendulumPlant pendulum;
  plants::ToyOptions toy;
  Eigen::VectorXd u_min, u_max;
  NetworkShapes networks;
  certify::Box box;
  double eps1 = 0.1;
  double eps2 = 0.01;
  /// Regression settings; the sampling region defaults to the box.
  plants::FitOptions fit;
  certify::Box fit_region;
  SynthesisConfig synthesis;
  SolverConfig solver;
  plants::SimulateOptions simulate;
  /// Dynamics weight file; relative paths resolve against the output directory.
  std::string dynamics_weights = "dynamics.json";

  int state_dim() const;
  int control_dim() const;
  Eigen::VectorXd x_eq() const;
  Eigen::VectorXd u_eq() const;

  train::TrainConfig train_config() const;
  certify::VerifyOptions verify_options() const;
};

/// Validates and fills defaults. Throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
/// The fully resolved document; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& config);

/// A list of boxes: [{"lower": [...], "upper": [...]}, ...].
std::vector<certify::Box> parse_box_schedule(const nlohmann::json& doc);

}  // namespace lyapnet::experiment
