#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "lyapnet/network.hpp"

namespace lyapnet::plants {

/// x_next = step(x, u)
using StepFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Regression samples: inputs are (x, u) stacked, targets are the next states.
struct Dataset {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<Eigen::VectorXd> targets;
  std::size_t size() const { return inputs.size(); }
};

struct SamplingRegion {
  Eigen::VectorXd x_lower, x_upper;
  Eigen::VectorXd u_lower, u_upper;
  Eigen::VectorXd x_eq, u_eq;
};

struct FitOptions {
  std::vector<int> hidden{5, 5};
  double leak_slope = 0.1;
  std::size_t sample_count = 20000;
  std::size_t holdout_count = 2000;
  /// Fraction of samples drawn near the equilibrium.
  double near_fraction = 0.1;
  /// Half-width of the equilibrium neighbourhood relative to the region width.
  double near_radius = 0.05;
  int adam_epochs = 200;
  std::size_t batch_size = 256;
  double learning_rate = 3e-3;
  int lm_iterations = 200;
  double target_mse = 1e-5;
  std::uint64_t seed = 0;
};

struct FitReport {
  FeedforwardNetwork network;
  double train_mse = 0.0;
  double holdout_mse = 0.0;
  bool converged = false;  // holdout_mse <= target_mse
  int adam_epochs = 0;
  int lm_iterations = 0;
};

/// Uniform samples over the region plus near_fraction samples around the equilibrium.
Dataset sample_dataset(const StepFunction& step, const SamplingRegion& region, std::size_t count,
                       double near_fraction, double near_radius, std::uint64_t seed);

/// Mean over samples and output components of the squared one-step error.
double mean_squared_error(const FeedforwardNetwork& net, const Dataset& data);

/// Fits phi_dyn to the one-step map with Adam followed by Levenberg-Marquardt. Returns the
/// best network found even when the holdout target is missed.
FitReport fit_dynamics_network(const StepFunction& step, const SamplingRegion& region, const FitOptions& options);
/// Same, on explicit training and holdout sets.
FitReport fit_dynamics_network(const Dataset& train, const Dataset& holdout, int state_dim,
                               const FitOptions& options);

/// Columns x0..x{n-1}, u0..u{m-1}, y0..y{n-1} with a header row.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, int state_dim);
Dataset read_dataset_csv(const std::filesystem::path& path, int state_dim);

}  // namespace lyapnet::plants
