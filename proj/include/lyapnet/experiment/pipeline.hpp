#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lyapnet/experiment/config.hpp"

namespace lyapnet::experiment {

/// Ground-truth one-step map of the configured plant.
plants::StepFunction plant_step(const ExperimentConfig& config);

/// Regresses phi_dyn on the plant over the fit region and control limits.
plants::FitReport fit_dynamics(const ExperimentConfig& config);

/// The toy plant carries exact dynamics; the pendulum needs a fitted phi_dyn.
bool needs_dynamics_weights(const ExperimentConfig& config);

/// Dynamics, controller and Lyapunov function before training. The controller and phi_V are
/// drawn from the config seed; R starts as Sigma + diag(r_init^2).
certify::CertificationProblem initial_problem(const ExperimentConfig& config,
                                              const FeedforwardNetwork* dynamics = nullptr);

struct StageRecord {
  certify::Box box;
  bool certified = false;
  int iterations = 0;
  double seconds = 0.0;
};

struct SynthesisResult {
  explicit SynthesisResult(certify::CertificationProblem p) : problem(std::move(p)) {}

  /// The problem at the final parameters on the experiment box.
  certify::CertificationProblem problem;
  train::TrainState state;
  bool certified = false;
  std::vector<StageRecord> stages;
  std::optional<train::WarmStartReport> warm_start;
  double seconds = 0.0;
  /// Set when a stage ran out of budget.
  std::string failure;
};

/// Optional warm start, then the configured algorithm over the box schedule followed by the
/// experiment box. Each stage starts from the previous parameters and training sets.
SynthesisResult synthesize(
    const ExperimentConfig& config, const certify::CertificationProblem& initial,
    std::function<void(const certify::CertificationProblem&, const train::TrainState&)> on_iteration = {});

/// Uniform box samples with V(x) <= rho, by rejection. Throws NumericalFailure when fewer than
/// count are found within max_draws.
std::vector<Eigen::VectorXd> sample_sublevel_set(const certify::CertificationProblem& p, double rho,
                                                 std::size_t count, std::mt19937_64& rng,
                                                 std::size_t max_draws = 10'000'000);

/// {"config": resolved config, "inputs": {name: git blob hash}}.
nlohmann::json provenance(const ExperimentConfig& config, const std::vector<std::filesystem::path>& inputs);

nlohmann::json synthesis_to_json(const SynthesisResult& result);

}  // namespace lyapnet::experiment
