#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "lyapnet/certify/verify.hpp"
#include "lyapnet/train/loss.hpp"
#include "lyapnet/train/optimizer.hpp"

namespace lyapnet::train {

/// One row of the training curve.
struct IterationRecord {
  int iteration = 0;
  double positivity_max = 0.0;
  double decrease_max = 0.0;
  std::size_t x1_size = 0;
  std::size_t x2_size = 0;
  double loss = 0.0;
  int epochs = 0;
  double step_size = 0.0;
  bool step_skipped = false;
  double elapsed_seconds = 0.0;
};

struct TrainState {
  Eigen::VectorXd theta;  // see certify::ParameterLayout
  std::vector<Eigen::VectorXd> x1;
  std::vector<Eigen::VectorXd> x2;
  Optimizer optimizer;
  int iteration = 0;
  long epochs = 0;
  std::uint64_t seed = 0;
  std::mt19937_64 rng;
  bool converged = false;
  /// Step scale for the next min-max update (halved once after a skipped step).
  double step_scale = 1.0;
  std::vector<IterationRecord> curve;

  /// theta taken from the problem, empty sets, fresh optimizer.
  static TrainState initial(const certify::CertificationProblem& p, std::uint64_t seed,
                            OptimizerKind optimizer = OptimizerKind::GradientDescent);
  /// theta finite and of the right length, every training state inside the box.
  void validate(const certify::CertificationProblem& p) const;
};

struct TrainConfig {
  LossConfig loss;
  int max_iterations = 500;
  double time_budget_seconds = std::numeric_limits<double>::infinity();
  /// Pool entries appended per MIP and iteration.
  std::size_t counterexample_cap = 50;
  double dedup_tol = 1e-6;
  /// Uniform box samples added to each empty training set before the first iteration.
  std::size_t initial_samples = 0;
  /// Base step size of the min-max update.
  double minmax_step = 1e-3;
  certify::VerifyOptions verify;
  /// Called after every outer iteration with the problem at the current theta.
  std::function<void(const certify::CertificationProblem&, const TrainState&)> on_iteration;
};

/// Raised when a training loop runs out of iterations or time; carries the best state seen.
class IterationBudgetExceeded : public std::runtime_error {
 public:
  IterationBudgetExceeded(const std::string& what, TrainState best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const TrainState& best() const { return best_; }

 private:
  TrainState best_;
};

/// Counter-example training: solve both MIPs, append pooled violators to X1/X2, then run
/// batched descent on the surrogate loss until it vanishes or max_epochs is reached.
TrainState train_counterexamples(const certify::CertificationProblem& p, TrainState state,
                                 const TrainConfig& config);

/// Min-max training: descend along the gradient of the violated MIP optima.
TrainState train_minmax(const certify::CertificationProblem& p, TrainState state, const TrainConfig& config);

/// Checkpoint: controller and Lyapunov networks, the R factorization, training sets and
/// optimizer state.
nlohmann::json checkpoint_to_json(const certify::CertificationProblem& p, const TrainState& state);
/// Loads the trainable parts of a checkpoint into `p` (and `state` when given).
void apply_checkpoint(const nlohmann::json& doc, certify::CertificationProblem& p, TrainState* state = nullptr);
void write_checkpoint(const std::filesystem::path& path, const certify::CertificationProblem& p,
                      const TrainState& state);

void write_curve_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& curve);

}  // namespace lyapnet::train
