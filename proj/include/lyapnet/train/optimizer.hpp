#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lyapnet/train/loss.hpp"

namespace lyapnet::train {

/// Plain gradient descent or Adam with per-parameter moments.
struct Optimizer {
  OptimizerKind kind = OptimizerKind::GradientDescent;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;

  /// theta <- theta - lr * direction(grad).
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);
  void reset(Eigen::Index dim);

  nlohmann::json to_json() const;
  static Optimizer from_json(const nlohmann::json& doc);
};

const char* to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

}  // namespace lyapnet::train
