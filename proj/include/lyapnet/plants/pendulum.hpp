#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace lyapnet::plants {

/// Damped pendulum with torque input, state (theta, theta_dot), upright equilibrium (pi, 0).
struct PendulumPlant {
  double mass = 1.0;
  double length = 1.0;
  double damping = 0.1;
  double gravity = 9.81;
  double dt = 0.01;

  void validate() const;
  Eigen::VectorXd x_eq() const;
  Eigen::VectorXd u_eq() const;
  /// theta_ddot = (u - b theta_dot - m g l sin(theta)) / (m l^2)
  Eigen::Vector2d derivative(const Eigen::Vector2d& x, double u) const;
  /// 1/2 m l^2 theta_dot^2 - m g l cos(theta)
  double energy(const Eigen::Vector2d& x) const;

  static PendulumPlant from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

/// One explicit RK4 step of length dt with the torque held constant.
Eigen::VectorXd pendulum_step(const PendulumPlant& plant, const Eigen::VectorXd& x, const Eigen::VectorXd& u);

}  // namespace lyapnet::plants
