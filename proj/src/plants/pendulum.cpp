#include "lyapnet/plants/pendulum.hpp"

#include <cmath>
#include <numbers>

#include "lyapnet/errors.hpp"

namespace lyapnet::plants {

void PendulumPlant::validate() const {
  if (!(mass > 0.0 && length > 0.0 && dt > 0.0)) throw ConfigError("pendulum mass, length and dt must be positive");
  if (!(damping >= 0.0 && gravity >= 0.0)) throw ConfigError("pendulum damping and gravity must be nonnegative");
}

Eigen::VectorXd PendulumPlant::x_eq() const { return Eigen::Vector2d(std::numbers::pi, 0.0); }

Eigen::VectorXd PendulumPlant::u_eq() const { return Eigen::VectorXd::Zero(1); }

Eigen::Vector2d PendulumPlant::derivative(const Eigen::Vector2d& x, double u) const {
  const double inertia = mass * length * length;
  return {x[1], (u - damping * x[1] - mass * gravity * length * std::sin(x[0])) / inertia};
}

double PendulumPlant::energy(const Eigen::Vector2d& x) const {
  return 0.5 * mass * length * length * x[1] * x[1] - mass * gravity * length * std::cos(x[0]);
}

PendulumPlant PendulumPlant::from_json(const nlohmann::json& doc) {
  PendulumPlant p;
  try {
    p.mass = doc.at("mass").get<double>();
    p.length = doc.at("length").get<double>();
    p.damping = doc.at("damping").get<double>();
    p.gravity = doc.at("gravity").get<double>();
    p.dt = doc.at("dt").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pendulum parameters: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json PendulumPlant::to_json() const {
  return {{"mass", mass}, {"length", length}, {"damping", damping}, {"gravity", gravity}, {"dt", dt}};
}

Eigen::VectorXd pendulum_step(const PendulumPlant& plant, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  if (x.size() != 2 || u.size() != 1) throw ContractViolation("pendulum expects a 2-state, 1-input step");
  const double h = plant.dt;
  const Eigen::Vector2d s = x;
  const Eigen::Vector2d k1 = plant.derivative(s, u[0]);
  const Eigen::Vector2d k2 = plant.derivative(s + 0.5 * h * k1, u[0]);
  const Eigen::Vector2d k3 = plant.derivative(s + 0.5 * h * k2, u[0]);
  const Eigen::Vector2d k4 = plant.derivative(s + h * k3, u[0]);
  return s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace lyapnet::plants
