#include "lyapnet/train/optimizer.hpp"

#include "lyapnet/errors.hpp"
#include "lyapnet/io/weights.hpp"

namespace lyapnet::train {

void Optimizer::reset(Eigen::Index dim) {
  m = Eigen::VectorXd::Zero(dim);
  v = Eigen::VectorXd::Zero(dim);
  t = 0;
}

void Optimizer::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
  if (grad.size() != theta.size()) throw ContractViolation("gradient and theta differ in length");
  if (kind == OptimizerKind::GradientDescent) {
    theta -= lr * grad;
    return;
  }
  if (m.size() != theta.size()) reset(theta.size());
  ++t;
  m = beta1 * m + (1 - beta1) * grad;
  v = beta2 * v + (1 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1 - std::pow(beta2, static_cast<double>(t));
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
}

nlohmann::json Optimizer::to_json() const {
  return {{"kind", to_string(kind)},
          {"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"t", t},
          {"m", io::vector_to_json(m)},
          {"v", io::vector_to_json(v)}};
}

Optimizer Optimizer::from_json(const nlohmann::json& doc) {
  Optimizer o;
  o.kind = optimizer_from_string(doc.at("kind").get<std::string>());
  o.beta1 = doc.at("beta1").get<double>();
  o.beta2 = doc.at("beta2").get<double>();
  o.epsilon = doc.at("epsilon").get<double>();
  o.t = doc.at("t").get<long>();
  o.m = io::vector_from_json(doc.at("m"));
  o.v = io::vector_from_json(doc.at("v"));
  return o;
}

const char* to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "gd";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "gd") return OptimizerKind::GradientDescent;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected gd or adam)");
}

}  // namespace lyapnet::train
