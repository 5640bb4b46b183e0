#pragma once

#include <limits>
#include <vector>

#include "lyapnet/certify/problem.hpp"

namespace lyapnet::train {

/// max(eps1 |R (x - x*)|_1 - V(x), 0)
double violation_eta1(const certify::CertificationProblem& p, const Eigen::VectorXd& x);
/// max(V(step(x)) - V(x) + eps2 V(x), 0)
double violation_eta2(const certify::CertificationProblem& p, const Eigen::VectorXd& x);

enum class OptimizerKind { GradientDescent, Adam };

struct LossConfig {
  /// Norm order over the per-sample violations: 1, 4 or infinity.
  double p = 4.0;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  int max_epochs = 100;
  OptimizerKind optimizer = OptimizerKind::GradientDescent;

  void validate() const;
};

struct LossValue {
  double loss = 0.0;
  double eta1_norm = 0.0;
  double eta2_norm = 0.0;
  Eigen::VectorXd gradient;  // over theta, see certify::ParameterLayout
};

/// |eta1(X1)|_p + |eta2(X2)|_p and its gradient with respect to theta.
LossValue surrogate_loss(const certify::CertificationProblem& p, const std::vector<Eigen::VectorXd>& x1,
                         const std::vector<Eigen::VectorXd>& x2, const LossConfig& config);

/// |v|_p for v >= 0, with p = infinity giving the maximum.
double p_norm(const std::vector<double>& v, double p);

}  // namespace lyapnet::train
