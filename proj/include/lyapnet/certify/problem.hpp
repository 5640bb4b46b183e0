#pragma once

#include <Eigen/Dense>

#include "lyapnet/network.hpp"

namespace lyapnet::certify {

/// Axis-aligned box {x | lower <= x <= upper}.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  bool strictly_contains(const Eigen::VectorXd& x) const;
  void validate() const;
};

/// x_{t+1} = phi(x_t, u_t) - phi(x*, u*) + x*, with u_min <= u <= u_max.
struct Dynamics {
  FeedforwardNetwork phi;
  Eigen::VectorXd x_eq;
  Eigen::VectorXd u_eq;
  Eigen::VectorXd u_min;
  Eigen::VectorXd u_max;

  int state_dim() const { return static_cast<int>(x_eq.size()); }
  int control_dim() const { return static_cast<int>(u_eq.size()); }
  Eigen::VectorXd next(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  void validate() const;
};

/// pi(x) = clamp(phi(x) - phi(x*) + u*, u_min, u_max).
struct Controller {
  FeedforwardNetwork phi;
  Eigen::VectorXd x_eq;
  Eigen::VectorXd u_eq;
  Eigen::VectorXd u_min;
  Eigen::VectorXd u_max;

  void validate() const;
};

/// V(x) = phi(x) - phi(x*) + |R (x - x*)|_1 with R = U (Sigma + diag(r^2)) Vf^T.
struct LyapunovFunction {
  FeedforwardNetwork phi;
  Eigen::MatrixXd u_factor;
  Eigen::MatrixXd v_factor;
  Eigen::VectorXd sigma;
  Eigen::VectorXd r;
  Eigen::VectorXd x_eq;

  /// Identity factors and Sigma = sigma_scale * I.
  static LyapunovFunction with_default_factors(FeedforwardNetwork phi, Eigen::VectorXd x_eq,
                                               Eigen::VectorXd r, double sigma_scale = 0.1);

  int state_dim() const { return static_cast<int>(x_eq.size()); }
  Eigen::MatrixXd R() const;
  /// dR_ij / dr_k = 2 r_k U_ik Vf_jk.
  Eigen::MatrixXd dR_dr(int k) const;
  void validate() const;
};

struct CertificationProblem {
  Dynamics dynamics;
  Controller controller;
  LyapunovFunction lyapunov;
  Box box;
  double eps1 = 0.01;
  double eps2 = 0.01;

  int state_dim() const { return dynamics.state_dim(); }
  void validate() const;
};

Eigen::VectorXd eval_controller(const Controller& c, const Eigen::VectorXd& x);
double eval_V(const LyapunovFunction& l, const Eigen::VectorXd& x);
Eigen::VectorXd step(const Dynamics& d, const Controller& c, const Eigen::VectorXd& x);

/// eps1 |R (x - x*)|_1 - V(x)
double positivity_objective(const CertificationProblem& p, const Eigen::VectorXd& x);
/// V(step(x)) - V(x) + eps2 V(x)
double decrease_objective(const CertificationProblem& p, const Eigen::VectorXd& x);

/// Flat trainable vector theta = [controller parameters, Lyapunov parameters, r].
struct ParameterLayout {
  int controller_offset = 0;
  int controller_count = 0;
  int lyapunov_offset = 0;
  int lyapunov_count = 0;
  int r_offset = 0;
  int r_count = 0;

  static ParameterLayout of(const CertificationProblem& p);
  int size() const { return r_offset + r_count; }
};

Eigen::VectorXd pack_theta(const CertificationProblem& p);
CertificationProblem with_theta(const CertificationProblem& p, const Eigen::VectorXd& theta);

}  // namespace lyapnet::certify
