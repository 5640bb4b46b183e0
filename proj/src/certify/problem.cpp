#include "lyapnet/certify/problem.hpp"

#include <cmath>

#include "lyapnet/errors.hpp"
#include "lyapnet/milp/encode.hpp"

namespace lyapnet::certify {

namespace {

void check_dim(const Eigen::VectorXd& v, int n, const char* what) {
  if (v.size() != n) {
    throw ContractViolation(std::string(what) + " has dimension " + std::to_string(v.size()) +
                            ", expected " + std::to_string(n));
  }
}

void check_control_limits(const Eigen::VectorXd& u_eq, const Eigen::VectorXd& u_min,
                          const Eigen::VectorXd& u_max) {
  check_dim(u_min, static_cast<int>(u_eq.size()), "u_min");
  check_dim(u_max, static_cast<int>(u_eq.size()), "u_max");
  for (Eigen::Index i = 0; i < u_eq.size(); ++i) {
    if (!(u_min[i] < u_max[i])) throw ContractViolation("control limits need u_min < u_max");
    if (u_eq[i] < u_min[i] || u_eq[i] > u_max[i]) {
      throw ContractViolation("equilibrium control lies outside the control limits");
    }
  }
}

}  // namespace

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lower.size()) return false;
  return ((x - lower).array() >= -tol).all() && ((upper - x).array() >= -tol).all();
}

bool Box::strictly_contains(const Eigen::VectorXd& x) const {
  if (x.size() != lower.size()) return false;
  return ((x - lower).array() > 0.0).all() && ((upper - x).array() > 0.0).all();
}

void Box::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) throw ContractViolation("box bounds must match in size");
  if (!lower.allFinite() || !upper.allFinite()) throw ContractViolation("box bounds must be finite");
  if (((upper - lower).array() < 0.0).any()) throw ContractViolation("box has lower > upper");
}

Eigen::VectorXd Dynamics::next(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  check_dim(x, state_dim(), "state");
  check_dim(u, control_dim(), "control");
  Eigen::VectorXd xu(x.size() + u.size()), eq(x.size() + u.size());
  xu << x, u;
  eq << x_eq, u_eq;
  return phi.evaluate(xu) - phi.evaluate(eq) + x_eq;
}

void Dynamics::validate() const {
  if (phi.input_dim() != state_dim() + control_dim() || phi.output_dim() != state_dim()) {
    throw ContractViolation("dynamics network must map (n_x + n_u) inputs to n_x outputs");
  }
  check_control_limits(u_eq, u_min, u_max);
}

void Controller::validate() const {
  if (phi.input_dim() != x_eq.size() || phi.output_dim() != u_eq.size()) {
    throw ContractViolation("controller network must map n_x inputs to n_u outputs");
  }
  check_control_limits(u_eq, u_min, u_max);
}

LyapunovFunction LyapunovFunction::with_default_factors(FeedforwardNetwork phi, Eigen::VectorXd x_eq,
                                                        Eigen::VectorXd r, double sigma_scale) {
  const Eigen::Index n = x_eq.size();
  return LyapunovFunction{std::move(phi),
                          Eigen::MatrixXd::Identity(n, n),
                          Eigen::MatrixXd::Identity(n, n),
                          Eigen::VectorXd::Constant(n, sigma_scale),
                          std::move(r),
                          std::move(x_eq)};
}

Eigen::MatrixXd LyapunovFunction::R() const {
  Eigen::VectorXd diag = sigma + r.cwiseProduct(r);
  return u_factor * diag.asDiagonal() * v_factor.transpose();
}

Eigen::MatrixXd LyapunovFunction::dR_dr(int k) const {
  return 2.0 * r[k] * u_factor.col(k) * v_factor.col(k).transpose();
}

void LyapunovFunction::validate() const {
  const int n = state_dim();
  if (phi.input_dim() != n || phi.output_dim() != 1) {
    throw ContractViolation("Lyapunov network must map n_x inputs to one output");
  }
  if (u_factor.rows() != n || u_factor.cols() != n || v_factor.rows() != n || v_factor.cols() != n) {
    throw ContractViolation("R factors must be n_x by n_x");
  }
  check_dim(sigma, n, "sigma");
  check_dim(r, n, "r");
  if ((sigma.array() <= 0.0).any()) throw ContractViolation("sigma must be positive");
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  if ((u_factor.transpose() * u_factor - eye).norm() > 1e-9 ||
      (v_factor.transpose() * v_factor - eye).norm() > 1e-9) {
    throw ContractViolation("R factors U and V must be orthonormal");
  }
}

void CertificationProblem::validate() const {
  dynamics.validate();
  controller.validate();
  lyapunov.validate();
  box.validate();
  const int n = state_dim();
  check_dim(box.lower, n, "box");
  if ((controller.x_eq - dynamics.x_eq).norm() != 0.0 || (lyapunov.x_eq - dynamics.x_eq).norm() != 0.0 ||
      (controller.u_eq - dynamics.u_eq).norm() != 0.0 || (controller.u_min - dynamics.u_min).norm() != 0.0 ||
      (controller.u_max - dynamics.u_max).norm() != 0.0) {
    throw ContractViolation("dynamics, controller and Lyapunov function disagree on the equilibrium");
  }
  if (!box.strictly_contains(dynamics.x_eq)) {
    throw ContractViolation("equilibrium must lie in the interior of the box");
  }
  if (!(eps1 > 0.0 && eps1 < 1.0)) throw ContractViolation("eps1 must lie in (0, 1)");
  if (!(eps2 > 0.0)) throw ContractViolation("eps2 must be positive");
}

Eigen::VectorXd eval_controller(const Controller& c, const Eigen::VectorXd& x) {
  check_dim(x, static_cast<int>(c.x_eq.size()), "state");
  Eigen::VectorXd raw = c.phi.evaluate(x) - c.phi.evaluate(c.x_eq) + c.u_eq;
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw[i] = milp::clamp_value(raw[i], c.u_min[i], c.u_max[i]);
  return raw;
}

double eval_V(const LyapunovFunction& l, const Eigen::VectorXd& x) {
  check_dim(x, l.state_dim(), "state");
  return l.phi.evaluate(x)[0] - l.phi.evaluate(l.x_eq)[0] + (l.R() * (x - l.x_eq)).lpNorm<1>();
}

Eigen::VectorXd step(const Dynamics& d, const Controller& c, const Eigen::VectorXd& x) {
  return d.next(x, eval_controller(c, x));
}

double positivity_objective(const CertificationProblem& p, const Eigen::VectorXd& x) {
  const LyapunovFunction& l = p.lyapunov;
  return p.eps1 * (l.R() * (x - l.x_eq)).lpNorm<1>() - eval_V(l, x);
}

double decrease_objective(const CertificationProblem& p, const Eigen::VectorXd& x) {
  double v = eval_V(p.lyapunov, x);
  return eval_V(p.lyapunov, step(p.dynamics, p.controller, x)) - v + p.eps2 * v;
}

ParameterLayout ParameterLayout::of(const CertificationProblem& p) {
  ParameterLayout l;
  l.controller_offset = 0;
  l.controller_count = p.controller.phi.parameter_count();
  l.lyapunov_offset = l.controller_count;
  l.lyapunov_count = p.lyapunov.phi.parameter_count();
  l.r_offset = l.lyapunov_offset + l.lyapunov_count;
  l.r_count = static_cast<int>(p.lyapunov.r.size());
  return l;
}

Eigen::VectorXd pack_theta(const CertificationProblem& p) {
  ParameterLayout l = ParameterLayout::of(p);
  Eigen::VectorXd theta(l.size());
  theta.segment(l.controller_offset, l.controller_count) = p.controller.phi.pack();
  theta.segment(l.lyapunov_offset, l.lyapunov_count) = p.lyapunov.phi.pack();
  theta.segment(l.r_offset, l.r_count) = p.lyapunov.r;
  return theta;
}

CertificationProblem with_theta(const CertificationProblem& p, const Eigen::VectorXd& theta) {
  ParameterLayout l = ParameterLayout::of(p);
  if (theta.size() != l.size()) throw ContractViolation("theta has the wrong length");
  if (!theta.allFinite()) throw ContractViolation("theta must be finite");
  CertificationProblem out = p;
  out.controller.phi = p.controller.phi.with_parameters(Eigen::VectorXd(theta.segment(l.controller_offset, l.controller_count)));
  out.lyapunov.phi = p.lyapunov.phi.with_parameters(Eigen::VectorXd(theta.segment(l.lyapunov_offset, l.lyapunov_count)));
  out.lyapunov.r = theta.segment(l.r_offset, l.r_count);
  return out;
}

}  // namespace lyapnet::certify
