#include "lyapnet/train/loss.hpp"

#include <algorithm>
#include <cmath>

#include "lyapnet/errors.hpp"
#include "lyapnet/milp/encode.hpp"

namespace lyapnet::train {

using certify::CertificationProblem;
using certify::ParameterLayout;

double violation_eta1(const CertificationProblem& p, const Eigen::VectorXd& x) {
  return std::max(certify::positivity_objective(p, x), 0.0);
}

double violation_eta2(const CertificationProblem& p, const Eigen::VectorXd& x) {
  return std::max(certify::decrease_objective(p, x), 0.0);
}

void LossConfig::validate() const {
  if (!(p == 1.0 || p == 4.0 || std::isinf(p))) throw ConfigError("loss norm p must be 1, 4 or inf");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (max_epochs <= 0) throw ConfigError("max epochs must be positive");
}

double p_norm(const std::vector<double>& v, double p) {
  if (v.empty()) return 0.0;
  if (std::isinf(p)) return *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double e : v) acc += std::pow(e, p);
  return std::pow(acc, 1.0 / p);
}

namespace {

// d|v|_p / dv_i for nonnegative v.
std::vector<double> p_norm_weights(const std::vector<double>& v, double p, double norm) {
  std::vector<double> w(v.size(), 0.0);
  if (norm <= 0.0) return w;
  if (std::isinf(p)) {
    w[static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin())] = 1.0;
    return w;
  }
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::pow(v[i] / norm, p - 1.0);
  return w;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Adds w * dV(x)/dtheta without the -phi_V(x*) term into grad; returns w * dV/dx.
Eigen::VectorXd accumulate_V_gradient(const CertificationProblem& p, const Eigen::VectorXd& x, double w,
                                      Eigen::VectorXd& grad) {
  const certify::LyapunovFunction& l = p.lyapunov;
  ParameterLayout layout = ParameterLayout::of(p);
  const Eigen::VectorXd one = Eigen::VectorXd::Constant(1, w);
  grad.segment(layout.lyapunov_offset, layout.lyapunov_count) += l.phi.grad_params(x, one);
  const Eigen::VectorXd d = x - l.x_eq;
  const Eigen::MatrixXd R = l.R();
  Eigen::VectorXd s = (R * d).unaryExpr([](double v) { return sign(v); });
  for (int k = 0; k < layout.r_count; ++k) {
    grad[layout.r_offset + k] += w * 2.0 * l.r[k] * s.dot(l.u_factor.col(k)) * l.v_factor.col(k).dot(d);
  }
  return l.phi.grad_input(x, one) + w * R.transpose() * s;
}

}  // namespace

LossValue surrogate_loss(const CertificationProblem& p, const std::vector<Eigen::VectorXd>& x1,
                         const std::vector<Eigen::VectorXd>& x2, const LossConfig& config) {
  config.validate();
  ParameterLayout layout = ParameterLayout::of(p);
  LossValue out;
  out.gradient = Eigen::VectorXd::Zero(layout.size());
  const certify::LyapunovFunction& l = p.lyapunov;
  const certify::Controller& c = p.controller;
  const certify::Dynamics& dyn = p.dynamics;

  std::vector<double> eta1(x1.size()), eta2(x2.size());
  for (std::size_t i = 0; i < x1.size(); ++i) eta1[i] = violation_eta1(p, x1[i]);
  for (std::size_t i = 0; i < x2.size(); ++i) eta2[i] = violation_eta2(p, x2[i]);
  out.eta1_norm = p_norm(eta1, config.p);
  out.eta2_norm = p_norm(eta2, config.p);
  out.loss = out.eta1_norm + out.eta2_norm;
  std::vector<double> w1 = p_norm_weights(eta1, config.p, out.eta1_norm);
  std::vector<double> w2 = p_norm_weights(eta2, config.p, out.eta2_norm);

  // Every V(.) term carries -phi_V(x*); their weights are summed and applied once.
  double v_eq_weight = 0.0;
  Eigen::VectorXd ctrl_eq_cot = Eigen::VectorXd::Zero(dyn.control_dim());
  Eigen::VectorXd& g = out.gradient;

  for (std::size_t i = 0; i < x1.size(); ++i) {
    if (w1[i] == 0.0 || eta1[i] <= 0.0) continue;
    // eps1 |R d|_1 - V(x) = (eps1 - 1) |R d|_1 - (phi_V(x) - phi_V(x*)).
    const Eigen::VectorXd d = x1[i] - l.x_eq;
    Eigen::VectorXd s = (l.R() * d).unaryExpr([](double v) { return sign(v); });
    for (int k = 0; k < layout.r_count; ++k) {
      g[layout.r_offset + k] +=
          w1[i] * (p.eps1 - 1.0) * 2.0 * l.r[k] * s.dot(l.u_factor.col(k)) * l.v_factor.col(k).dot(d);
    }
    g.segment(layout.lyapunov_offset, layout.lyapunov_count) -=
        l.phi.grad_params(x1[i], Eigen::VectorXd::Constant(1, w1[i]));
    v_eq_weight -= w1[i];
  }

  for (std::size_t i = 0; i < x2.size(); ++i) {
    if (w2[i] == 0.0 || eta2[i] <= 0.0) continue;
    const Eigen::VectorXd& x = x2[i];
    Eigen::VectorXd raw = c.phi.evaluate(x) - c.phi.evaluate(c.x_eq) + c.u_eq;
    Eigen::VectorXd u(raw.size());
    for (Eigen::Index k = 0; k < raw.size(); ++k) u[k] = milp::clamp_value(raw[k], c.u_min[k], c.u_max[k]);
    Eigen::VectorXd next = dyn.next(x, u);

    Eigen::VectorXd gx_next = accumulate_V_gradient(p, next, w2[i], g);
    accumulate_V_gradient(p, x, -(1.0 - p.eps2) * w2[i], g);
    v_eq_weight += w2[i] - (1.0 - p.eps2) * w2[i];

    Eigen::VectorXd xu(x.size() + u.size());
    xu << x, u;
    Eigen::VectorXd gu = dyn.phi.grad_input(xu, gx_next).tail(u.size());
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      if (!(raw[k] > c.u_min[k] && raw[k] < c.u_max[k])) gu[k] = 0.0;
    }
    if (gu.isZero(0.0)) continue;
    g.segment(layout.controller_offset, layout.controller_count) += c.phi.grad_params(x, gu);
    ctrl_eq_cot += gu;
  }

  if (v_eq_weight != 0.0) {
    g.segment(layout.lyapunov_offset, layout.lyapunov_count) -=
        l.phi.grad_params(l.x_eq, Eigen::VectorXd::Constant(1, v_eq_weight));
  }
  if (!ctrl_eq_cot.isZero(0.0)) {
    g.segment(layout.controller_offset, layout.controller_count) -= c.phi.grad_params(c.x_eq, ctrl_eq_cot);
  }
  return out;
}

}  // namespace lyapnet::train
