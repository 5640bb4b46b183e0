#include "lyapnet/milp/encode.hpp"

#include <cmath>

#include "lyapnet/errors.hpp"

namespace lyapnet::milp {

namespace {

// Auxiliary variables get bounds wide enough never to be active, so that only the encoding
// rows describe them.
double widen_lower(double v) { return v - (1.0 + std::abs(v)); }
double widen_upper(double v) { return v + (1.0 + std::abs(v)); }

void check_box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int dim) {
  if (lower.size() != dim || upper.size() != dim) {
    throw ContractViolation("input box dimension does not match the network input");
  }
  for (int i = 0; i < dim; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw BoundPropagationError("input box must be finite");
    }
    if (lower[i] > upper[i]) throw BoundPropagationError("input box is empty");
  }
}

void affine_interval(const DenseLayer& layer, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                     Eigen::VectorXd& out_lo, Eigen::VectorXd& out_hi) {
  Eigen::MatrixXd wp = layer.weight.cwiseMax(0.0);
  Eigen::MatrixXd wn = layer.weight.cwiseMin(0.0);
  out_lo = wp * lo + wn * hi + layer.bias;
  out_hi = wp * hi + wn * lo + layer.bias;
}

Eigen::VectorXd activate(const Eigen::VectorXd& y, double c) {
  return y.unaryExpr([c](double v) { return leaky_relu(v, c); });
}

Tracked coefficient(double value, int theta_offset, int index) {
  if (theta_offset < 0) return Tracked(value);
  return Tracked::parameter(value, theta_offset + index);
}

// Encodes hidden layers [0, stop) and returns the preactivation expressions of layer `stop`.
std::vector<LinearExpr> encode_prefix(MilpModel& model, const FeedforwardNetwork& net,
                                      const std::vector<LinearExpr>& inputs,
                                      const NetworkBounds& bounds, int stop, int theta_offset,
                                      const std::string& name) {
  std::vector<LinearExpr> z = inputs;
  for (int l = 0; l <= stop; ++l) {
    const DenseLayer& layer = net.layer(l);
    std::vector<LinearExpr> y(static_cast<std::size_t>(layer.weight.rows()));
    for (int i = 0; i < layer.weight.rows(); ++i) {
      LinearExpr& e = y[static_cast<std::size_t>(i)];
      for (int j = 0; j < layer.weight.cols(); ++j) {
        double w = layer.weight(i, j);
        if (w == 0.0 && theta_offset < 0) continue;
        e.add(z[static_cast<std::size_t>(j)], coefficient(w, theta_offset, net.weight_index(l, i, j)));
      }
      e.add_constant(coefficient(layer.bias[i], theta_offset, net.bias_index(l, i)));
    }
    if (l == stop) return y;
    if (static_cast<int>(bounds.lower.size()) <= l ||
        bounds.lower[static_cast<std::size_t>(l)].size() != layer.weight.rows()) {
      throw BoundPropagationError("missing neuron bounds for layer " + std::to_string(l));
    }
    for (int i = 0; i < layer.weight.rows(); ++i) {
      y[static_cast<std::size_t>(i)] = encode_leaky_relu(
          model, y[static_cast<std::size_t>(i)], bounds.lower[static_cast<std::size_t>(l)][i],
          bounds.upper[static_cast<std::size_t>(l)][i], net.leak_slope(),
          name + "_l" + std::to_string(l) + "_" + std::to_string(i));
    }
    z = std::move(y);
  }
  return z;
}

std::vector<LinearExpr> input_variables(MilpModel& model, const Eigen::VectorXd& lower,
                                        const Eigen::VectorXd& upper) {
  std::vector<LinearExpr> in;
  for (int i = 0; i < lower.size(); ++i) {
    in.push_back(LinearExpr::variable(model.add_continuous(lower[i], upper[i], "in" + std::to_string(i))));
  }
  return in;
}

}  // namespace

NetworkBounds interval_bounds(const FeedforwardNetwork& net, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper) {
  check_box(lower, upper, net.input_dim());
  NetworkBounds out;
  Eigen::VectorXd lo = lower, hi = upper;
  for (int l = 0; l < net.layer_count(); ++l) {
    Eigen::VectorXd ylo, yhi;
    affine_interval(net.layer(l), lo, hi, ylo, yhi);
    if (l + 1 == net.layer_count()) {
      out.output_lower = ylo;
      out.output_upper = yhi;
      break;
    }
    out.lower.push_back(ylo);
    out.upper.push_back(yhi);
    lo = activate(ylo, net.leak_slope());
    hi = activate(yhi, net.leak_slope());
  }
  return out;
}

NetworkBounds lp_bounds(const FeedforwardNetwork& net, const Eigen::VectorXd& lower,
                        const Eigen::VectorXd& upper, const LpOptions& lp) {
  check_box(lower, upper, net.input_dim());
  NetworkBounds out;
  Eigen::VectorXd lo = lower, hi = upper;
  for (int l = 0; l < net.layer_count(); ++l) {
    Eigen::VectorXd ylo, yhi;
    affine_interval(net.layer(l), lo, hi, ylo, yhi);
    if (l > 0) {
      MilpModel base;
      std::vector<LinearExpr> in = input_variables(base, lower, upper);
      std::vector<LinearExpr> pre = encode_prefix(base, net, in, out, l, -1, "lpb");
      for (std::size_t i = 0; i < pre.size(); ++i) {
        for (double sign : {1.0, -1.0}) {
          MilpModel m = base;
          m.set_objective(pre[i].scaled(sign));
          LpSolution s = lp_solve(m, lp);
          if (s.status == LpStatus::Infeasible) {
            throw BoundPropagationError("LP bound problem is infeasible; earlier bounds are inconsistent");
          }
          if (s.status != LpStatus::Optimal) continue;
          double v = sign * s.objective;
          double slack = 1e-9 * (1.0 + std::abs(v));
          auto k = static_cast<Eigen::Index>(i);
          if (sign > 0) {
            yhi[k] = std::min(yhi[k], v + slack);
          } else {
            ylo[k] = std::max(ylo[k], v - slack);
          }
          if (ylo[k] > yhi[k]) ylo[k] = yhi[k] = 0.5 * (ylo[k] + yhi[k]);
        }
      }
    }
    if (l + 1 == net.layer_count()) {
      out.output_lower = ylo;
      out.output_upper = yhi;
      break;
    }
    out.lower.push_back(ylo);
    out.upper.push_back(yhi);
    lo = activate(ylo, net.leak_slope());
    hi = activate(yhi, net.leak_slope());
  }
  return out;
}

NetworkBounds compute_bounds(const FeedforwardNetwork& net, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, BoundMethod method) {
  return method == BoundMethod::Lp ? lp_bounds(net, lower, upper) : interval_bounds(net, lower, upper);
}

const NetworkBounds& BoundCache::get(const FeedforwardNetwork& net, const Eigen::VectorXd& lower,
                                     const Eigen::VectorXd& upper) {
  std::vector<double> key(lower.data(), lower.data() + lower.size());
  key.insert(key.end(), upper.data(), upper.data() + upper.size());
  auto k = std::make_pair(&net, std::move(key));
  auto it = cache_.find(k);
  if (it == cache_.end()) it = cache_.emplace(k, compute_bounds(net, lower, upper, method_)).first;
  return it->second;
}

LinearExpr encode_leaky_relu(MilpModel& model, const LinearExpr& y, double lower, double upper,
                             double c, const std::string& name) {
  if (!(lower <= upper)) throw BoundPropagationError("neuron " + name + " has lower > upper");
  if (lower >= 0.0) return y;
  if (upper <= 0.0) return y.scaled(c);
  int w = model.add_continuous(widen_lower(c * lower), widen_upper(upper), name + "_w");
  int beta = model.add_binary(name + "_b");
  LinearExpr wv = LinearExpr::variable(w);
  LinearExpr bv = LinearExpr::variable(beta);
  model.add_row(wv - y, RowSense::GreaterEqual, RowOrigin::Exact, name + "_ge_y");
  model.add_row(wv - y.scaled(c), RowSense::GreaterEqual, RowOrigin::Exact, name + "_ge_cy");
  // w <= c y - (c - 1) upper beta
  model.add_row(wv - y.scaled(c) + bv.scaled((c - 1.0) * upper), RowSense::LessEqual,
                RowOrigin::BoundDependent, name + "_le_up");
  // w <= y - (c - 1) lower (beta - 1)
  LinearExpr rhs = y - (bv - LinearExpr(1.0)).scaled((c - 1.0) * lower);
  model.add_row(wv - rhs, RowSense::LessEqual, RowOrigin::BoundDependent, name + "_le_lo");
  model.add_completion([y, w, beta, c](std::vector<double>& p) {
    double v = y.evaluate(p);
    p[static_cast<std::size_t>(w)] = leaky_relu(v, c);
    p[static_cast<std::size_t>(beta)] = v >= 0.0 ? 1.0 : 0.0;
  });
  return wv;
}

std::vector<LinearExpr> encode_relu_network(MilpModel& model, const FeedforwardNetwork& net,
                                            const std::vector<LinearExpr>& inputs,
                                            const NetworkBounds& bounds, int theta_offset,
                                            const std::string& name) {
  if (static_cast<int>(inputs.size()) != net.input_dim()) {
    throw ContractViolation("encode_relu_network: input count does not match network");
  }
  if (static_cast<int>(bounds.lower.size()) != net.layer_count() - 1) {
    throw BoundPropagationError("encode_relu_network: bounds do not cover every hidden layer");
  }
  return encode_prefix(model, net, inputs, bounds, net.layer_count() - 1, theta_offset, name);
}

LinearExpr encode_l1(MilpModel& model, const std::vector<LinearExpr>& t, const Eigen::VectorXd& lower,
                     const Eigen::VectorXd& upper, const std::string& name) {
  if (lower.size() != static_cast<Eigen::Index>(t.size()) || upper.size() != lower.size()) {
    throw ContractViolation("encode_l1: bounds do not match the expression count");
  }
  LinearExpr total;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double l = lower[static_cast<Eigen::Index>(i)];
    double u = upper[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(l) || !std::isfinite(u)) throw BoundPropagationError("encode_l1: unbounded dimension");
    if (!(l <= u)) throw BoundPropagationError("encode_l1: lower > upper");
    if (l >= 0.0) {
      total.add(t[i]);
      continue;
    }
    if (u <= 0.0) {
      total.add(t[i], -1.0);
      continue;
    }
    std::string base = name + "_" + std::to_string(i);
    int z = model.add_continuous(-1.0, widen_upper(std::max(-l, u)), base + "_z");
    int alpha = model.add_binary(base + "_a");
    LinearExpr zv = LinearExpr::variable(z);
    LinearExpr av = LinearExpr::variable(alpha);
    model.add_row(zv - t[i], RowSense::GreaterEqual, RowOrigin::Exact, base + "_ge_x");
    model.add_row(zv + t[i], RowSense::GreaterEqual, RowOrigin::Exact, base + "_ge_negx");
    // z <= x + 2 l (alpha - 1)
    model.add_row(zv - t[i] - (av - LinearExpr(1.0)).scaled(2.0 * l), RowSense::LessEqual,
                  RowOrigin::BoundDependent, base + "_le_lo");
    // z <= 2 u alpha - x
    model.add_row(zv - av.scaled(2.0 * u) + t[i], RowSense::LessEqual, RowOrigin::BoundDependent,
                  base + "_le_up");
    LinearExpr ti = t[i];
    model.add_completion([ti, z, alpha](std::vector<double>& p) {
      double v = ti.evaluate(p);
      p[static_cast<std::size_t>(z)] = std::abs(v);
      p[static_cast<std::size_t>(alpha)] = v >= 0.0 ? 1.0 : 0.0;
    });
    total.add(zv);
  }
  return total;
}

LinearExpr encode_clamp(MilpModel& model, const LinearExpr& x, double lo, double up, double x_lower,
                        double x_upper, const std::string& name) {
  if (!(lo < up)) throw ContractViolation("encode_clamp: needs lo < up");
  if (!(x_lower <= x_upper)) throw BoundPropagationError("encode_clamp: x bounds are empty");
  // r1 = ReLU(x - lo)
  LinearExpr a = x - LinearExpr(lo);
  LinearExpr r1 = encode_leaky_relu(model, a, x_lower - lo, x_upper - lo, 0.0, name + "_inner");
  double r1_lo = std::max(0.0, x_lower - lo);
  double r1_hi = std::max(0.0, x_upper - lo);
  // r2 = ReLU(up - (r1 + lo))
  LinearExpr b = LinearExpr(up - lo) - r1;
  LinearExpr r2 = encode_leaky_relu(model, b, up - lo - r1_hi, up - lo - r1_lo, 0.0, name + "_outer");
  return LinearExpr(up) - r2;
}

}  // namespace lyapnet::milp
