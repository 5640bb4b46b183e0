#include "lyapnet/plants/toy.hpp"

#include <cmath>
#include <random>

#include "lyapnet/errors.hpp"

namespace lyapnet::plants {

FeedforwardNetwork scalar_linear_dynamics(double a, double b, double c) {
  Eigen::MatrixXd w1 = Eigen::MatrixXd::Zero(4, 2);
  w1(0, 0) = 1.0;
  w1(1, 0) = -1.0;
  w1(2, 1) = 1.0;
  w1(3, 1) = -1.0;
  Eigen::MatrixXd w2(1, 4);
  w2 << a / (1 + c), -a / (1 + c), b / (1 + c), -b / (1 + c);
  return FeedforwardNetwork({{w1, Eigen::VectorXd::Zero(4)}, {w2, Eigen::VectorXd::Zero(1)}}, c);
}

namespace {

// k (sigma(x) + sigma(-x)) / (1 - c) = k |x| with the first output weight negated, plus small
// random units.
FeedforwardNetwork wrong_sign_abs(const std::vector<int>& hidden, double c, std::mt19937_64& rng) {
  FeedforwardNetwork net = FeedforwardNetwork::random(1, hidden, 1, c, rng, 0.1);
  std::vector<DenseLayer> layers = net.layers();
  if (hidden.size() != 1 || hidden[0] < 2) throw ContractViolation("perturbed toy needs one hidden layer of width >= 2");
  layers[0].weight(0, 0) = 1.0;
  layers[0].weight(1, 0) = -1.0;
  layers[0].bias[0] = layers[0].bias[1] = 0.0;
  layers[1].weight(0, 0) = -1.0 / (1 - c);
  layers[1].weight(0, 1) = 1.0 / (1 - c);
  return FeedforwardNetwork(std::move(layers), c);
}

}  // namespace

certify::CertificationProblem toy_problem(const ToyOptions& o) {
  if (!(o.v_scale > 0.1)) throw ContractViolation("toy v_scale must exceed the Sigma floor 0.1");
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd umin = Eigen::VectorXd::Constant(1, -1.0);
  Eigen::VectorXd umax = Eigen::VectorXd::Constant(1, 1.0);
  certify::CertificationProblem p{
      certify::Dynamics{scalar_linear_dynamics(o.a, 1.0, o.leak_slope), zero, zero, umin, umax},
      certify::Controller{FeedforwardNetwork::zeros(1, o.controller_hidden, 1, o.leak_slope), zero, zero, umin, umax},
      certify::LyapunovFunction::with_default_factors(FeedforwardNetwork::zeros(1, o.lyapunov_hidden, 1, o.leak_slope),
                                                      zero, Eigen::VectorXd::Constant(1, std::sqrt(o.v_scale - 0.1))),
      certify::Box{Eigen::VectorXd::Constant(1, -o.box), Eigen::VectorXd::Constant(1, o.box)},
      o.eps1,
      o.eps2};
  if (o.perturbed) {
    std::mt19937_64 rng(o.seed);
    p.controller.phi = FeedforwardNetwork::random(1, o.controller_hidden, 1, o.leak_slope, rng);
    p.lyapunov.phi = wrong_sign_abs(o.lyapunov_hidden, o.leak_slope, rng);
  }
  p.validate();
  return p;
}

}  // namespace lyapnet::plants
