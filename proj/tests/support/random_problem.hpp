#pragma once

#include <random>

#include "lyapnet/certify/problem.hpp"

namespace lyapnet::test_support {

/// Random 2-state, 1-control problem with small networks on the box [-1, 1]^2.
inline certify::CertificationProblem random_problem(std::mt19937_64& rng, double eps1 = 0.1,
                                                    double eps2 = 0.1) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  Eigen::Vector2d x_eq(u(rng), u(rng));
  Eigen::VectorXd u_eq = Eigen::VectorXd::Constant(1, u(rng));
  Eigen::VectorXd umin = Eigen::VectorXd::Constant(1, -1.0);
  Eigen::VectorXd umax = Eigen::VectorXd::Constant(1, 1.0);
  certify::CertificationProblem p{
      certify::Dynamics{FeedforwardNetwork::random(3, {4}, 2, 0.1, rng), x_eq, u_eq, umin, umax},
      certify::Controller{FeedforwardNetwork::random(2, {3}, 1, 0.1, rng, 2.0), x_eq, u_eq, umin, umax},
      certify::LyapunovFunction::with_default_factors(FeedforwardNetwork::random(2, {4, 3}, 1, 0.1, rng), x_eq,
                                                      Eigen::Vector2d(0.8 + u(rng), 0.8 + u(rng))),
      certify::Box{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)},
      eps1,
      eps2};
  return p;
}

}  // namespace lyapnet::test_support
