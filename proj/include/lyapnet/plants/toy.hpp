#pragma once

#include <cstdint>

#include "lyapnet/certify/problem.hpp"

namespace lyapnet::plants {

/// Exact network for x_next = a x + b u: hidden units [x, -x, u, -u] and
/// output a/(1+c) (h1 - h2) + b/(1+c) (h3 - h4).
FeedforwardNetwork scalar_linear_dynamics(double a, double b, double leak_slope);

struct ToyOptions {
  double a = 0.5;
  double leak_slope = 0.1;
  double box = 1.0;
  double eps1 = 0.5;
  double eps2 = 0.1;
  /// The Lyapunov candidate is phi_V + |R x| with R = v_scale (phi_V starts at zero).
  double v_scale = 1.0;
  std::vector<int> controller_hidden{2};
  std::vector<int> lyapunov_hidden{4};
  /// Random controller and a Lyapunov network built from |x| with one output weight of the
  /// wrong sign, so that the initial candidate violates both conditions.
  bool perturbed = false;
  std::uint64_t seed = 0;
};

/// Scalar system x_next = a x + u with x* = 0, u* = 0, |u| <= 1 on the box [-box, box].
/// Unperturbed, the controller and phi_V are zero networks, so u = 0 and V = v_scale |x|.
certify::CertificationProblem toy_problem(const ToyOptions& options = {});

}  // namespace lyapnet::plants
