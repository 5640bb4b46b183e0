#pragma once

#include <filesystem>
#include <vector>

#include "lyapnet/certify/problem.hpp"
#include "lyapnet/plants/fit.hpp"

namespace lyapnet::plants {

struct TrajectoryRecord {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> u;
  std::vector<double> V;
  /// |x_T - x*| <= convergence_tol at the horizon.
  bool converged = false;
  /// The state became non-finite or exceeded the blow-up norm; the record stops there.
  bool diverged = false;

  std::size_t size() const { return t.size(); }
};

struct SimulateOptions {
  int horizon = 1000;
  double dt = 0.01;
  double convergence_tol = 1e-2;
  double blowup_norm = 1e6;
};

/// Rolls out x_{t+1} = step(x_t, pi(x_t)) and records V along the way.
TrajectoryRecord simulate(const StepFunction& step, const certify::Controller& controller,
                          const certify::LyapunovFunction& lyapunov, const Eigen::VectorXd& x0,
                          const SimulateOptions& options = {});

/// The learned closed loop x_{t+1} = phi_dyn(x, u) - phi_dyn(x*, u*) + x*.
StepFunction network_step(const certify::Dynamics& dynamics);

/// Columns t, x0..x{n-1}, u0..u{m-1}, V.
void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& record);

}  // namespace lyapnet::plants
