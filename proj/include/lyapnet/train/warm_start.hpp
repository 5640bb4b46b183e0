#pragma once

#include <cstdint>

#include "lyapnet/certify/problem.hpp"

namespace lyapnet::train {

/// Jacobians of the learned dynamics at the equilibrium.
struct LinearizedSystem {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
};

/// Central differences of x_{t+1} = f(x, u) around (x*, u*).
LinearizedSystem linearize(const certify::Dynamics& dynamics, double step = 1e-4);

/// Discrete algebraic Riccati equation S = A'SA - A'SB (R + B'SB)^-1 B'SA + Q by fixed-point
/// iteration. Throws NumericalFailure when it does not converge.
Eigen::MatrixXd solve_dare(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                           const Eigen::MatrixXd& r, int max_iterations = 200000, double tol = 1e-10);

/// K = (R + B'SB)^-1 B'SA, so that u = u* - K (x - x*).
Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& s,
                         const Eigen::MatrixXd& r);

struct WarmStartOptions {
  double state_weight = 1.0;    // Q = state_weight * I
  double control_weight = 1.0;  // R = control_weight * I
  std::size_t samples = 4000;
  int epochs = 300;
  std::size_t batch_size = 128;
  double learning_rate = 3e-3;
  std::uint64_t seed = 0;
};

struct WarmStartReport {
  Eigen::MatrixXd gain;
  Eigen::MatrixXd riccati;
  Eigen::VectorXcd closed_loop_eigenvalues;
  /// R came from the closed-loop eigenvectors (real spectrum) rather than S^(1/2).
  bool eigenvector_norm = false;
  double controller_mse = 0.0;
};

/// Regresses the controller onto the LQR law u* - K (x - x*) over uniform box samples and
/// sets R so that |R (x - x*)|_1 is a Lyapunov function of the linearized closed loop:
/// R = W^-1 for real closed-loop eigenvectors W, otherwise R = S^(1/2). The R factors are
/// taken from the SVD of that matrix and phi_V is scaled down to a small perturbation.
certify::CertificationProblem lqr_warm_start(const certify::CertificationProblem& p, const WarmStartOptions& options,
                                             WarmStartReport* report = nullptr);

}  // namespace lyapnet::train
