#include "lyapnet/train/warm_start.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lyapnet/errors.hpp"
#include "lyapnet/log.hpp"
#include "lyapnet/train/optimizer.hpp"

namespace lyapnet::train {

LinearizedSystem linearize(const certify::Dynamics& d, double h) {
  const int nx = d.state_dim(), nu = d.control_dim();
  LinearizedSystem s{Eigen::MatrixXd(nx, nx), Eigen::MatrixXd(nx, nu)};
  for (int k = 0; k < nx; ++k) {
    Eigen::VectorXd e = h * Eigen::VectorXd::Unit(nx, k);
    s.a.col(k) = (d.next(d.x_eq + e, d.u_eq) - d.next(d.x_eq - e, d.u_eq)) / (2 * h);
  }
  for (int k = 0; k < nu; ++k) {
    Eigen::VectorXd e = h * Eigen::VectorXd::Unit(nu, k);
    s.b.col(k) = (d.next(d.x_eq, d.u_eq + e) - d.next(d.x_eq, d.u_eq - e)) / (2 * h);
  }
  return s;
}

Eigen::MatrixXd solve_dare(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                           const Eigen::MatrixXd& r, int max_iterations, double tol) {
  Eigen::MatrixXd s = q;
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::MatrixXd bs = b.transpose() * s;
    Eigen::MatrixXd next = a.transpose() * s * a - a.transpose() * s * b * (r + bs * b).ldlt().solve(bs * a) + q;
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) break;
    const double delta = (next - s).lpNorm<Eigen::Infinity>();
    s = std::move(next);
    const double scale = s.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(delta) || !std::isfinite(scale)) break;
    if (delta <= tol * std::max(1.0, scale)) return s;
  }
  throw NumericalFailure("Riccati iteration did not converge; is (A, B) stabilizable?");
}

Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& s,
                         const Eigen::MatrixXd& r) {
  Eigen::MatrixXd bs = b.transpose() * s;
  return (r + bs * b).ldlt().solve(bs * a);
}

namespace {

// Fits phi(x) - phi(x*) to the targets with Adam; returns the final mean squared error.
double fit_offset_network(FeedforwardNetwork& net, const Eigen::VectorXd& x_eq,
                          const std::vector<Eigen::VectorXd>& xs, const std::vector<Eigen::VectorXd>& ys,
                          const WarmStartOptions& o, std::mt19937_64& rng) {
  Optimizer adam;
  adam.kind = OptimizerKind::Adam;
  Eigen::VectorXd theta = net.pack();
  adam.reset(theta.size());
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  const int no = net.output_dim();
  auto mse = [&](const FeedforwardNetwork& n) {
    Eigen::VectorXd base = n.evaluate(x_eq);
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) acc += (n.evaluate(xs[i]) - base - ys[i]).squaredNorm();
    return acc / static_cast<double>(xs.size() * static_cast<std::size_t>(no));
  };
  for (int e = 0; e < o.epochs; ++e) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t b = 0; b < idx.size(); b += o.batch_size) {
      FeedforwardNetwork cur = net.with_parameters(theta);
      const std::size_t end = std::min(idx.size(), b + o.batch_size);
      const double w = 2.0 / static_cast<double>((end - b) * static_cast<std::size_t>(no));
      Eigen::VectorXd base = cur.evaluate(x_eq);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
      Eigen::VectorXd eq_cot = Eigen::VectorXd::Zero(no);
      for (std::size_t k = b; k < end; ++k) {
        const std::size_t i = idx[k];
        Eigen::VectorXd cot = w * (cur.evaluate(xs[i]) - base - ys[i]);
        g += cur.grad_params(xs[i], cot);
        eq_cot += cot;
      }
      g -= cur.grad_params(x_eq, eq_cot);
      adam.step(theta, g, o.learning_rate);
    }
  }
  net = net.with_parameters(theta);
  return mse(net);
}

}  // namespace

certify::CertificationProblem lqr_warm_start(const certify::CertificationProblem& p0, const WarmStartOptions& o,
                                             WarmStartReport* report) {
  p0.validate();
  if (o.samples == 0 || o.epochs <= 0 || o.batch_size == 0 || !(o.learning_rate > 0.0) ||
      !(o.state_weight > 0.0) || !(o.control_weight > 0.0)) {
    throw ConfigError("warm start options must be positive");
  }
  certify::CertificationProblem p = p0;
  const int nx = p.state_dim(), nu = p.dynamics.control_dim();
  LinearizedSystem lin = linearize(p.dynamics);
  Eigen::MatrixXd q = o.state_weight * Eigen::MatrixXd::Identity(nx, nx);
  Eigen::MatrixXd r = o.control_weight * Eigen::MatrixXd::Identity(nu, nu);
  WarmStartReport rep;
  rep.riccati = solve_dare(lin.a, lin.b, q, r);
  rep.gain = lqr_gain(lin.a, lin.b, rep.riccati, r);

  std::mt19937_64 rng(o.seed);
  std::vector<Eigen::VectorXd> xs, us;
  for (std::size_t i = 0; i < o.samples; ++i) {
    Eigen::VectorXd x(nx);
    for (int j = 0; j < nx; ++j) {
      x[j] = std::uniform_real_distribution<double>(p.box.lower[j], p.box.upper[j])(rng);
    }
    us.push_back(-rep.gain * (x - p.dynamics.x_eq));
    xs.push_back(std::move(x));
  }
  rep.controller_mse = fit_offset_network(p.controller.phi, p.controller.x_eq, xs, us, o, rng);

  Eigen::EigenSolver<Eigen::MatrixXd> eig(lin.a - lin.b * rep.gain);
  rep.closed_loop_eigenvalues = eig.eigenvalues();
  Eigen::MatrixXd target;
  if (eig.eigenvalues().imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::MatrixXd w = eig.eigenvectors().real();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(w);
    if (lu.isInvertible()) {
      target = lu.inverse();
      rep.eigenvector_norm = true;
    }
  }
  if (!rep.eigenvector_norm) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.riccati);
    target = es.operatorSqrt();
  }
  // Scale so that the smallest singular value of R is 1 + min(Sigma).
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(target, Eigen::ComputeFullU | Eigen::ComputeFullV);
  certify::LyapunovFunction& l = p.lyapunov;
  const double floor = l.sigma.minCoeff();
  const Eigen::VectorXd sv = svd.singularValues() * ((1.0 + floor) / svd.singularValues().minCoeff());
  l.u_factor = svd.matrixU();
  l.v_factor = svd.matrixV();
  l.sigma = Eigen::VectorXd::Constant(nx, floor);
  l.r = (sv - l.sigma).cwiseMax(0.0).cwiseSqrt();

  std::vector<DenseLayer> layers = l.phi.layers();
  layers.back().weight *= 1e-3;
  layers.back().bias.setZero();
  l.phi = FeedforwardNetwork(std::move(layers), l.phi.leak_slope());
  l.validate();

  log_record(LogLevel::Info, {{"event", "warm_start"},
                              {"controller_mse", rep.controller_mse},
                              {"eigenvector_norm", rep.eigenvector_norm}});
  if (report) *report = std::move(rep);
  return p;
}

}  // namespace lyapnet::train
