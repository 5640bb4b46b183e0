#include "lyapnet/plants/simulate.hpp"

#include <fstream>

#include "lyapnet/errors.hpp"

namespace lyapnet::plants {

TrajectoryRecord simulate(const StepFunction& step, const certify::Controller& controller,
                          const certify::LyapunovFunction& lyapunov, const Eigen::VectorXd& x0,
                          const SimulateOptions& o) {
  if (!x0.allFinite()) throw ContractViolation("initial state must be finite");
  if (o.horizon < 0) throw ContractViolation("horizon must be nonnegative");
  TrajectoryRecord rec;
  Eigen::VectorXd x = x0;
  for (int k = 0;; ++k) {
    Eigen::VectorXd u = certify::eval_controller(controller, x);
    rec.t.push_back(k * o.dt);
    rec.x.push_back(x);
    rec.u.push_back(u);
    rec.V.push_back(certify::eval_V(lyapunov, x));
    if (k == o.horizon) break;
    Eigen::VectorXd next = step(x, u);
    if (!next.allFinite() || next.norm() > o.blowup_norm) {
      rec.diverged = true;
      return rec;
    }
    x = std::move(next);
  }
  rec.converged = (x - lyapunov.x_eq).norm() <= o.convergence_tol;
  return rec;
}

StepFunction network_step(const certify::Dynamics& dynamics) {
  return [dynamics](const Eigen::VectorXd& x, const Eigen::VectorXd& u) { return dynamics.next(x, u); };
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& r) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.precision(17);
  const Eigen::Index nx = r.x.empty() ? 0 : r.x.front().size();
  const Eigen::Index nu = r.u.empty() ? 0 : r.u.front().size();
  out << 't';
  for (Eigen::Index i = 0; i < nx; ++i) out << ",x" << i;
  for (Eigen::Index i = 0; i < nu; ++i) out << ",u" << i;
  out << ",V\n";
  for (std::size_t k = 0; k < r.size(); ++k) {
    out << r.t[k];
    for (Eigen::Index i = 0; i < nx; ++i) out << ',' << r.x[k][i];
    for (Eigen::Index i = 0; i < nu; ++i) out << ',' << r.u[k][i];
    out << ',' << r.V[k] << '\n';
  }
}

}  // namespace lyapnet::plants
