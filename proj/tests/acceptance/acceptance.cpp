// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "lyapnet/certify/verify.hpp"
#include "lyapnet/errors.hpp"
#include "lyapnet/experiment/pipeline.hpp"
#include "lyapnet/milp/active_set.hpp"
#include "lyapnet/milp/branch_and_bound.hpp"
#include "lyapnet/milp/encode.hpp"
#include "lyapnet/plants/simulate.hpp"
#include "random_milp.hpp"
#include "random_problem.hpp"

using namespace lyapnet;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(LYAPNET_SOURCE_DIR) / "configs";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void run(int id, const char* name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= limit_seconds;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("[%s] %d %s: %s (%.1f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
              limit_seconds, in_time ? "" : ", exceeded");
  std::fflush(stdout);
}

// |a - b| / max(|a|, |b|, floor); the floor sits above the roundoff of a central difference.
constexpr double kGradFloor = 1e-5;

double rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

FeedforwardNetwork random_net(std::mt19937_64& rng, int& in) {
  std::uniform_int_distribution<int> dim(1, 3), depth(1, 3), width(1, 6);
  std::uniform_real_distribution<double> leak(0.0, 0.5);
  in = dim(rng);
  std::vector<int> hidden;
  int total = 0;
  for (int l = depth(rng); l > 0; --l) {
    int w = std::min(width(rng), 16 - total);
    if (w <= 0) break;
    hidden.push_back(w);
    total += w;
  }
  return FeedforwardNetwork::random(in, hidden, dim(rng), leak(rng), rng);
}

bool near_kink(const FeedforwardNetwork& net, const Eigen::VectorXd& x, double margin) {
  for (const Eigen::VectorXd& y : net.forward(x).preactivations) {
    if ((y.array().abs() < margin).any()) return true;
  }
  return false;
}

Outcome encoding_exactness() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int nets = 0, inputs = 0;
  for (; nets < 100; ++nets) {
    int in = 0;
    FeedforwardNetwork net = random_net(rng, in);
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(in, -1.0), hi = Eigen::VectorXd::Constant(in, 1.0);
    milp::MilpModel model;
    std::vector<milp::LinearExpr> xs;
    std::vector<int> vars;
    for (int i = 0; i < in; ++i) {
      vars.push_back(model.add_continuous(-1.0, 1.0));
      xs.push_back(milp::LinearExpr::variable(vars.back()));
    }
    auto out = milp::encode_relu_network(model, net, xs, milp::interval_bounds(net, lo, hi));
    for (int s = 0; s < 20; ++s, ++inputs) {
      Eigen::VectorXd x(in);
      milp::MilpModel fixed = model;
      for (int i = 0; i < in; ++i) {
        x[i] = u(rng);
        fixed.set_bounds(vars[static_cast<std::size_t>(i)], x[i], x[i]);
      }
      Eigen::VectorXd y = net.evaluate(x);
      for (std::size_t k = 0; k < out.size(); ++k) {
        for (double sign : {1.0, -1.0}) {
          fixed.set_objective(out[k].scaled(sign));
          milp::SolveResult r = milp::solve(fixed);
          if (r.status != milp::SolveStatus::Optimal) return {false, fmt("net %d input %d not optimal", nets, s)};
          worst = std::max(worst, std::abs(sign * r.best_objective - y[static_cast<Eigen::Index>(k)]));
        }
      }
    }
  }
  return {worst <= 1e-6, fmt("%d nets x 20 inputs, max |milp - forward| = %.2e (tol 1e-6)", nets, worst)};
}

Outcome solver_oracle() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  int models = 0;
  for (; models < 60; ++models) {
    const int binaries = 1 + models % 12;
    milp::MilpModel model = testing::random_milp(rng, binaries, 3);
    milp::SolveResult r = milp::solve(model);
    const double oracle = testing::enumeration_oracle(model);
    if (r.status != milp::SolveStatus::Optimal) return {false, fmt("model %d status %s", models, milp::to_string(r.status))};
    worst = std::max(worst, std::abs(r.best_objective - oracle));
  }
  return {worst <= 1e-6, fmt("%d models with 1..12 binaries, max |solve - enumeration| = %.2e (tol 1e-6)", models, worst)};
}

Outcome network_gradients(int& compared) {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    int in = 0;
    FeedforwardNetwork net = random_net(rng, in);
    Eigen::VectorXd x(in), cot(net.output_dim());
    for (int i = 0; i < in; ++i) x[i] = u(rng);
    for (int i = 0; i < cot.size(); ++i) cot[i] = u(rng);
    if (near_kink(net, x, 1e-3)) continue;
    auto value = [&](const FeedforwardNetwork& n, const Eigen::VectorXd& z) { return cot.dot(n.evaluate(z)); };
    Eigen::VectorXd theta = net.pack(), gp = net.grad_params(x, cot), gi = net.grad_input(x, cot);
    for (Eigen::Index k = 0; k < theta.size(); ++k, ++compared) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      double fd = (value(net.with_parameters(tp), x) - value(net.with_parameters(tm), x)) / (2 * h);
      worst = std::max(worst, rel_err(gp[k], fd, kGradFloor));
    }
    for (int k = 0; k < in; ++k, ++compared) {
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      worst = std::max(worst, rel_err(gi[k], (value(net, xp) - value(net, xm)) / (2 * h), kGradFloor));
    }
  }
  return {worst <= 1e-4, fmt("max rel err %.2e (tol 1e-4)", worst)};
}

Outcome mip_gradients(int& compared) {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  const double h = 1e-6;
  for (int trial = 0; trial < 6; ++trial) {
    certify::CertificationProblem p = test_support::random_problem(rng, 0.5, 0.5);
    Eigen::VectorXd theta = certify::pack_theta(p);
    for (bool decrease : {false, true}) {
      auto build = [&](const Eigen::VectorXd& t) {
        certify::CertificationProblem q = certify::with_theta(p, t);
        return decrease ? certify::build_decrease_mip(q) : certify::build_positivity_mip(q);
      };
      certify::VerificationMip mip = build(theta);
      milp::SolveResult r = milp::solve(mip.model);
      milp::ActiveSetCertificate cert;
      Eigen::VectorXd g;
      try {
        cert = milp::extract_active_set(mip.model, r);
        g = milp::mip_objective_gradient(mip.model, cert, mip.theta_dim);
      } catch (const DegenerateActiveSet&) {
        continue;
      }
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp[k] += h;
        tm[k] -= h;
        certify::VerificationMip mp = build(tp), mm = build(tm);
        milp::SolveResult rp = milp::solve(mp.model), rm = milp::solve(mm.model);
        try {
          if (milp::extract_active_set(mp.model, rp).binary_assignment != cert.binary_assignment ||
              milp::extract_active_set(mm.model, rm).binary_assignment != cert.binary_assignment) {
            continue;
          }
        } catch (const DegenerateActiveSet&) {
          continue;
        }
        worst = std::max(worst, rel_err(g[k], (rp.best_objective - rm.best_objective) / (2 * h), kGradFloor));
        ++compared;
      }
    }
  }
  return {worst <= 1e-3, fmt("max rel err %.2e (tol 1e-3)", worst)};
}

Outcome gradient_suites() {
  int net_count = 0, mip_count = 0;
  Outcome a = network_gradients(net_count);
  Outcome b = mip_gradients(mip_count);
  const bool enough = net_count >= 1000 && mip_count >= 200;
  return {a.pass && b.pass && enough, fmt("network %d partials, %s; MIP objective %d partials, %s", net_count,
                                          a.detail.c_str(), mip_count, b.detail.c_str())};
}

Outcome toy_end_to_end(int algorithm) {
  experiment::ExperimentConfig c = experiment::load_config(kConfigs / "toy1d.json");
  c.synthesis.algorithm = algorithm;
  certify::CertificationProblem p = experiment::initial_problem(c);
  if (certify::verify(p, c.verify_options()).certified) return {false, "initialization is already certified"};
  experiment::SynthesisResult r = experiment::synthesize(c, p);
  certify::VerifyReport v = certify::verify(r.problem, c.verify_options());
  const bool pass = r.certified && v.certified && v.positivity.value <= 1e-6 && v.decrease.value <= 1e-6;
  return {pass, fmt("%d iterations, positivity max %.2e, decrease max %.2e (tol 1e-6)%s", r.state.iteration,
                    v.positivity.value, v.decrease.value, r.failure.empty() ? "" : (" " + r.failure).c_str())};
}

struct PendulumRun {
  bool ready = false;
  experiment::ExperimentConfig config;
  std::optional<certify::CertificationProblem> problem;
  double rho = 0.0;
};

Outcome pendulum_small(PendulumRun& run) {
  run.config = experiment::load_config(kConfigs / "pendulum_small.json");
  const experiment::ExperimentConfig& c = run.config;
  plants::FitReport fit = experiment::fit_dynamics(c);
  if (!fit.converged) return {false, fmt("dynamics fit holdout mse %.2e above target", fit.holdout_mse)};
  experiment::SynthesisResult r = experiment::synthesize(c, experiment::initial_problem(c, &fit.network));
  if (!r.certified) return {false, "synthesis did not certify: " + r.failure};
  certify::RoaResult roa = certify::roa_level(r.problem, c.verify_options());
  run.problem = r.problem;
  run.rho = roa.rho;
  run.ready = true;
  if (!(roa.rho > 0.0)) return {false, fmt("rho = %.3e", roa.rho)};

  const certify::CertificationProblem& p = *run.problem;
  std::mt19937_64 rng(c.seed);
  int converged = 0, decrease_violations = 0, escapes = 0;
  for (const Eigen::VectorXd& x0 : experiment::sample_sublevel_set(p, roa.rho, 1000, rng)) {
    plants::TrajectoryRecord t = plants::simulate(plants::network_step(p.dynamics), p.controller, p.lyapunov, x0,
                                                  c.simulate);
    if (t.converged) ++converged;
    for (std::size_t k = 1; k < t.size(); ++k) {
      if (t.V[k] > (1 - p.eps2) * t.V[k - 1] + 1e-6) ++decrease_violations;
      if (t.V[k] > roa.rho + 1e-6 || !p.box.contains(t.x[k])) ++escapes;
    }
  }
  const bool pass = converged == 1000 && decrease_violations == 0 && escapes == 0;
  return {pass, fmt("fit mse %.2e, certified after %d iterations, rho %.4g, %d/1000 converged, %d decrease "
                    "violations, %d sublevel exits",
                    fit.holdout_mse, r.state.iteration, roa.rho, converged, decrease_violations, escapes)};
}

Outcome pendulum_true_plant(const PendulumRun& run) {
  if (!run.ready || !(run.rho > 0.0)) return {false, "no certified pendulum controller from criterion 5"};
  const certify::CertificationProblem& p = *run.problem;
  std::mt19937_64 rng(run.config.seed + 1);
  plants::StepFunction step = experiment::plant_step(run.config);
  int converged = 0;
  for (const Eigen::VectorXd& x0 : experiment::sample_sublevel_set(p, run.rho, 100, rng)) {
    if (plants::simulate(step, p.controller, p.lyapunov, x0, run.config.simulate).converged) ++converged;
  }
  return {converged >= 90, fmt("%d/100 rollouts converge to the upright equilibrium (floor 90)", converged)};
}

Outcome pendulum_full() {
  experiment::ExperimentConfig c = experiment::load_config(kConfigs / "pendulum_full.json");
  plants::FitReport fit = experiment::fit_dynamics(c);
  experiment::SynthesisResult r = experiment::synthesize(c, experiment::initial_problem(c, &fit.network));
  std::string stages;
  for (const experiment::StageRecord& s : r.stages) stages += s.certified ? "+" : "-";
  return {r.certified, fmt("fit mse %.2e, stages %s, %d iterations, %.0f s%s", fit.holdout_mse, stages.c_str(),
                           r.state.iteration, r.seconds, r.failure.empty() ? "" : (", " + r.failure).c_str())};
}

}  // namespace

int main() {
  run(1, "encoding exactness", 60, encoding_exactness);
  run(2, "solver oracle equivalence", 120, solver_oracle);
  run(3, "gradient suites", 120, gradient_suites);
  run(4, "toy end-to-end, algorithm 1", 300, [] { return toy_end_to_end(1); });
  run(4, "toy end-to-end, algorithm 2", 300, [] { return toy_end_to_end(2); });
  PendulumRun pendulum;
  run(5, "pendulum small box", 1800, [&] { return pendulum_small(pendulum); });
  run(6, "pendulum true-dynamics rollouts", 600, [&] { return pendulum_true_plant(pendulum); });

  const char* extended = std::getenv("LYAPNET_RUN_EXTENDED");
  if (extended && std::string(extended) == "1") {
    const int gating = failures;
    run(7, "full pendulum box (non-gating)", 6 * 3600, pendulum_full);
    failures = gating;
  } else {
    std::printf("[SKIPPED] 7 full pendulum box (non-gating): set LYAPNET_RUN_EXTENDED=1 to run the 6 h schedule\n");
  }
  std::printf("[EXCLUDED] 8 quadrotor rollout comparison, timing table and 3D quadrotor results: not reproducible "
              "at desk scale\n");
  std::printf("%s: %d gating failure(s)\n", failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED", failures);
  return failures == 0 ? 0 : 1;
}
