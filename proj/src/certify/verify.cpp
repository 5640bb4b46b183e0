#include "lyapnet/certify/verify.hpp"

#include <cstdlib>
#include <future>

#include "lyapnet/errors.hpp"
#include "lyapnet/io/weights.hpp"

namespace lyapnet::certify {

using milp::BoundCache;
using milp::LinearExpr;
using milp::MilpModel;
using milp::NetworkBounds;
using milp::Tracked;

namespace {

struct StateEncoding {
  std::vector<int> vars;
  std::vector<LinearExpr> x;
};

StateEncoding add_state(MilpModel& model, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  StateEncoding s;
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    s.vars.push_back(model.add_continuous(lower[i], upper[i], "x" + std::to_string(i)));
    s.x.push_back(LinearExpr::variable(s.vars.back()));
  }
  return s;
}

Tracked tracked_constant(double value, const Eigen::VectorXd& grad, int offset) {
  milp::SparseGrad g;
  for (Eigen::Index k = 0; k < grad.size(); ++k) {
    if (grad[k] != 0.0) g.emplace_back(offset + static_cast<int>(k), grad[k]);
  }
  return Tracked(value, std::move(g));
}

Tracked tracked_R(const LyapunovFunction& l, const Eigen::MatrixXd& R, int i, int j, int r_offset) {
  milp::SparseGrad g;
  for (int k = 0; k < l.state_dim(); ++k) {
    double d = 2.0 * l.r[k] * l.u_factor(i, k) * l.v_factor(j, k);
    if (d != 0.0) g.emplace_back(r_offset + k, d);
  }
  return Tracked(R(i, j), std::move(g));
}

// phi_V(x) - phi_V(x*) with provenance.
LinearExpr encode_lyapunov_net(MilpModel& model, const LyapunovFunction& l,
                               const std::vector<LinearExpr>& x, const NetworkBounds& bounds,
                               const ParameterLayout& layout, const std::string& name) {
  auto out = milp::encode_relu_network(model, l.phi, x, bounds, layout.lyapunov_offset, name);
  Eigen::VectorXd g = l.phi.grad_params(l.x_eq, Eigen::VectorXd::Ones(1));
  LinearExpr e = out[0];
  e.add_constant(-tracked_constant(l.phi.evaluate(l.x_eq)[0], g, layout.lyapunov_offset));
  return e;
}

// |R (x - x*)|_1 for x in [lower, upper].
LinearExpr encode_r_norm(MilpModel& model, const LyapunovFunction& l, const std::vector<LinearExpr>& x,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const ParameterLayout& layout, const std::string& name) {
  const int n = l.state_dim();
  Eigen::MatrixXd R = l.R();
  std::vector<LinearExpr> t(static_cast<std::size_t>(n));
  Eigen::VectorXd tlo = Eigen::VectorXd::Zero(n), thi = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      t[static_cast<std::size_t>(i)].add(x[static_cast<std::size_t>(j)] - LinearExpr(l.x_eq[j]),
                                         tracked_R(l, R, i, j, layout.r_offset));
      double a = R(i, j) * (lower[j] - l.x_eq[j]);
      double b = R(i, j) * (upper[j] - l.x_eq[j]);
      tlo[i] += std::min(a, b);
      thi[i] += std::max(a, b);
    }
  }
  return milp::encode_l1(model, t, tlo, thi, name);
}

// V(x) = phi_V(x) - phi_V(x*) + |R (x - x*)|_1.
LinearExpr encode_V(MilpModel& model, BoundCache& cache, const LyapunovFunction& l,
                    const std::vector<LinearExpr>& x, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper, const ParameterLayout& layout, const std::string& name) {
  LinearExpr v = encode_lyapunov_net(model, l, x, cache.get(l.phi, lower, upper), layout, name + "_net");
  v.add(encode_r_norm(model, l, x, lower, upper, layout, name + "_l1"));
  return v;
}

}  // namespace

Eigen::VectorXd VerificationMip::state_of(const std::vector<double>& point) const {
  Eigen::VectorXd x(static_cast<Eigen::Index>(state_vars.size()));
  for (std::size_t i = 0; i < state_vars.size(); ++i) {
    x[static_cast<Eigen::Index>(i)] = point.at(static_cast<std::size_t>(state_vars[i]));
  }
  return x;
}

std::vector<double> VerificationMip::complete_at(const Eigen::VectorXd& x) const {
  std::vector<double> point(static_cast<std::size_t>(model.variable_count()), 0.0);
  for (std::size_t i = 0; i < state_vars.size(); ++i) {
    point[static_cast<std::size_t>(state_vars[i])] = x[static_cast<Eigen::Index>(i)];
  }
  model.complete(point);
  return point;
}

milp::SolveOptions VerificationMip::solve_options(const milp::SolveOptions& base,
                                                  const Eigen::VectorXd& x_start) const {
  milp::SolveOptions o = base;
  o.pool_key_vars = state_vars;
  o.heuristic_inputs = state_vars;
  o.initial_inputs.clear();
  for (std::size_t i = 0; i < state_vars.size(); ++i) {
    const milp::Variable& v = model.variable(state_vars[i]);
    o.initial_inputs.push_back(std::clamp(x_start[static_cast<Eigen::Index>(i)], v.lower, v.upper));
  }
  return o;
}

VerificationMip build_positivity_mip(const CertificationProblem& p, const MipBuildOptions& options) {
  p.validate();
  ParameterLayout layout = ParameterLayout::of(p);
  BoundCache cache(options.bound_method);
  VerificationMip mip;
  mip.theta_dim = layout.size();
  StateEncoding s = add_state(mip.model, p.box.lower, p.box.upper);
  mip.state_vars = s.vars;
  const LyapunovFunction& l = p.lyapunov;
  LinearExpr net = encode_lyapunov_net(mip.model, l, s.x, cache.get(l.phi, p.box.lower, p.box.upper),
                                       layout, "V");
  LinearExpr norm = encode_r_norm(mip.model, l, s.x, p.box.lower, p.box.upper, layout, "V_l1");
  // eps1 |R(x - x*)|_1 - (phi_V(x) - phi_V(x*) + |R(x - x*)|_1), sharing one 1-norm encoding.
  LinearExpr objective = norm.scaled(p.eps1 - 1.0);
  objective.add(net, -1.0);
  mip.model.set_objective(objective);
  return mip;
}

VerificationMip build_decrease_mip(const CertificationProblem& p, const MipBuildOptions& options) {
  p.validate();
  ParameterLayout layout = ParameterLayout::of(p);
  BoundCache cache(options.bound_method);
  VerificationMip mip;
  mip.theta_dim = layout.size();
  MilpModel& model = mip.model;
  const int nx = p.state_dim();
  const int nu = p.dynamics.control_dim();
  StateEncoding s = add_state(model, p.box.lower, p.box.upper);
  mip.state_vars = s.vars;

  // Controller followed by the input clamp.
  const Controller& c = p.controller;
  const NetworkBounds& cb = cache.get(c.phi, p.box.lower, p.box.upper);
  auto raw = milp::encode_relu_network(model, c.phi, s.x, cb, layout.controller_offset, "pi");
  Eigen::VectorXd phi_star = c.phi.evaluate(c.x_eq);
  std::vector<LinearExpr> u(static_cast<std::size_t>(nu));
  Eigen::VectorXd u_lo(nu), u_hi(nu);
  for (int k = 0; k < nu; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(nu, k);
    Tracked shift = -tracked_constant(phi_star[k], c.phi.grad_params(c.x_eq, e), layout.controller_offset) +
                    Tracked(c.u_eq[k]);
    LinearExpr pre = raw[static_cast<std::size_t>(k)];
    pre.add_constant(shift);
    double lo = cb.output_lower[k] - phi_star[k] + c.u_eq[k];
    double hi = cb.output_upper[k] - phi_star[k] + c.u_eq[k];
    u[static_cast<std::size_t>(k)] =
        milp::encode_clamp(model, pre, c.u_min[k], c.u_max[k], lo, hi, "u" + std::to_string(k));
    u_lo[k] = milp::clamp_value(lo, c.u_min[k], c.u_max[k]);
    u_hi[k] = milp::clamp_value(hi, c.u_min[k], c.u_max[k]);
  }

  // Dynamics.
  const Dynamics& d = p.dynamics;
  Eigen::VectorXd in_lo(nx + nu), in_hi(nx + nu), eq(nx + nu);
  in_lo << p.box.lower, u_lo;
  in_hi << p.box.upper, u_hi;
  eq << d.x_eq, d.u_eq;
  std::vector<LinearExpr> xu = s.x;
  xu.insert(xu.end(), u.begin(), u.end());
  const NetworkBounds& db = cache.get(d.phi, in_lo, in_hi);
  auto fx = milp::encode_relu_network(model, d.phi, xu, db, -1, "dyn");
  Eigen::VectorXd shift = d.x_eq - d.phi.evaluate(eq);
  std::vector<LinearExpr> next(static_cast<std::size_t>(nx));
  Eigen::VectorXd next_lo(nx), next_hi(nx);
  for (int i = 0; i < nx; ++i) {
    next[static_cast<std::size_t>(i)] = fx[static_cast<std::size_t>(i)];
    next[static_cast<std::size_t>(i)].add_constant(shift[i]);
    next_lo[i] = db.output_lower[i] + shift[i];
    next_hi[i] = db.output_upper[i] + shift[i];
  }

  const LyapunovFunction& l = p.lyapunov;
  LinearExpr v_next = encode_V(model, cache, l, next, next_lo, next_hi, layout, "Vn");
  LinearExpr v_now = encode_V(model, cache, l, s.x, p.box.lower, p.box.upper, layout, "V");
  LinearExpr objective = v_next;
  objective.add(v_now, p.eps2 - 1.0);
  model.set_objective(objective);
  return mip;
}

const char* to_string(VerifyStatus status) {
  switch (status) {
    case VerifyStatus::Certified: return "certified";
    case VerifyStatus::Violated: return "violated";
    case VerifyStatus::Undetermined: return "undetermined";
  }
  return "unknown";
}

namespace {

ConditionOutcome solve_condition(VerificationMip mip, const CertificationProblem& p,
                                 const VerifyOptions& options, const std::string& label) {
  ConditionOutcome out;
  milp::SolveOptions so = mip.solve_options(options.solver, p.dynamics.x_eq);
  so.label = label;
  out.result = milp::solve(mip.model, so);
  out.mip = std::move(mip);
  if (!out.result.best_point.empty()) {
    out.value = out.result.best_objective;
    out.worst_state = out.mip.state_of(out.result.best_point);
  }
  out.satisfied = !out.result.best_point.empty() && out.result.best_bound <= options.tolerance;
  return out;
}

}  // namespace

VerifyReport verify(const CertificationProblem& p, const VerifyOptions& options) {
  VerificationMip pos = build_positivity_mip(p, options.build);
  VerificationMip dec = build_decrease_mip(p, options.build);
  VerifyReport report;
  if (options.workers > 1) {
    auto fut = std::async(std::launch::async, [&] { return solve_condition(std::move(dec), p, options, "decrease"); });
    report.positivity = solve_condition(std::move(pos), p, options, "positivity");
    report.decrease = fut.get();
  } else {
    report.positivity = solve_condition(std::move(pos), p, options, "positivity");
    report.decrease = solve_condition(std::move(dec), p, options, "decrease");
  }
  bool violated = false;
  for (const ConditionOutcome* c : {&report.positivity, &report.decrease}) {
    if (!c->result.best_point.empty() && c->value > options.tolerance) violated = true;
  }
  report.certified = report.positivity.satisfied && report.decrease.satisfied;
  report.status = report.certified ? VerifyStatus::Certified
                                   : (violated ? VerifyStatus::Violated : VerifyStatus::Undetermined);
  return report;
}

RoaResult roa_level(const CertificationProblem& p, const VerifyOptions& options) {
  p.validate();
  ParameterLayout layout = ParameterLayout::of(p);
  const int n = p.state_dim();
  struct Face {
    int dim;
    bool upper;
  };
  std::vector<Face> faces;
  for (int i = 0; i < n; ++i) {
    faces.push_back({i, false});
    faces.push_back({i, true});
  }
  auto solve_face = [&](const Face& f) {
    Eigen::VectorXd lo = p.box.lower, hi = p.box.upper;
    double v = f.upper ? hi[f.dim] : lo[f.dim];
    lo[f.dim] = hi[f.dim] = v;
    BoundCache cache(options.build.bound_method);
    VerificationMip mip;
    mip.theta_dim = layout.size();
    StateEncoding s = add_state(mip.model, lo, hi);
    mip.state_vars = s.vars;
    LinearExpr V = encode_V(mip.model, cache, p.lyapunov, s.x, lo, hi, layout, "V");
    mip.model.set_objective(V.scaled(-1.0));
    milp::SolveOptions so = mip.solve_options(options.solver, p.dynamics.x_eq);
    so.label = "roa_face_" + std::to_string(f.dim) + (f.upper ? "_upper" : "_lower");
    so.pool_threshold = std::numeric_limits<double>::infinity();
    milp::SolveResult r = milp::solve(mip.model, so);
    return std::make_pair(r, mip.state_of(r.best_point.empty() ? mip.complete_at(lo) : r.best_point));
  };
  std::vector<std::pair<milp::SolveResult, Eigen::VectorXd>> results;
  if (options.workers > 1) {
    std::vector<std::future<std::pair<milp::SolveResult, Eigen::VectorXd>>> futs;
    for (const Face& f : faces) futs.push_back(std::async(std::launch::async, solve_face, f));
    for (auto& fu : futs) results.push_back(fu.get());
  } else {
    for (const Face& f : faces) results.push_back(solve_face(f));
  }
  RoaResult roa;
  roa.rho = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < faces.size(); ++k) {
    const milp::SolveResult& r = results[k].first;
    roa.node_count += r.node_count;
    roa.wall_time += r.wall_time;
    if (r.status != milp::SolveStatus::Optimal) roa.exact = false;
    if (r.best_point.empty()) continue;
    // Over budget, the relaxation bound still gives a valid (conservative) level.
    double level = r.status == milp::SolveStatus::Optimal ? -r.best_objective : -r.best_bound;
    if (level < roa.rho) {
      roa.rho = level;
      roa.minimizer = results[k].second;
      roa.face_dim = faces[k].dim;
      roa.face_upper = faces[k].upper;
    }
  }
  if (!std::isfinite(roa.rho)) throw NumericalFailure("no face of the box could be solved");
  roa.rho = std::max(roa.rho, 0.0);
  return roa;
}

namespace {

nlohmann::json condition_json(const ConditionOutcome& c) {
  return {{"value", c.value},
          {"satisfied", c.satisfied},
          {"state", io::vector_to_json(c.worst_state)},
          {"solver", {{"status", milp::to_string(c.result.status)},
                      {"bound", c.result.best_bound},
                      {"nodes", c.result.node_count},
                      {"time", c.result.wall_time},
                      {"binaries", c.mip.model.binary_count()},
                      {"rows", c.mip.model.row_count()},
                      {"pool", c.result.pool.size()}}}};
}

}  // namespace

nlohmann::json roa_to_json(const RoaResult& roa) {
  return {{"rho", roa.rho},
          {"minimizer", io::vector_to_json(roa.minimizer)},
          {"face", {{"dim", roa.face_dim}, {"side", roa.face_upper ? "upper" : "lower"}}},
          {"exact", roa.exact},
          {"nodes", roa.node_count},
          {"time", roa.wall_time}};
}

nlohmann::json report_to_json(const VerifyReport& report, const VerifyOptions& options,
                              const std::optional<RoaResult>& roa) {
  nlohmann::json j = {{"certified", report.certified},
                      {"status", to_string(report.status)},
                      {"tolerances", {{"certification", options.tolerance},
                                      {"abs_gap", options.solver.abs_gap},
                                      {"integrality", options.solver.integrality_tol}}},
                      {"positivity", condition_json(report.positivity)},
                      {"decrease", condition_json(report.decrease)}};
  if (roa) j["roa"] = roa_to_json(*roa);
  return j;
}

int workers_from_env() {
  const char* v = std::getenv("LYAPNET_WORKERS");
  if (!v) return 1;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (end == v || n < 1) return 1;
  return static_cast<int>(std::min(n, 64L));
}

}  // namespace lyapnet::certify
