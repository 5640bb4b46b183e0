#include "lyapnet/milp/active_set.hpp"

#include <cmath>

#include "lyapnet/errors.hpp"
#include "lyapnet/milp/simplex.hpp"

namespace lyapnet::milp {

namespace {

struct Candidate {
  ActiveConstraint constraint;
  int priority = 0;
  Eigen::VectorXd row;
  double rhs = 0.0;
};

}  // namespace

ActiveSetCertificate extract_active_set(const MilpModel& model, const SolveResult& result,
                                        const ActiveSetOptions& options) {
  if (result.status != SolveStatus::Optimal || result.best_point.empty()) {
    throw ContractViolation("extract_active_set needs an optimal solve result");
  }
  const int n = model.variable_count();
  ActiveSetCertificate cert;
  std::vector<int> bins = model.binary_variables();
  std::vector<double> lo, hi;
  for (const Variable& v : model.variables()) {
    lo.push_back(v.lower);
    hi.push_back(v.upper);
  }
  for (int b : bins) {
    double v = std::round(result.best_point[static_cast<std::size_t>(b)]);
    cert.binary_assignment.push_back(v);
    lo[static_cast<std::size_t>(b)] = hi[static_cast<std::size_t>(b)] = v;
  }
  LpEngine engine(model);
  LpSolution lp = engine.solve(lo, hi);
  if (lp.status != LpStatus::Optimal) {
    throw DegenerateActiveSet("fixed-binary LP is not solvable at the reported optimum");
  }
  const std::vector<double>& s = lp.values;

  std::vector<Candidate> cands;
  for (int b : bins) {
    Candidate c{{ActiveKind::BinaryFixing, b, true}, 0, Eigen::VectorXd::Zero(n), s[static_cast<std::size_t>(b)]};
    c.row[b] = 1.0;
    c.rhs = lo[static_cast<std::size_t>(b)];
    cands.push_back(std::move(c));
  }
  for (int i = 0; i < model.row_count(); ++i) {
    const Row& r = model.row(i);
    double act = model.row_activity(i, s);
    bool active = std::abs(act - r.rhs) <= options.activity_tol;
    if (!active) continue;
    int priority = 2;
    ActiveKind kind = ActiveKind::InequalityRow;
    if (r.sense == RowSense::Equal) {
      priority = 1;
      kind = ActiveKind::EqualityRow;
    } else if (r.origin == RowOrigin::BoundDependent) {
      priority = 4;
    }
    Candidate c{{kind, i, true}, priority, Eigen::VectorXd::Zero(n), r.rhs};
    for (std::size_t k = 0; k < r.vars.size(); ++k) c.row[r.vars[k]] += r.coefs[k];
    cands.push_back(std::move(c));
  }
  for (int j = 0; j < n; ++j) {
    const Variable& v = model.variable(j);
    if (v.kind == VarKind::Binary) continue;
    double x = s[static_cast<std::size_t>(j)];
    for (bool upper : {false, true}) {
      double bound = upper ? v.upper : v.lower;
      if (std::abs(x - bound) > options.activity_tol) continue;
      Candidate c{{ActiveKind::VariableBound, j, upper}, 3, Eigen::VectorXd::Zero(n), bound};
      c.row[j] = 1.0;
      cands.push_back(std::move(c));
      if (v.lower == v.upper) break;
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.priority < b.priority; });

  // Greedy selection of linearly independent rows by modified Gram-Schmidt.
  std::vector<Eigen::VectorXd> basis;
  std::vector<const Candidate*> chosen;
  for (const Candidate& c : cands) {
    if (static_cast<int>(chosen.size()) == n) break;
    double norm = c.row.norm();
    if (norm == 0.0) continue;
    Eigen::VectorXd v = c.row / norm;
    for (int pass = 0; pass < 2; ++pass) {
      for (const Eigen::VectorXd& q : basis) v -= q.dot(v) * q;
    }
    double residual = v.norm();
    if (residual <= std::max(options.independence_tol, 1e-7)) continue;
    basis.push_back(v / residual);
    chosen.push_back(&c);
  }
  if (static_cast<int>(chosen.size()) < n) {
    throw DegenerateActiveSet("active constraints do not determine the optimum (" +
                              std::to_string(chosen.size()) + " independent of " +
                              std::to_string(n) + ")");
  }

  cert.a.resize(n, n);
  cert.b.resize(n);
  for (int i = 0; i < n; ++i) {
    cert.a.row(i) = chosen[static_cast<std::size_t>(i)]->row.transpose();
    cert.b[i] = chosen[static_cast<std::size_t>(i)]->rhs;
    cert.constraints.push_back(chosen[static_cast<std::size_t>(i)]->constraint);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cert.a);
  const auto& sv = svd.singularValues();
  cert.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1]
                                            : std::numeric_limits<double>::infinity();
  if (!(cert.condition <= options.max_condition)) {
    throw DegenerateActiveSet("active system is ill-conditioned");
  }
  cert.c = Eigen::VectorXd::Zero(n);
  for (const Term& t : model.objective().terms()) cert.c[t.var] += t.coef.value;
  cert.d = model.objective().constant().value;
  cert.vertex = cert.a.fullPivLu().solve(cert.b);
  cert.objective = cert.c.dot(cert.vertex) + cert.d;
  if (std::abs(cert.objective - result.best_objective) > options.reconstruction_tol) {
    throw DegenerateActiveSet("active system does not reproduce the optimal objective");
  }
  return cert;
}

Eigen::VectorXd mip_objective_gradient(const MilpModel& model, const ActiveSetCertificate& cert,
                                       int theta_dim) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta_dim);
  const Eigen::VectorXd& s = cert.vertex;
  auto accumulate = [&](const SparseGrad& g, double scale) {
    for (auto [k, v] : g) {
      if (k < 0 || k >= theta_dim) throw ContractViolation("provenance index outside theta");
      grad[k] += scale * v;
    }
  };
  for (const Term& t : model.objective().terms()) accumulate(t.coef.grad, s[t.var]);
  accumulate(model.objective().constant().grad, 1.0);

  Eigen::VectorXd lambda = cert.a.transpose().fullPivLu().solve(cert.c);
  for (std::size_t i = 0; i < cert.constraints.size(); ++i) {
    const ActiveConstraint& ac = cert.constraints[i];
    if (ac.kind != ActiveKind::EqualityRow && ac.kind != ActiveKind::InequalityRow) continue;
    double li = lambda[static_cast<Eigen::Index>(i)];
    if (li == 0.0) continue;
    const Row& r = model.row(ac.index);
    accumulate(r.rhs_grad, li);
    for (std::size_t k = 0; k < r.vars.size(); ++k) accumulate(r.coef_grads[k], -li * s[r.vars[k]]);
  }
  return grad;
}

Eigen::VectorXd mip_objective_gradient(const MilpModel& model, const SolveResult& result,
                                       int theta_dim, const ActiveSetOptions& options) {
  return mip_objective_gradient(model, extract_active_set(model, result, options), theta_dim);
}

}  // namespace lyapnet::milp
