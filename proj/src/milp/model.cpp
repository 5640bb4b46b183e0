#include "lyapnet/milp/model.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "lyapnet/errors.hpp"

namespace lyapnet::milp {

SparseGrad add_grads(const SparseGrad& a, double sa, const SparseGrad& b, double sb) {
  SparseGrad out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      if (sa != 0.0) out.emplace_back(a[i].first, sa * a[i].second);
      ++i;
    } else if (i == a.size() || b[j].first < a[i].first) {
      if (sb != 0.0) out.emplace_back(b[j].first, sb * b[j].second);
      ++j;
    } else {
      double v = sa * a[i].second + sb * b[j].second;
      if (v != 0.0) out.emplace_back(a[i].first, v);
      ++i;
      ++j;
    }
  }
  return out;
}

Tracked operator+(const Tracked& a, const Tracked& b) {
  return {a.value + b.value, add_grads(a.grad, 1.0, b.grad, 1.0)};
}
Tracked operator-(const Tracked& a, const Tracked& b) {
  return {a.value - b.value, add_grads(a.grad, 1.0, b.grad, -1.0)};
}
Tracked operator-(const Tracked& a) { return {-a.value, add_grads(a.grad, -1.0, {}, 0.0)}; }
Tracked operator*(const Tracked& a, const Tracked& b) {
  return {a.value * b.value, add_grads(a.grad, b.value, b.grad, a.value)};
}

LinearExpr LinearExpr::variable(int var, Tracked coef) {
  LinearExpr e;
  e.add_term(var, coef);
  return e;
}

LinearExpr& LinearExpr::add_term(int var, const Tracked& coef) {
  for (Term& t : terms_) {
    if (t.var == var) {
      t.coef = t.coef + coef;
      return *this;
    }
  }
  terms_.push_back({var, coef});
  return *this;
}

LinearExpr& LinearExpr::add(const LinearExpr& other, const Tracked& scale) {
  for (const Term& t : other.terms_) add_term(t.var, t.coef * scale);
  constant_ = constant_ + other.constant_ * scale;
  return *this;
}

LinearExpr& LinearExpr::add_constant(const Tracked& c) {
  constant_ = constant_ + c;
  return *this;
}

LinearExpr LinearExpr::scaled(const Tracked& s) const {
  LinearExpr e;
  e.add(*this, s);
  return e;
}

double LinearExpr::evaluate(std::span<const double> point) const {
  double v = constant_.value;
  for (const Term& t : terms_) v += t.coef.value * point[static_cast<std::size_t>(t.var)];
  return v;
}

LinearExpr operator+(const LinearExpr& a, const LinearExpr& b) {
  LinearExpr e = a;
  e.add(b);
  return e;
}

LinearExpr operator-(const LinearExpr& a, const LinearExpr& b) {
  LinearExpr e = a;
  e.add(b, -1.0);
  return e;
}

int MilpModel::add_continuous(double lower, double upper, std::string name) {
  if (!(lower <= upper) || !std::isfinite(lower) || !std::isfinite(upper)) {
    throw ContractViolation("continuous variable '" + name + "' needs finite bounds lower <= upper");
  }
  if (name.empty()) name = "s" + std::to_string(vars_.size());
  vars_.push_back({std::move(name), VarKind::Continuous, lower, upper});
  return static_cast<int>(vars_.size()) - 1;
}

int MilpModel::add_binary(std::string name) {
  if (name.empty()) name = "b" + std::to_string(vars_.size());
  vars_.push_back({std::move(name), VarKind::Binary, 0.0, 1.0});
  return static_cast<int>(vars_.size()) - 1;
}

int MilpModel::add_row(const LinearExpr& lhs, RowSense sense, RowOrigin origin, std::string name) {
  Row row;
  row.name = name.empty() ? "r" + std::to_string(rows_.size()) : std::move(name);
  row.sense = sense;
  row.origin = origin;
  for (const Term& t : lhs.terms()) {
    if (t.var < 0 || t.var >= variable_count()) {
      throw ContractViolation("row '" + row.name + "' references unknown variable");
    }
    if (t.coef.value == 0.0 && t.coef.grad.empty()) continue;
    row.vars.push_back(t.var);
    row.coefs.push_back(t.coef.value);
    row.coef_grads.push_back(t.coef.grad);
  }
  row.rhs = -lhs.constant().value;
  row.rhs_grad = add_grads(lhs.constant().grad, -1.0, {}, 0.0);
  rows_.push_back(std::move(row));
  return static_cast<int>(rows_.size()) - 1;
}

int MilpModel::add_row(const LinearExpr& lhs, RowSense sense, const LinearExpr& rhs,
                       RowOrigin origin, std::string name) {
  return add_row(lhs - rhs, sense, origin, std::move(name));
}

void MilpModel::set_objective(const LinearExpr& objective) {
  for (const Term& t : objective.terms()) {
    if (t.var < 0 || t.var >= variable_count()) {
      throw ContractViolation("objective references unknown variable");
    }
  }
  objective_ = objective;
}

void MilpModel::set_bounds(int var, double lower, double upper) {
  Variable& v = vars_.at(static_cast<std::size_t>(var));
  if (!(lower <= upper)) throw ContractViolation("set_bounds: lower > upper for " + v.name);
  v.lower = lower;
  v.upper = upper;
}

std::vector<int> MilpModel::binary_variables() const {
  std::vector<int> out;
  for (int i = 0; i < variable_count(); ++i) {
    if (vars_[static_cast<std::size_t>(i)].kind == VarKind::Binary) out.push_back(i);
  }
  return out;
}

int MilpModel::binary_count() const { return static_cast<int>(binary_variables().size()); }

double MilpModel::objective_value(std::span<const double> point) const {
  return objective_.evaluate(point);
}

double MilpModel::row_activity(int row, std::span<const double> point) const {
  const Row& r = rows_.at(static_cast<std::size_t>(row));
  double a = 0.0;
  for (std::size_t k = 0; k < r.vars.size(); ++k) {
    a += r.coefs[k] * point[static_cast<std::size_t>(r.vars[k])];
  }
  return a;
}

double MilpModel::max_violation(std::span<const double> point, bool check_integrality) const {
  double worst = 0.0;
  for (int i = 0; i < row_count(); ++i) {
    const Row& r = rows_[static_cast<std::size_t>(i)];
    double a = row_activity(i, point);
    double v = 0.0;
    switch (r.sense) {
      case RowSense::LessEqual: v = a - r.rhs; break;
      case RowSense::GreaterEqual: v = r.rhs - a; break;
      case RowSense::Equal: v = std::abs(a - r.rhs); break;
    }
    worst = std::max(worst, v);
  }
  for (int j = 0; j < variable_count(); ++j) {
    const Variable& var = vars_[static_cast<std::size_t>(j)];
    double x = point[static_cast<std::size_t>(j)];
    worst = std::max({worst, var.lower - x, x - var.upper});
    if (check_integrality && var.kind == VarKind::Binary) {
      worst = std::max(worst, std::abs(x - std::round(x)));
    }
  }
  return worst;
}

void MilpModel::validate() const {
  for (const Variable& v : vars_) {
    if (!(v.lower <= v.upper)) throw ContractViolation("variable " + v.name + " has lower > upper");
    if (v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0)) {
      throw ContractViolation("binary " + v.name + " has bounds outside {0, 1}");
    }
  }
  for (const Row& r : rows_) {
    for (int var : r.vars) {
      if (var < 0 || var >= variable_count()) {
        throw ContractViolation("row " + r.name + " references unknown variable");
      }
    }
  }
  for (const Term& t : objective_.terms()) {
    if (t.var < 0 || t.var >= variable_count()) {
      throw ContractViolation("objective references unknown variable");
    }
  }
}

void MilpModel::complete(std::vector<double>& point) const {
  point.resize(vars_.size(), 0.0);
  for (const CompletionStep& step : completion_) step(point);
}

namespace {

void write_linear(std::ostream& out, const std::vector<int>& vars, const std::vector<double>& coefs,
                  const std::vector<Variable>& names) {
  bool first = true;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    double c = coefs[k];
    if (!first || c < 0) out << (c < 0 ? " - " : " + ");
    out << std::abs(c) << ' ' << names[static_cast<std::size_t>(vars[k])].name;
    first = false;
  }
  if (first) out << "0";
}

}  // namespace

void MilpModel::write_lp(std::ostream& out) const {
  out.precision(17);
  out << "\\ generated by lyapnet\nMaximize\n obj:";
  std::vector<int> ov;
  std::vector<double> oc;
  for (const Term& t : objective_.terms()) {
    ov.push_back(t.var);
    oc.push_back(t.coef.value);
  }
  write_linear(out, ov, oc, vars_);
  if (objective_.constant().value != 0.0) {
    out << (objective_.constant().value < 0 ? " - " : " + ") << std::abs(objective_.constant().value)
        << " constant";
  }
  out << "\nSubject To\n";
  for (const Row& r : rows_) {
    out << ' ' << r.name << ": ";
    write_linear(out, r.vars, r.coefs, vars_);
    switch (r.sense) {
      case RowSense::LessEqual: out << " <= "; break;
      case RowSense::GreaterEqual: out << " >= "; break;
      case RowSense::Equal: out << " = "; break;
    }
    out << r.rhs << '\n';
  }
  if (objective_.constant().value != 0.0) out << " fix_constant: constant = 1\n";
  out << "Bounds\n";
  for (const Variable& v : vars_) {
    if (v.kind == VarKind::Binary) continue;
    out << ' ' << v.lower << " <= " << v.name << " <= " << v.upper << '\n';
  }
  out << "Binaries\n";
  for (const Variable& v : vars_) {
    if (v.kind == VarKind::Binary) out << ' ' << v.name << '\n';
  }
  out << "End\n";
}

}  // namespace lyapnet::milp
