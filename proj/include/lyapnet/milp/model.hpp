#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lyapnet::milp {

/// Sparse first-order sensitivity of a scalar to the trainable parameter vector theta:
/// (theta index, d value / d theta[index]) pairs, sorted by index, no duplicates.
using SparseGrad = std::vector<std::pair<int, double>>;

SparseGrad add_grads(const SparseGrad& a, double sa, const SparseGrad& b, double sb);

/// A model coefficient together with its provenance in theta. Coefficients that do not depend
/// on theta carry an empty gradient.
struct Tracked {
  double value = 0.0;
  SparseGrad grad;

  Tracked() = default;
  Tracked(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
  Tracked(double v, SparseGrad g) : value(v), grad(std::move(g)) {}

  /// theta[index] itself.
  static Tracked parameter(double v, int index) { return {v, {{index, 1.0}}}; }
  bool depends_on_theta() const { return !grad.empty(); }
};

Tracked operator+(const Tracked& a, const Tracked& b);
Tracked operator-(const Tracked& a, const Tracked& b);
Tracked operator-(const Tracked& a);
Tracked operator*(const Tracked& a, const Tracked& b);

struct Term {
  int var;
  Tracked coef;
};

/// sum_k coef_k * var_k + constant, with theta provenance on every coefficient.
class LinearExpr {
 public:
  LinearExpr() = default;
  LinearExpr(Tracked constant) : constant_(std::move(constant)) {}  // NOLINT
  static LinearExpr variable(int var, Tracked coef = 1.0);

  const std::vector<Term>& terms() const { return terms_; }
  const Tracked& constant() const { return constant_; }

  LinearExpr& add_term(int var, const Tracked& coef);
  LinearExpr& add(const LinearExpr& other, const Tracked& scale = 1.0);
  LinearExpr& add_constant(const Tracked& c);
  LinearExpr scaled(const Tracked& s) const;

  double evaluate(std::span<const double> point) const;

 private:
  std::vector<Term> terms_;
  Tracked constant_;
};

LinearExpr operator+(const LinearExpr& a, const LinearExpr& b);
LinearExpr operator-(const LinearExpr& a, const LinearExpr& b);

enum class VarKind { Continuous, Binary };
enum class RowSense { LessEqual, Equal, GreaterEqual };

/// Whether a row's theta provenance is complete. Big-M rows use neuron bounds as constants;
/// their dependence on theta is not tracked.
enum class RowOrigin { Exact, BoundDependent };

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = 0.0;
};

struct Row {
  std::string name;
  std::vector<int> vars;
  std::vector<double> coefs;
  std::vector<SparseGrad> coef_grads;
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
  SparseGrad rhs_grad;
  RowOrigin origin = RowOrigin::Exact;
};

/// Mixed-integer linear program, always a maximization:
///   max c^T s + d  s.t.  rows, lower <= s <= upper, binaries in {0, 1}.
class MilpModel {
 public:
  int add_continuous(double lower, double upper, std::string name = {});
  int add_binary(std::string name = {});

  /// Adds the row `lhs sense 0`; the expression's constant moves to the right-hand side.
  int add_row(const LinearExpr& lhs, RowSense sense, RowOrigin origin = RowOrigin::Exact,
              std::string name = {});
  int add_row(const LinearExpr& lhs, RowSense sense, const LinearExpr& rhs,
              RowOrigin origin = RowOrigin::Exact, std::string name = {});

  void set_objective(const LinearExpr& objective);
  const LinearExpr& objective() const { return objective_; }

  int variable_count() const { return static_cast<int>(vars_.size()); }
  int row_count() const { return static_cast<int>(rows_.size()); }
  const Variable& variable(int i) const { return vars_.at(static_cast<std::size_t>(i)); }
  const std::vector<Variable>& variables() const { return vars_; }
  const Row& row(int i) const { return rows_.at(static_cast<std::size_t>(i)); }
  const std::vector<Row>& rows() const { return rows_; }

  void set_bounds(int var, double lower, double upper);
  std::vector<int> binary_variables() const;
  int binary_count() const;

  double objective_value(std::span<const double> point) const;
  double row_activity(int row, std::span<const double> point) const;
  /// Largest violation over rows and variable bounds (binaries also checked for integrality).
  double max_violation(std::span<const double> point, bool check_integrality = true) const;

  /// Throws ContractViolation if a row references a missing variable, bounds are inverted,
  /// or a binary has bounds outside {0, 1}.
  void validate() const;

  /// Plain-text dump in the LP file layout understood by common solvers.
  void write_lp(std::ostream& out) const;

  /// Completion steps fill encoder-owned variables from variables assigned earlier (typically
  /// the encoded state), producing the unique feasible completion of a given input.
  using CompletionStep = std::function<void(std::vector<double>&)>;
  void add_completion(CompletionStep step) { completion_.push_back(std::move(step)); }
  bool has_completion() const { return !completion_.empty(); }
  void complete(std::vector<double>& point) const;

 private:
  std::vector<Variable> vars_;
  std::vector<Row> rows_;
  LinearExpr objective_;
  std::vector<CompletionStep> completion_;
};

}  // namespace lyapnet::milp
