#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lyapnet/milp/model.hpp"

namespace lyapnet::milp {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  int max_iterations = 100000;
  /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
  int degenerate_limit = 50;
  int refactor_retries = 3;
};

/// Simplex basis over structural columns followed by one slack column per row.
struct LpBasis {
  std::vector<int> basic;
  std::vector<unsigned char> at_upper;
  bool empty() const { return basic.empty(); }
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> values;  // structural variables
  LpBasis basis;
  int iterations = 0;
};

/// Dense bounded-variable simplex over the LP relaxation of a MilpModel (binaries are
/// treated as continuous within whatever bounds the caller passes).
///
/// Each row i becomes a_i^T s + slack_i = rhs_i with slack bounds [0, inf) for <=,
/// (-inf, 0] for >= and [0, 0] for equality rows. A cold start runs an artificial-variable
/// phase 1 followed by primal phase 2 with Dantzig pricing and a Harris ratio test; Bland's
/// rule takes over after a run of degenerate pivots. A warm start restores a saved tableau
/// (or refactors a saved basis) and runs the dual simplex, which is what branch-and-bound
/// needs after tightening the bounds of one binary.
class LpEngine {
 public:
  struct Snapshot;

  explicit LpEngine(const MilpModel& model, LpOptions options = {});
  ~LpEngine();
  LpEngine(const LpEngine&) = delete;
  LpEngine& operator=(const LpEngine&) = delete;

  int structural_count() const { return n_; }
  int row_count() const { return m_; }

  LpSolution solve(std::span<const double> lower, std::span<const double> upper);
  LpSolution solve_from_basis(std::span<const double> lower, std::span<const double> upper,
                              const LpBasis& basis);
  LpSolution solve_from_snapshot(std::span<const double> lower, std::span<const double> upper,
                                 const Snapshot& snapshot);

  /// Tableau state after the most recent successful solve.
  std::shared_ptr<const Snapshot> snapshot() const;
  static std::size_t snapshot_bytes(int rows, int structurals);

 private:
  struct State;

  LpSolution cold_solve(std::span<const double> lower, std::span<const double> upper);
  LpSolution finish(LpSolution sol);
  bool load_basis(const LpBasis& basis);
  void set_structural_bounds(std::span<const double> lower, std::span<const double> upper);
  LpStatus run_primal(bool phase_one);
  LpStatus run_dual();
  void pivot(int row, int col);
  void recompute();
  void refactor();
  LpSolution extract(LpStatus status) const;

  int n_ = 0;
  int m_ = 0;
  LpOptions opt_;
  Eigen::MatrixXd a_;  // m x n row coefficients
  Eigen::VectorXd b_;
  Eigen::VectorXd c_;
  double c0_ = 0.0;
  Eigen::VectorXd slack_lo_, slack_hi_;
  std::unique_ptr<State> st_;
};

/// Solves the LP relaxation of `model` using the variable bounds stored in the model.
LpSolution lp_solve(const MilpModel& model, const LpOptions& options = {});

}  // namespace lyapnet::milp
