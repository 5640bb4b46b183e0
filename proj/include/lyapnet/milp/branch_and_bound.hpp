#pragma once

#include <limits>
#include <string>
#include <vector>

#include "lyapnet/milp/model.hpp"
#include "lyapnet/milp/simplex.hpp"

namespace lyapnet::milp {

enum class SolveStatus { Optimal, Infeasible, BudgetExceeded };

const char* to_string(SolveStatus status);

struct PoolEntry {
  std::vector<double> point;
  double objective = 0.0;
};

struct SolveOptions {
  /// Nodes whose relaxation bound is within abs_gap of the incumbent are pruned.
  double abs_gap = 1e-7;
  double integrality_tol = 1e-6;
  /// Feasible solutions with objective strictly above this value are pooled.
  double pool_threshold = 0.0;
  std::size_t pool_limit = 1000;
  /// Variables compared when deduplicating pool entries; empty means all variables.
  std::vector<int> pool_key_vars;
  double pool_dedup_tol = 1e-6;

  long node_budget = 2'000'000;
  double time_budget_seconds = std::numeric_limits<double>::infinity();

  /// When the model has completion steps, the relaxation values of these variables are
  /// completed into feasible candidates at every node.
  std::vector<int> heuristic_inputs;
  /// Optional starting assignment of heuristic_inputs, completed into the first incumbent.
  std::vector<double> initial_inputs;

  std::size_t snapshot_cache_bytes = std::size_t{256} << 20;
  LpOptions lp;
  /// Label attached to structured log records.
  std::string label = "milp";
};

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  double best_objective = -std::numeric_limits<double>::infinity();
  /// Optimal vertex of the LP obtained by fixing every binary at its incumbent value.
  std::vector<double> best_point;
  /// Largest relaxation bound among unexplored nodes (equals best_objective when Optimal).
  double best_bound = -std::numeric_limits<double>::infinity();
  /// Sorted by decreasing objective, deduplicated on SolveOptions::pool_key_vars.
  std::vector<PoolEntry> pool;
  long node_count = 0;
  double wall_time = 0.0;
};

/// Maximizes the model by best-bound branch-and-bound over LP relaxations. Branching picks the
/// most fractional binary (lowest index on ties); equal bounds are explored in creation order.
SolveResult solve(const MilpModel& model, const SolveOptions& options = {});

}  // namespace lyapnet::milp
