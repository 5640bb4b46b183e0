#include "lyapnet/milp/branch_and_bound.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <list>
#include <queue>
#include <unordered_map>

#include "lyapnet/errors.hpp"
#include "lyapnet/log.hpp"

namespace lyapnet::milp {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::BudgetExceeded: return "budget_exceeded";
  }
  return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

struct Node {
  long id = 0;
  long parent = -1;
  double bound = 0.0;
  std::vector<std::pair<int, unsigned char>> fixes;
  std::shared_ptr<const LpBasis> basis;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.id > b.id;
  }
};

class SnapshotCache {
 public:
  explicit SnapshotCache(std::size_t capacity) : capacity_(capacity) {}

  void put(long key, std::shared_ptr<const LpEngine::Snapshot> snap) {
    if (capacity_ == 0 || !snap) return;
    order_.push_front(key);
    map_[key] = {std::move(snap), order_.begin()};
    while (order_.size() > capacity_) {
      map_.erase(order_.back());
      order_.pop_back();
    }
  }

  std::shared_ptr<const LpEngine::Snapshot> get(long key) {
    auto it = map_.find(key);
    if (it == map_.end()) return nullptr;
    order_.splice(order_.begin(), order_, it->second.second);
    return it->second.first;
  }

 private:
  std::size_t capacity_;
  std::list<long> order_;
  std::unordered_map<long, std::pair<std::shared_ptr<const LpEngine::Snapshot>, std::list<long>::iterator>>
      map_;
};

class Search {
 public:
  Search(const MilpModel& model, const SolveOptions& opt)
      : model_(model),
        opt_(opt),
        engine_(model, opt.lp),
        cache_(opt.snapshot_cache_bytes /
               std::max<std::size_t>(1, LpEngine::snapshot_bytes(model.row_count(), model.variable_count()))),
        binaries_(model.binary_variables()) {
    for (const Variable& v : model.variables()) {
      root_lo_.push_back(v.lower);
      root_hi_.push_back(v.upper);
    }
    if (opt_.pool_key_vars.empty()) {
      for (int j = 0; j < model.variable_count(); ++j) key_vars_.push_back(j);
    } else {
      key_vars_ = opt_.pool_key_vars;
    }
  }

  SolveResult run();

 private:
  LpSolution solve_node(std::vector<double>& lo, std::vector<double>& hi,
                        const std::shared_ptr<const LpEngine::Snapshot>& snap, const LpBasis* basis);
  bool integral(const std::vector<double>& x) const;
  int branching_variable(const std::vector<double>& x) const;
  void offer(const std::vector<double>& point, double objective);
  void consider(const std::vector<double>& point, double objective,
                const std::shared_ptr<const LpEngine::Snapshot>& snap);
  void try_heuristic(const std::vector<double>& relaxed,
                     const std::shared_ptr<const LpEngine::Snapshot>& snap);
  void finalize_pool();
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  const MilpModel& model_;
  const SolveOptions& opt_;
  LpEngine engine_;
  SnapshotCache cache_;
  std::vector<int> binaries_;
  std::vector<int> key_vars_;
  std::vector<double> root_lo_, root_hi_;
  Clock::time_point start_ = Clock::now();

  double incumbent_ = -std::numeric_limits<double>::infinity();
  std::vector<double> incumbent_point_;
  std::vector<PoolEntry> pool_;
};

LpSolution Search::solve_node(std::vector<double>& lo, std::vector<double>& hi,
                              const std::shared_ptr<const LpEngine::Snapshot>& snap,
                              const LpBasis* basis) {
  if (snap) return engine_.solve_from_snapshot(lo, hi, *snap);
  if (basis && !basis->empty()) return engine_.solve_from_basis(lo, hi, *basis);
  return engine_.solve(lo, hi);
}

bool Search::integral(const std::vector<double>& x) const {
  for (int b : binaries_) {
    double v = x[static_cast<std::size_t>(b)];
    if (std::abs(v - std::round(v)) > opt_.integrality_tol) return false;
  }
  return true;
}

int Search::branching_variable(const std::vector<double>& x) const {
  int best = -1;
  double best_frac = opt_.integrality_tol;
  for (int b : binaries_) {
    double v = x[static_cast<std::size_t>(b)];
    double frac = std::min(v - std::floor(v), std::ceil(v) - v);
    if (frac > best_frac) {
      best_frac = frac;
      best = b;
    }
  }
  return best;
}

void Search::offer(const std::vector<double>& point, double objective) {
  if (!(objective > opt_.pool_threshold)) return;
  for (PoolEntry& e : pool_) {
    bool same = true;
    for (int k : key_vars_) {
      if (std::abs(e.point[static_cast<std::size_t>(k)] - point[static_cast<std::size_t>(k)]) >
          opt_.pool_dedup_tol) {
        same = false;
        break;
      }
    }
    if (same) {
      if (objective > e.objective) {
        e.point = point;
        e.objective = objective;
      }
      return;
    }
  }
  pool_.push_back({point, objective});
  if (pool_.size() > 4 * std::max<std::size_t>(opt_.pool_limit, 1)) finalize_pool();
}

void Search::finalize_pool() {
  std::stable_sort(pool_.begin(), pool_.end(),
                   [](const PoolEntry& a, const PoolEntry& b) { return a.objective > b.objective; });
  if (pool_.size() > opt_.pool_limit) pool_.resize(opt_.pool_limit);
}

// Records a feasible assignment with integral binaries. Improving candidates are polished
// into a vertex of the LP with all binaries fixed.
void Search::consider(const std::vector<double>& point, double objective,
                      const std::shared_ptr<const LpEngine::Snapshot>& snap) {
  offer(point, objective);
  if (objective <= incumbent_ && !incumbent_point_.empty()) return;
  std::vector<double> lo = root_lo_, hi = root_hi_;
  for (int b : binaries_) {
    double v = std::round(point[static_cast<std::size_t>(b)]);
    lo[static_cast<std::size_t>(b)] = hi[static_cast<std::size_t>(b)] = v;
  }
  LpSolution polished;
  try {
    polished = solve_node(lo, hi, snap, nullptr);
  } catch (const NumericalFailure&) {
    polished.status = LpStatus::Infeasible;
  }
  if (polished.status == LpStatus::Optimal && polished.objective >= objective - 1e-9 &&
      model_.max_violation(polished.values) <= 1e-6) {
    offer(polished.values, polished.objective);
    if (polished.objective > incumbent_ || incumbent_point_.empty()) {
      incumbent_ = polished.objective;
      incumbent_point_ = polished.values;
    }
    return;
  }
  if (objective > incumbent_ || incumbent_point_.empty()) {
    incumbent_ = objective;
    incumbent_point_ = point;
  }
}

void Search::try_heuristic(const std::vector<double>& relaxed,
                           const std::shared_ptr<const LpEngine::Snapshot>& snap) {
  if (opt_.heuristic_inputs.empty() || !model_.has_completion()) return;
  std::vector<double> point(relaxed.size(), 0.0);
  for (int v : opt_.heuristic_inputs) point[static_cast<std::size_t>(v)] = relaxed[static_cast<std::size_t>(v)];
  model_.complete(point);
  if (model_.max_violation(point) > 1e-6) return;
  consider(point, model_.objective_value(point), snap);
}

SolveResult Search::run() {
  SolveResult result;
  if (!opt_.initial_inputs.empty() && model_.has_completion()) {
    if (opt_.initial_inputs.size() != opt_.heuristic_inputs.size()) {
      throw ContractViolation("initial_inputs must match heuristic_inputs");
    }
    std::vector<double> point(static_cast<std::size_t>(model_.variable_count()), 0.0);
    for (std::size_t k = 0; k < opt_.heuristic_inputs.size(); ++k) {
      point[static_cast<std::size_t>(opt_.heuristic_inputs[k])] = opt_.initial_inputs[k];
    }
    model_.complete(point);
    if (model_.max_violation(point) <= 1e-6) consider(point, model_.objective_value(point), nullptr);
  }

  std::priority_queue<Node, std::vector<Node>, NodeOrder> queue;
  long next_id = 0;
  queue.push(Node{next_id++, -1, std::numeric_limits<double>::infinity(), {}, nullptr});
  bool budget_hit = false;
  double last_log = 0.0;

  while (!queue.empty()) {
    if (result.node_count >= opt_.node_budget || elapsed() > opt_.time_budget_seconds) {
      budget_hit = true;
      break;
    }
    Node node = queue.top();
    queue.pop();
    if (!incumbent_point_.empty() && node.bound <= incumbent_ + opt_.abs_gap) continue;

    std::vector<double> lo = root_lo_, hi = root_hi_;
    for (auto [var, val] : node.fixes) {
      lo[static_cast<std::size_t>(var)] = hi[static_cast<std::size_t>(var)] = val;
    }
    auto parent_snap = cache_.get(node.parent);
    LpSolution sol;
    try {
      sol = solve_node(lo, hi, parent_snap, node.basis.get());
    } catch (const NumericalFailure&) {
      sol = engine_.solve(lo, hi);
    }
    ++result.node_count;
    if (sol.status == LpStatus::Unbounded) throw NumericalFailure("LP relaxation is unbounded");
    if (sol.status != LpStatus::Optimal) continue;
    auto snap = engine_.snapshot();
    double bound = std::min(sol.objective, node.bound);

    if (integral(sol.values)) {
      consider(sol.values, sol.objective, snap);
      continue;
    }
    try_heuristic(sol.values, snap);
    if (!incumbent_point_.empty() && bound <= incumbent_ + opt_.abs_gap) continue;

    int var = branching_variable(sol.values);
    cache_.put(node.id, snap);
    auto basis = std::make_shared<const LpBasis>(sol.basis);
    double v = sol.values[static_cast<std::size_t>(var)];
    unsigned char first = v >= 0.5 ? 1 : 0;
    for (unsigned char val : {first, static_cast<unsigned char>(1 - first)}) {
      Node child{next_id++, node.id, bound, node.fixes, basis};
      child.fixes.emplace_back(var, val);
      queue.push(std::move(child));
    }

    if (log_level() >= LogLevel::Debug && elapsed() - last_log > 5.0) {
      last_log = elapsed();
      log_record(LogLevel::Debug, {{"event", "milp_progress"},
                                   {"label", opt_.label},
                                   {"nodes", result.node_count},
                                   {"open", queue.size()},
                                   {"incumbent", incumbent_},
                                   {"bound", queue.top().bound},
                                   {"time", last_log}});
    }
  }

  finalize_pool();
  result.pool = std::move(pool_);
  result.wall_time = elapsed();
  if (!incumbent_point_.empty()) {
    result.best_objective = incumbent_;
    result.best_point = incumbent_point_;
  }
  if (budget_hit) {
    result.status = SolveStatus::BudgetExceeded;
    double open_bound = -std::numeric_limits<double>::infinity();
    while (!queue.empty()) {
      open_bound = std::max(open_bound, queue.top().bound);
      queue.pop();
    }
    result.best_bound = std::max(open_bound, result.best_objective);
  } else if (incumbent_point_.empty()) {
    result.status = SolveStatus::Infeasible;
  } else {
    result.status = SolveStatus::Optimal;
    result.best_bound = result.best_objective;
  }
  log_record(LogLevel::Info, {{"event", "milp_solve"},
                              {"label", opt_.label},
                              {"status", to_string(result.status)},
                              {"objective", result.best_objective},
                              {"bound", result.best_bound},
                              {"gap", result.best_bound - result.best_objective},
                              {"nodes", result.node_count},
                              {"binaries", binaries_.size()},
                              {"rows", model_.row_count()},
                              {"pool", result.pool.size()},
                              {"time", result.wall_time}});
  return result;
}

}  // namespace

SolveResult solve(const MilpModel& model, const SolveOptions& options) {
  model.validate();
  Search search(model, options);
  return search.run();
}

}  // namespace lyapnet::milp
