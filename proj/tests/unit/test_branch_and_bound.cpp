#include <gtest/gtest.h>

#include <random>

#include "lyapnet/milp/branch_and_bound.hpp"
#include "random_milp.hpp"

using namespace lyapnet::milp;

TEST(BranchAndBound, BinaryTradeOff) {
  MilpModel model;
  int a = model.add_binary("a");
  int x = model.add_continuous(0.0, 1.0, "x");
  model.add_row(LinearExpr::variable(x) + LinearExpr::variable(a) - LinearExpr(1.0), RowSense::LessEqual);
  model.set_objective(LinearExpr::variable(a, 2.0) + LinearExpr::variable(x));
  SolveResult r = solve(model);
  ASSERT_EQ(r.status, SolveStatus::Optimal);
  EXPECT_NEAR(r.best_objective, 2.0, 1e-9);
  EXPECT_NEAR(r.best_point[static_cast<std::size_t>(a)], 1.0, 1e-9);
  EXPECT_NEAR(r.best_point[static_cast<std::size_t>(x)], 0.0, 1e-9);
}

TEST(BranchAndBound, ConstantObjectiveHasEmptyPool) {
  MilpModel model;
  int a = model.add_binary();
  int x = model.add_continuous(-1.0, 1.0);
  model.add_row(LinearExpr::variable(x) - LinearExpr::variable(a), RowSense::LessEqual);
  model.set_objective(LinearExpr(0.0));
  SolveOptions opt;
  opt.pool_threshold = 1e-3;
  SolveResult r = solve(model, opt);
  ASSERT_EQ(r.status, SolveStatus::Optimal);
  EXPECT_EQ(r.best_objective, 0.0);
  EXPECT_TRUE(r.pool.empty());
}

TEST(BranchAndBound, InfeasibleModel) {
  MilpModel model;
  int a = model.add_binary();
  int b = model.add_binary();
  model.add_row(LinearExpr::variable(a) + LinearExpr::variable(b) - LinearExpr(1.5), RowSense::Equal);
  model.set_objective(LinearExpr::variable(a));
  EXPECT_EQ(solve(model).status, SolveStatus::Infeasible);
}

TEST(BranchAndBound, MatchesEnumerationOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    MilpModel model = lyapnet::testing::random_milp(rng, 1 + trial % 10, 2 + trial % 3);
    double oracle = lyapnet::testing::enumeration_oracle(model);
    SolveResult r = solve(model);
    if (!std::isfinite(oracle)) {
      EXPECT_EQ(r.status, SolveStatus::Infeasible) << "trial " << trial;
      continue;
    }
    ASSERT_EQ(r.status, SolveStatus::Optimal) << "trial " << trial;
    EXPECT_NEAR(r.best_objective, oracle, 1e-6) << "trial " << trial;
    EXPECT_LE(model.max_violation(r.best_point), 1e-6);
  }
}

TEST(BranchAndBound, PoolEntriesAreFeasibleSortedAndAboveThreshold) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    MilpModel model = lyapnet::testing::random_milp(rng, 6, 3);
    SolveOptions opt;
    opt.pool_threshold = -0.5;
    SolveResult r = solve(model, opt);
    for (std::size_t i = 0; i < r.pool.size(); ++i) {
      EXPECT_GT(r.pool[i].objective, opt.pool_threshold);
      EXPECT_LE(model.max_violation(r.pool[i].point), 1e-6);
      EXPECT_NEAR(model.objective_value(r.pool[i].point), r.pool[i].objective, 1e-6);
      if (i > 0) EXPECT_GE(r.pool[i - 1].objective, r.pool[i].objective);
      for (std::size_t j = 0; j < i; ++j) {
        double diff = 0.0;
        for (std::size_t k = 0; k < r.pool[i].point.size(); ++k) {
          diff = std::max(diff, std::abs(r.pool[i].point[k] - r.pool[j].point[k]));
        }
        EXPECT_GT(diff, 1e-6);
      }
    }
  }
}

TEST(BranchAndBound, DeterministicAcrossRuns) {
  std::mt19937_64 rng(99);
  MilpModel model = lyapnet::testing::random_milp(rng, 10, 3);
  SolveResult a = solve(model);
  SolveResult b = solve(model);
  EXPECT_EQ(a.best_objective, b.best_objective);
  EXPECT_EQ(a.node_count, b.node_count);
}

TEST(BranchAndBound, NodeBudgetReportsIncumbent) {
  std::mt19937_64 rng(3);
  MilpModel model = lyapnet::testing::random_milp(rng, 12, 3);
  SolveOptions opt;
  opt.node_budget = 1;
  SolveResult r = solve(model, opt);
  EXPECT_TRUE(r.status == SolveStatus::BudgetExceeded || r.status == SolveStatus::Optimal);
  EXPECT_LE(r.node_count, 1);
}
