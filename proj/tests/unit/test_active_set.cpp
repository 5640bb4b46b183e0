#include <gtest/gtest.h>

#include <random>

#include "lyapnet/errors.hpp"
#include "lyapnet/milp/active_set.hpp"
#include "random_milp.hpp"

using namespace lyapnet::milp;

TEST(ActiveSet, SingleVariableUpperBound) {
  MilpModel model;
  int x = model.add_continuous(0.0, 1.0);
  model.set_objective(LinearExpr::variable(x));
  SolveResult r = solve(model);
  ActiveSetCertificate cert = extract_active_set(model, r);
  ASSERT_EQ(cert.constraints.size(), 1u);
  EXPECT_EQ(cert.constraints[0].kind, ActiveKind::VariableBound);
  EXPECT_TRUE(cert.constraints[0].upper);
  EXPECT_NEAR(cert.objective, 1.0, 1e-12);
}

TEST(ActiveSet, BinaryTradeOffReconstructs) {
  MilpModel model;
  int a = model.add_binary();
  int x = model.add_continuous(0.0, 1.0);
  model.add_row(LinearExpr::variable(x) + LinearExpr::variable(a) - LinearExpr(1.0), RowSense::LessEqual);
  model.set_objective(LinearExpr::variable(a, 2.0) + LinearExpr::variable(x));
  SolveResult r = solve(model);
  ActiveSetCertificate cert = extract_active_set(model, r);
  EXPECT_EQ(cert.binary_assignment, std::vector<double>{1.0});
  EXPECT_NEAR(cert.objective, 2.0, 1e-12);
  EXPECT_EQ(cert.a.rows(), 2);
}

TEST(ActiveSet, RandomModelsReconstructObjective) {
  std::mt19937_64 rng(17);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    MilpModel model = lyapnet::testing::random_milp(rng, 1 + trial % 6, 3);
    SolveResult r = solve(model);
    if (r.status != SolveStatus::Optimal) continue;
    ActiveSetCertificate cert = extract_active_set(model, r);
    EXPECT_NEAR(cert.objective, r.best_objective, 1e-8);
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(ActiveSet, ThetaIndependentModelHasZeroGradient) {
  std::mt19937_64 rng(1);
  MilpModel model = lyapnet::testing::random_milp(rng, 3, 2);
  SolveResult r = solve(model);
  Eigen::VectorXd g = mip_objective_gradient(model, r, 4);
  EXPECT_EQ(g.norm(), 0.0);
}

TEST(ActiveSet, GradientMatchesResolveFiniteDifferences) {
  const int k = 4;
  int compared = 0;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    std::vector<double> theta(k, 0.1);
    MilpModel model = lyapnet::testing::random_parametric_milp(seed, 4, 3, theta);
    SolveResult r = solve(model);
    if (r.status != SolveStatus::Optimal) continue;
    Eigen::VectorXd g;
    ActiveSetCertificate cert;
    try {
      cert = extract_active_set(model, r);
      g = mip_objective_gradient(model, cert, k);
    } catch (const lyapnet::DegenerateActiveSet&) {
      continue;
    }
    const double h = 1e-6;
    for (int idx = 0; idx < k; ++idx) {
      std::vector<double> tp = theta, tm = theta;
      tp[static_cast<std::size_t>(idx)] += h;
      tm[static_cast<std::size_t>(idx)] -= h;
      MilpModel mp = lyapnet::testing::random_parametric_milp(seed, 4, 3, tp);
      MilpModel mm = lyapnet::testing::random_parametric_milp(seed, 4, 3, tm);
      SolveResult rp = solve(mp), rm = solve(mm);
      ActiveSetCertificate cp = extract_active_set(mp, rp);
      ActiveSetCertificate cm = extract_active_set(mm, rm);
      if (cp.binary_assignment != cert.binary_assignment || cm.binary_assignment != cert.binary_assignment) {
        continue;
      }
      double fd = (rp.best_objective - rm.best_objective) / (2 * h);
      EXPECT_NEAR(g[idx], fd, 1e-3 * std::max(1.0, std::abs(fd))) << "seed " << seed << " idx " << idx;
      ++compared;
    }
  }
  EXPECT_GT(compared, 40);
}
