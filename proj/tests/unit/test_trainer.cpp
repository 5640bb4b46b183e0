#include <gtest/gtest.h>

#include <random>

#include "lyapnet/errors.hpp"
#include "lyapnet/milp/active_set.hpp"
#include "lyapnet/plants/toy.hpp"
#include "lyapnet/train/trainer.hpp"
#include "random_problem.hpp"

using namespace lyapnet;
using namespace lyapnet::certify;
using namespace lyapnet::train;

namespace {

FeedforwardNetwork scaled_abs_net(double k, double c) {
  Eigen::MatrixXd w1(2, 1);
  w1 << 1.0, -1.0;
  Eigen::MatrixXd w2(1, 2);
  w2 << k / (1 - c), k / (1 - c);
  return FeedforwardNetwork({{w1, Eigen::VectorXd::Zero(2)}, {w2, Eigen::VectorXd::Zero(1)}}, c);
}

std::vector<Eigen::VectorXd> uniform_states(std::mt19937_64& rng, int n, int count) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd x(n);
    for (int k = 0; k < n; ++k) x[k] = u(rng);
    out.push_back(x);
  }
  return out;
}

double fixed_state_max(const VerificationMip& mip, const Eigen::VectorXd& x) {
  milp::MilpModel model = mip.model;
  for (std::size_t i = 0; i < mip.state_vars.size(); ++i) {
    model.set_bounds(mip.state_vars[i], x[static_cast<Eigen::Index>(i)], x[static_cast<Eigen::Index>(i)]);
  }
  return milp::solve(model).best_objective;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.loss.optimizer = OptimizerKind::Adam;
  cfg.loss.learning_rate = 0.01;
  cfg.loss.max_epochs = 200;
  cfg.loss.p = 1.0;
  cfg.minmax_step = 0.01;
  cfg.max_iterations = 400;
  return cfg;
}

plants::ToyOptions perturbed_toy() {
  plants::ToyOptions o;
  o.a = 1.2;
  o.perturbed = true;
  o.seed = 3;
  return o;
}

}  // namespace

TEST(Violations, PositivityArithmetic) {
  plants::ToyOptions o;
  o.eps1 = 0.5;
  CertificationProblem p = plants::toy_problem(o);
  p.lyapunov.phi = scaled_abs_net(-0.6, 0.1);  // V = 0.4 |x|
  EXPECT_NEAR(violation_eta1(p, Eigen::VectorXd::Constant(1, 1.0)), 0.1, 1e-12);
  EXPECT_EQ(violation_eta1(p, Eigen::VectorXd::Zero(1)), 0.0);
}

TEST(Violations, ToyDecreaseClosedForms) {
  CertificationProblem stable = plants::toy_problem({});
  for (double x = -1.0; x <= 1.0; x += 0.125) {
    EXPECT_EQ(violation_eta2(stable, Eigen::VectorXd::Constant(1, x)), 0.0);
  }
  plants::ToyOptions o;
  o.a = 2.0;
  CertificationProblem unstable = plants::toy_problem(o);
  EXPECT_NEAR(violation_eta2(unstable, Eigen::VectorXd::Constant(1, 1.0)), 1.1, 1e-12);
  EXPECT_EQ(violation_eta2(unstable, Eigen::VectorXd::Zero(1)), 0.0);
}

TEST(Violations, NonnegativeAndMatchFixedMip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    CertificationProblem p = test_support::random_problem(rng);
    VerificationMip pos = build_positivity_mip(p);
    VerificationMip dec = build_decrease_mip(p);
    EXPECT_EQ(violation_eta1(p, p.dynamics.x_eq), 0.0);
    EXPECT_EQ(violation_eta2(p, p.dynamics.x_eq), 0.0);
    for (const Eigen::VectorXd& x : uniform_states(rng, 2, 4)) {
      EXPECT_GE(violation_eta1(p, x), 0.0);
      EXPECT_GE(violation_eta2(p, x), 0.0);
      EXPECT_NEAR(violation_eta1(p, x), std::max(fixed_state_max(pos, x), 0.0), 1e-6);
      EXPECT_NEAR(violation_eta2(p, x), std::max(fixed_state_max(dec, x), 0.0), 1e-6);
    }
  }
}

TEST(SurrogateLoss, ZeroWhenNoViolation) {
  CertificationProblem p = plants::toy_problem({});
  std::mt19937_64 rng(1);
  LossValue lv = surrogate_loss(p, uniform_states(rng, 1, 20), uniform_states(rng, 1, 20), {});
  EXPECT_EQ(lv.loss, 0.0);
  EXPECT_EQ(lv.gradient.norm(), 0.0);
  EXPECT_EQ(surrogate_loss(p, {}, {}, {}).loss, 0.0);
}

TEST(SurrogateLoss, SingletonOneNorm) {
  std::mt19937_64 rng(12);
  LossConfig cfg;
  cfg.p = 1.0;
  for (int trial = 0; trial < 10; ++trial) {
    CertificationProblem p = test_support::random_problem(rng, 0.5, 0.5);
    Eigen::VectorXd x = uniform_states(rng, 2, 1)[0];
    EXPECT_NEAR(surrogate_loss(p, {x}, {x}, cfg).loss, violation_eta1(p, x) + violation_eta2(p, x), 1e-12);
  }
}

TEST(SurrogateLoss, NormOrders) {
  EXPECT_NEAR(p_norm({3.0, 4.0}, 1.0), 7.0, 1e-12);
  EXPECT_NEAR(p_norm({3.0, 4.0}, 4.0), std::pow(81.0 + 256.0, 0.25), 1e-12);
  EXPECT_EQ(p_norm({3.0, 4.0}, std::numeric_limits<double>::infinity()), 4.0);
  LossConfig bad;
  bad.p = 2.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(SurrogateLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  int compared = 0;
  for (double pn : {1.0, 4.0, std::numeric_limits<double>::infinity()}) {
    LossConfig cfg;
    cfg.p = pn;
    for (int trial = 0; trial < 6; ++trial) {
      CertificationProblem p = test_support::random_problem(rng, 0.5, 0.5);
      auto x1 = uniform_states(rng, 2, 6);
      auto x2 = uniform_states(rng, 2, 6);
      Eigen::VectorXd theta = pack_theta(p);
      Eigen::VectorXd g = surrogate_loss(p, x1, x2, cfg).gradient;
      auto loss_at = [&](const Eigen::VectorXd& t) { return surrogate_loss(with_theta(p, t), x1, x2, cfg).loss; };
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        auto fd = [&](double h) {
          Eigen::VectorXd tp = theta, tm = theta;
          tp[k] += h;
          tm[k] -= h;
          return (loss_at(tp) - loss_at(tm)) / (2 * h);
        };
        double f1 = fd(1e-6), f2 = fd(5e-7);
        // Disagreeing step sizes signal a kink inside the stencil.
        if (std::abs(f1 - f2) > 1e-6 * std::max(1.0, std::abs(f1))) continue;
        EXPECT_NEAR(g[k], f1, 1e-4 * std::max(1.0, std::abs(f1))) << "p " << pn << " k " << k;
        ++compared;
      }
    }
  }
  EXPECT_GT(compared, 300);
}

TEST(MipGradient, MatchesEvaluatorAtCornerOptimum) {
  // A maximizer pinned to a box corner does not move with theta, so the optimum tracks the
  // evaluator there.
  std::mt19937_64 rng(14);
  int compared = 0, nonzero = 0;
  for (int trial = 0; trial < 30; ++trial) {
    CertificationProblem p = test_support::random_problem(rng, 0.95, 0.5);
    for (bool decrease : {false, true}) {
      VerificationMip mip = decrease ? build_decrease_mip(p) : build_positivity_mip(p);
      milp::SolveResult r = milp::solve(mip.model);
      Eigen::VectorXd x = mip.state_of(r.best_point);
      if (!((x.array().abs() - 1.0).abs() < 1e-9).all()) continue;
      Eigen::VectorXd g;
      try {
        g = milp::mip_objective_gradient(mip.model, r, mip.theta_dim);
      } catch (const DegenerateActiveSet&) {
        continue;
      }
      Eigen::VectorXd theta = pack_theta(p);
      auto fd = [&](Eigen::Index k, double h) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp[k] += h;
        tm[k] -= h;
        CertificationProblem qp = with_theta(p, tp), qm = with_theta(p, tm);
        return decrease ? (decrease_objective(qp, x) - decrease_objective(qm, x)) / (2 * h)
                        : (positivity_objective(qp, x) - positivity_objective(qm, x)) / (2 * h);
      };
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        double f1 = fd(k, 1e-7), f2 = fd(k, 5e-8);
        if (std::abs(f1 - f2) > 1e-6 * std::max(1.0, std::abs(f1))) continue;
        EXPECT_NEAR(g[k], f1, 1e-5 * std::max(1.0, std::abs(f1))) << "trial " << trial << " k " << k;
        ++compared;
        if (std::abs(f1) > 1e-6) ++nonzero;
      }
    }
  }
  EXPECT_GT(compared, 100);
  EXPECT_GT(nonzero, 50);
}

TEST(MipGradient, MatchesResolvedOptimumDifferences) {
  std::mt19937_64 rng(15);
  int compared = 0;
  for (int trial = 0; trial < 4; ++trial) {
    CertificationProblem p = test_support::random_problem(rng, 0.5, 0.5);
    Eigen::VectorXd theta = pack_theta(p);
    for (bool decrease : {false, true}) {
      auto build = [&](const Eigen::VectorXd& t) {
        CertificationProblem q = with_theta(p, t);
        return decrease ? build_decrease_mip(q) : build_positivity_mip(q);
      };
      VerificationMip mip = build(theta);
      milp::SolveResult r = milp::solve(mip.model);
      Eigen::VectorXd g;
      milp::ActiveSetCertificate cert;
      try {
        cert = milp::extract_active_set(mip.model, r);
        g = milp::mip_objective_gradient(mip.model, cert, mip.theta_dim);
      } catch (const DegenerateActiveSet&) {
        continue;
      }
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        const double h = 1e-6;
        Eigen::VectorXd tp = theta, tm = theta;
        tp[k] += h;
        tm[k] -= h;
        VerificationMip mp = build(tp), mm = build(tm);
        milp::SolveResult rp = milp::solve(mp.model), rm = milp::solve(mm.model);
        try {
          if (milp::extract_active_set(mp.model, rp).binary_assignment != cert.binary_assignment ||
              milp::extract_active_set(mm.model, rm).binary_assignment != cert.binary_assignment) {
            continue;
          }
        } catch (const DegenerateActiveSet&) {
          continue;
        }
        double fd = (rp.best_objective - rm.best_objective) / (2 * h);
        EXPECT_NEAR(g[k], fd, 1e-3 * std::max(1.0, std::abs(fd))) << "trial " << trial << " k " << k;
        ++compared;
      }
    }
  }
  EXPECT_GT(compared, 100);
}

TEST(Checkpoint, RoundTrip) {
  std::mt19937_64 rng(16);
  CertificationProblem p = test_support::random_problem(rng);
  TrainState s = TrainState::initial(p, 42, OptimizerKind::Adam);
  s.x1 = uniform_states(rng, 2, 3);
  s.x2 = uniform_states(rng, 2, 2);
  s.iteration = 7;
  s.optimizer.step(s.theta, Eigen::VectorXd::Ones(s.theta.size()), 0.1);
  nlohmann::json doc = checkpoint_to_json(p, s);
  CertificationProblem q = test_support::random_problem(rng);
  q.dynamics = p.dynamics;
  q.controller.x_eq = q.lyapunov.x_eq = p.dynamics.x_eq;
  q.controller.u_eq = p.dynamics.u_eq;
  TrainState back;
  apply_checkpoint(doc, q, &back);
  EXPECT_EQ(pack_theta(q), s.theta);
  EXPECT_EQ(back.theta, s.theta);
  EXPECT_EQ(back.x1, s.x1);
  EXPECT_EQ(back.x2, s.x2);
  EXPECT_EQ(back.iteration, 7);
  EXPECT_EQ(back.rng(), s.rng());
  EXPECT_EQ(back.optimizer.m, s.optimizer.m);
  EXPECT_EQ(checkpoint_to_json(q, back).dump(), checkpoint_to_json(p, s).dump());
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
  std::mt19937_64 rng(17);
  CertificationProblem p = test_support::random_problem(rng);
  nlohmann::json doc = checkpoint_to_json(p, TrainState::initial(p, 1));
  CertificationProblem toy = plants::toy_problem({});
  EXPECT_THROW(apply_checkpoint(doc, toy), ConfigError);
}

TEST(CounterexampleTraining, CertifiedProblemReturnsImmediately) {
  CertificationProblem p = plants::toy_problem({});
  TrainState s = TrainState::initial(p, 1);
  s.x1 = {Eigen::VectorXd::Constant(1, 0.5)};
  TrainState out = train_counterexamples(p, s, toy_config());
  EXPECT_TRUE(out.converged);
  EXPECT_EQ(out.iteration, 0);
  EXPECT_EQ(out.theta, s.theta);
  EXPECT_EQ(out.x1, s.x1);
  EXPECT_TRUE(out.x2.empty());
}

TEST(CounterexampleTraining, PerturbedToyConverges) {
  CertificationProblem p = plants::toy_problem(perturbed_toy());
  ASSERT_FALSE(verify(p).certified);
  TrainConfig cfg = toy_config();
  std::vector<std::vector<Eigen::VectorXd>> history;
  cfg.on_iteration = [&](const CertificationProblem&, const TrainState& s) { history.push_back(s.x2); };
  TrainState out = train_counterexamples(p, TrainState::initial(p, 5, OptimizerKind::Adam), cfg);
  ASSERT_TRUE(out.converged);
  EXPECT_TRUE(verify(with_theta(p, out.theta)).certified);
  for (std::size_t i = 1; i < history.size(); ++i) {
    ASSERT_GE(history[i].size(), history[i - 1].size());
    for (std::size_t j = 0; j < history[i - 1].size(); ++j) EXPECT_EQ(history[i][j], history[i - 1][j]);
  }
}

TEST(CounterexampleTraining, BudgetExceededCarriesBestState) {
  CertificationProblem p = plants::toy_problem(perturbed_toy());
  TrainConfig cfg = toy_config();
  cfg.max_iterations = 1;
  cfg.loss.max_epochs = 1;
  try {
    train_counterexamples(p, TrainState::initial(p, 5), cfg);
    FAIL() << "expected IterationBudgetExceeded";
  } catch (const IterationBudgetExceeded& e) {
    EXPECT_EQ(e.best().theta.size(), pack_theta(p).size());
    EXPECT_EQ(e.best().curve.size(), 1u);
  }
}

TEST(MinmaxTraining, CertifiedProblemReturnsUnchanged) {
  CertificationProblem p = plants::toy_problem({});
  TrainState out = train_minmax(p, TrainState::initial(p, 1), toy_config());
  EXPECT_TRUE(out.converged);
  EXPECT_EQ(out.theta, pack_theta(p));
}

TEST(MinmaxTraining, PerturbedToyConverges) {
  CertificationProblem p = plants::toy_problem(perturbed_toy());
  TrainState out = train_minmax(p, TrainState::initial(p, 5, OptimizerKind::Adam), toy_config());
  ASSERT_TRUE(out.converged);
  VerifyReport rep = verify(with_theta(p, out.theta));
  EXPECT_TRUE(rep.certified);
  EXPECT_LE(rep.positivity.value, 1e-6);
  EXPECT_LE(rep.decrease.value, 1e-6);
}
