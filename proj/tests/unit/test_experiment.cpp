#include <gtest/gtest.h>

#include "lyapnet/errors.hpp"
#include "lyapnet/experiment/pipeline.hpp"

using namespace lyapnet;
using namespace lyapnet::experiment;
using nlohmann::json;

namespace {

json toy_doc() {
  return {{"name", "toy"},
          {"seed", 3},
          {"plant", {{"kind", "toy"}, {"a", 1.2}, {"perturbed", true}}},
          {"networks", {{"controller", {2}}, {"lyapunov", {4}}}},
          {"box", {{"lower", {-1.0}}, {"upper", {1.0}}}},
          {"eps1", 0.5},
          {"eps2", 0.1},
          {"synthesis",
           {{"loss", {{"p", 1}, {"optimizer", "adam"}, {"learning_rate", 0.01}, {"max_epochs", 200}}},
            {"max_iterations", 400},
            {"minmax_step", 0.01}}}};
}

json pendulum_doc() {
  return {{"plant", {{"kind", "pendulum"}, {"mass", 1.0}, {"length", 1.0}, {"damping", 0.1}, {"gravity", 9.81}, {"dt", 0.01}}},
          {"control_limits", {{"lower", {-10.0}}, {"upper", {10.0}}}},
          {"box", {{"lower", {2.5, -1.0}}, {"upper", {3.8, 1.0}}}}};
}

}  // namespace

TEST(Config, PendulumDefaultsFollowNetworkTable) {
  ExperimentConfig c = parse_config(pendulum_doc());
  EXPECT_EQ(c.networks.dynamics, (std::vector<int>{5, 5}));
  EXPECT_EQ(c.networks.controller, (std::vector<int>{2, 2}));
  EXPECT_EQ(c.networks.lyapunov, (std::vector<int>{8, 4, 4}));
  EXPECT_EQ(c.synthesis.algorithm, 1);
  EXPECT_EQ(c.solver.tolerance, 1e-6);
  EXPECT_EQ(c.synthesis.counterexample_cap, 50u);
  EXPECT_EQ(c.synthesis.loss.p, 4.0);
  EXPECT_EQ(c.simulate.dt, 0.01);
}

TEST(Config, ResolvedDocumentRoundTrips) {
  for (const json& doc : {toy_doc(), pendulum_doc()}) {
    json resolved = to_json(parse_config(doc));
    EXPECT_EQ(to_json(parse_config(resolved)), resolved);
  }
}

TEST(Config, InfinityNormRoundTrips) {
  json doc = toy_doc();
  doc["synthesis"]["loss"]["p"] = "inf";
  ExperimentConfig c = parse_config(doc);
  EXPECT_TRUE(std::isinf(c.synthesis.loss.p));
  EXPECT_EQ(to_json(c)["synthesis"]["loss"]["p"], "inf");
}

TEST(Config, RejectsInvalidDocuments) {
  auto rejects = [](json doc) { EXPECT_THROW(parse_config(doc), ConfigError) << doc.dump(); };
  json d = pendulum_doc();
  d.erase("plant");
  rejects(d);
  d = pendulum_doc();
  d["plant"].erase("mass");
  rejects(d);
  d = pendulum_doc();
  d["synthesis"]["algorithm"] = 3;
  rejects(d);
  d = pendulum_doc();
  d["unexpected"] = 1;
  rejects(d);
  d = pendulum_doc();
  d["box"]["lower"] = {3.5, -1.0};
  rejects(d);
  d = pendulum_doc();
  d["eps1"] = 1.5;
  rejects(d);
  d = pendulum_doc();
  d["control_limits"]["lower"] = {1.0};
  rejects(d);
  d = pendulum_doc();
  d["synthesis"]["loss"]["optimizer"] = "sgd";
  rejects(d);
  d = toy_doc();
  d["synthesis"]["initialization"] = "lqr";
  rejects(d);
  d = pendulum_doc();
  d["networks"]["lyapunov"] = {8, 0};
  rejects(d);
}

TEST(Pipeline, PendulumNeedsDynamicsWeights) {
  ExperimentConfig c = parse_config(pendulum_doc());
  EXPECT_TRUE(needs_dynamics_weights(c));
  EXPECT_THROW(initial_problem(c), ConfigError);
  FeedforwardNetwork wrong = FeedforwardNetwork::zeros(2, {3}, 2, 0.1);
  EXPECT_THROW(initial_problem(c, &wrong), ConfigError);
  FeedforwardNetwork ok = FeedforwardNetwork::zeros(3, {5, 5}, 2, 0.1);
  certify::CertificationProblem p = initial_problem(c, &ok);
  EXPECT_EQ(p.controller.phi.layer(0).weight.rows(), 2);
  EXPECT_EQ(p.lyapunov.phi.layer(0).weight.rows(), 8);
}

TEST(Pipeline, InitialProblemIsSeeded) {
  ExperimentConfig c = parse_config(pendulum_doc());
  FeedforwardNetwork dyn = FeedforwardNetwork::zeros(3, {5, 5}, 2, 0.1);
  EXPECT_EQ(certify::pack_theta(initial_problem(c, &dyn)), certify::pack_theta(initial_problem(c, &dyn)));
  c.seed = 1;
  ExperimentConfig d = parse_config(pendulum_doc());
  EXPECT_NE(certify::pack_theta(initial_problem(c, &dyn)), certify::pack_theta(initial_problem(d, &dyn)));
}

TEST(Pipeline, ToyCertifiesWithBothAlgorithms) {
  for (int algorithm : {1, 2}) {
    json doc = toy_doc();
    doc["synthesis"]["algorithm"] = algorithm;
    ExperimentConfig c = parse_config(doc);
    certify::CertificationProblem p = initial_problem(c);
    ASSERT_FALSE(certify::verify(p).certified);
    SynthesisResult r = synthesize(c, p);
    EXPECT_TRUE(r.certified) << "algorithm " << algorithm;
    EXPECT_TRUE(certify::verify(r.problem).certified);
    EXPECT_EQ(r.stages.size(), 1u);
  }
}

TEST(Pipeline, BoxScheduleRunsNestedStages) {
  json doc = toy_doc();
  doc["synthesis"]["box_schedule"] = json::array({{{"lower", {-0.5}}, {"upper", {0.5}}}});
  ExperimentConfig c = parse_config(doc);
  int calls = 0;
  SynthesisResult r = synthesize(c, initial_problem(c), [&](const certify::CertificationProblem&, const train::TrainState&) { ++calls; });
  ASSERT_TRUE(r.certified);
  ASSERT_EQ(r.stages.size(), 2u);
  EXPECT_EQ(r.stages[0].box.upper[0], 0.5);
  EXPECT_EQ(r.stages[1].box.upper[0], 1.0);
  EXPECT_EQ(r.problem.box.upper[0], 1.0);
  EXPECT_GT(calls, 0);
}

TEST(Pipeline, BudgetExhaustionIsReportedNotThrown) {
  json doc = toy_doc();
  doc["synthesis"]["max_iterations"] = 1;
  doc["synthesis"]["loss"]["max_epochs"] = 1;
  ExperimentConfig c = parse_config(doc);
  SynthesisResult r = synthesize(c, initial_problem(c));
  EXPECT_FALSE(r.certified);
  EXPECT_FALSE(r.failure.empty());
  EXPECT_EQ(synthesis_to_json(r)["certified"], false);
}

TEST(Pipeline, SublevelSamplesRespectLevel) {
  ExperimentConfig c = parse_config(toy_doc());
  c.toy.perturbed = false;
  certify::CertificationProblem p = initial_problem(c);
  std::mt19937_64 rng(2);
  for (const Eigen::VectorXd& x : sample_sublevel_set(p, 0.5, 100, rng)) {
    EXPECT_LE(certify::eval_V(p.lyapunov, x), 0.5);
    EXPECT_TRUE(p.box.contains(x));
  }
  EXPECT_THROW(sample_sublevel_set(p, -1.0, 1, rng, 1000), NumericalFailure);
}

TEST(Pipeline, ToyPlantStepIsExact) {
  ExperimentConfig c = parse_config(toy_doc());
  plants::StepFunction step = plant_step(c);
  certify::CertificationProblem p = initial_problem(c);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.3), u = Eigen::VectorXd::Constant(1, -0.2);
  EXPECT_NEAR(step(x, u)[0], p.dynamics.next(x, u)[0], 1e-12);
}
