#include "lyapnet/experiment/pipeline.hpp"

#include <chrono>

#include "lyapnet/errors.hpp"
#include "lyapnet/io/weights.hpp"
#include "lyapnet/log.hpp"

namespace lyapnet::experiment {

namespace {

using certify::CertificationProblem;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json box_json(const certify::Box& b) {
  return {{"lower", io::vector_to_json(b.lower)}, {"upper", io::vector_to_json(b.upper)}};
}

std::vector<Eigen::VectorXd> inside(const std::vector<Eigen::VectorXd>& xs, const certify::Box& box) {
  std::vector<Eigen::VectorXd> out;
  for (const Eigen::VectorXd& x : xs) {
    if (box.contains(x)) out.push_back(x);
  }
  return out;
}

}  // namespace

plants::StepFunction plant_step(const ExperimentConfig& c) {
  if (c.plant == PlantKind::Pendulum) {
    plants::PendulumPlant plant = c.pendulum;
    return [plant](const Eigen::VectorXd& x, const Eigen::VectorXd& u) { return plants::pendulum_step(plant, x, u); };
  }
  const double a = c.toy.a;
  return [a](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd { return a * x + u; };
}

bool needs_dynamics_weights(const ExperimentConfig& c) { return c.plant == PlantKind::Pendulum; }

plants::FitReport fit_dynamics(const ExperimentConfig& c) {
  if (!needs_dynamics_weights(c)) throw ConfigError("the toy plant has exact dynamics and needs no fit");
  plants::SamplingRegion region{c.fit_region.lower, c.fit_region.upper, c.u_min, c.u_max, c.x_eq(), c.u_eq()};
  return plants::fit_dynamics_network(plant_step(c), region, c.fit);
}

CertificationProblem initial_problem(const ExperimentConfig& c, const FeedforwardNetwork* dynamics) {
  if (c.plant == PlantKind::Toy) {
    CertificationProblem p = plants::toy_problem(c.toy);
    p.box = c.box;
    return p;
  }
  if (!dynamics) throw ConfigError("the pendulum plant needs fitted dynamics weights");
  const int nx = c.state_dim(), nu = c.control_dim();
  if (dynamics->input_dim() != nx + nu || dynamics->output_dim() != nx) {
    throw ConfigError("dynamics weights do not match the plant dimensions");
  }
  std::mt19937_64 rng(c.seed);
  const double leak = c.networks.leak_slope;
  CertificationProblem p{
      certify::Dynamics{*dynamics, c.x_eq(), c.u_eq(), c.u_min, c.u_max},
      certify::Controller{FeedforwardNetwork::random(nx, c.networks.controller, nu, leak, rng), c.x_eq(), c.u_eq(),
                          c.u_min, c.u_max},
      certify::LyapunovFunction::with_default_factors(FeedforwardNetwork::random(nx, c.networks.lyapunov, 1, leak, rng),
                                                      c.x_eq(), Eigen::VectorXd::Constant(nx, c.synthesis.r_init),
                                                      c.synthesis.sigma),
      c.box,
      c.eps1,
      c.eps2};
  p.validate();
  return p;
}

SynthesisResult synthesize(const ExperimentConfig& c, const CertificationProblem& initial,
                           std::function<void(const CertificationProblem&, const train::TrainState&)> on_iteration) {
  const auto t0 = std::chrono::steady_clock::now();
  SynthesisResult out(initial);
  CertificationProblem p = initial;
  if (c.synthesis.initialization == Initialization::Lqr) {
    train::WarmStartReport rep;
    p = train::lqr_warm_start(p, c.synthesis.warm_start, &rep);
    out.warm_start = std::move(rep);
  }
  std::vector<certify::Box> boxes = c.synthesis.box_schedule;
  if (boxes.empty() || boxes.back().lower != c.box.lower || boxes.back().upper != c.box.upper) {
    boxes.push_back(c.box);
  }

  train::TrainState state = train::TrainState::initial(p, c.seed, c.synthesis.loss.optimizer);
  for (const certify::Box& box : boxes) {
    const auto ts = std::chrono::steady_clock::now();
    CertificationProblem stage = certify::with_theta(p, state.theta);
    stage.box = box;
    state.x1 = inside(state.x1, box);
    state.x2 = inside(state.x2, box);
    train::TrainConfig cfg = c.train_config();
    cfg.max_iterations = state.iteration + c.synthesis.max_iterations;
    cfg.on_iteration = on_iteration;
    StageRecord rec{box};
    const int first = state.iteration;
    log_record(LogLevel::Info, {{"event", "synthesis_stage"}, {"box", box_json(box)}});
    try {
      state = c.synthesis.algorithm == 1 ? train::train_counterexamples(stage, std::move(state), cfg)
                                         : train::train_minmax(stage, std::move(state), cfg);
      rec.certified = state.converged;
    } catch (const train::IterationBudgetExceeded& e) {
      state = e.best();
      out.failure = e.what();
    }
    rec.iterations = state.iteration - first;
    rec.seconds = seconds_since(ts);
    out.stages.push_back(rec);
    p = stage;
    if (!rec.certified) break;
  }
  out.certified = out.stages.size() == boxes.size() && out.stages.back().certified;
  out.problem = certify::with_theta(p, state.theta);
  out.problem.box = c.box;
  out.state = std::move(state);
  out.seconds = seconds_since(t0);
  return out;
}

std::vector<Eigen::VectorXd> sample_sublevel_set(const CertificationProblem& p, double rho, std::size_t count,
                                                 std::mt19937_64& rng, std::size_t max_draws) {
  std::vector<Eigen::VectorXd> out;
  const int n = p.state_dim();
  for (std::size_t draw = 0; draw < max_draws && out.size() < count; ++draw) {
    Eigen::VectorXd x(n);
    for (int k = 0; k < n; ++k) x[k] = std::uniform_real_distribution<double>(p.box.lower[k], p.box.upper[k])(rng);
    if (certify::eval_V(p.lyapunov, x) <= rho) out.push_back(std::move(x));
  }
  if (out.size() < count) throw NumericalFailure("sub-level set too small to sample by rejection");
  return out;
}

nlohmann::json provenance(const ExperimentConfig& c, const std::vector<std::filesystem::path>& inputs) {
  nlohmann::json hashes = nlohmann::json::object();
  for (const std::filesystem::path& path : inputs) hashes[path.string()] = io::git_blob_hash(io::read_file(path));
  return {{"config", to_json(c)}, {"inputs", hashes}};
}

nlohmann::json synthesis_to_json(const SynthesisResult& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const StageRecord& s : r.stages) {
    stages.push_back(
        {{"box", box_json(s.box)}, {"certified", s.certified}, {"iterations", s.iterations}, {"seconds", s.seconds}});
  }
  nlohmann::json doc = {{"certified", r.certified},
                        {"iterations", r.state.iteration},
                        {"epochs", r.state.epochs},
                        {"seconds", r.seconds},
                        {"stages", stages}};
  if (!r.failure.empty()) doc["failure"] = r.failure;
  if (r.warm_start) {
    Eigen::VectorXd re = r.warm_start->closed_loop_eigenvalues.real();
    Eigen::VectorXd im = r.warm_start->closed_loop_eigenvalues.imag();
    doc["warm_start"] = {{"gain", io::matrix_to_json(r.warm_start->gain)},
                         {"closed_loop_eigenvalues", {{"real", io::vector_to_json(re)}, {"imag", io::vector_to_json(im)}}},
                         {"eigenvector_norm", r.warm_start->eigenvector_norm},
                         {"controller_mse", r.warm_start->controller_mse}};
  }
  return doc;
}

}  // namespace lyapnet::experiment
