#include "lyapnet/experiment/config.hpp"

#include <algorithm>
#include <set>

#include "lyapnet/errors.hpp"
#include "lyapnet/io/weights.hpp"

namespace lyapnet::experiment {

namespace {

using nlohmann::json;

/// Reads fields of one JSON object, rejecting unknown keys.
class Section {
 public:
  Section(const json& doc, std::string path, std::set<std::string> allowed)
      : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_ + " must be an object");
    for (const auto& item : doc_.items()) {
      if (!allowed.count(item.key())) throw ConfigError("unknown field " + where(item.key()));
    }
  }

  bool has(const std::string& key) const { return doc_.contains(key); }

  const json& at(const std::string& key) const {
    if (!doc_.contains(key)) throw ConfigError("missing field " + where(key));
    return doc_.at(key);
  }

  template <typename T>
  T get(const std::string& key) const {
    try {
      return at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("field " + where(key) + " has the wrong type");
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  Eigen::VectorXd vector(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array() || v.empty() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
      throw ConfigError("field " + where(key) + " must be a non-empty list of numbers");
    }
    return io::vector_from_json(v);
  }

  std::vector<int> sizes(const std::string& key, std::vector<int> fallback) const {
    if (!has(key)) return fallback;
    std::vector<int> out = get<std::vector<int>>(key);
    if (std::any_of(out.begin(), out.end(), [](int n) { return n <= 0; })) {
      throw ConfigError("field " + where(key) + " must list positive layer sizes");
    }
    return out;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& doc_;
  std::string path_;
};

certify::Box parse_box(const json& doc, const std::string& path) {
  Section s(doc, path, {"lower", "upper"});
  certify::Box box{s.vector("lower"), s.vector("upper")};
  if (box.lower.size() != box.upper.size() || ((box.upper - box.lower).array() <= 0.0).any()) {
    throw ConfigError(path + " needs lower < upper in every dimension");
  }
  return box;
}

json box_to_json(const certify::Box& b) {
  return {{"lower", io::vector_to_json(b.lower)}, {"upper", io::vector_to_json(b.upper)}};
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

train::OptimizerKind parse_optimizer(const std::string& name) {
  try {
    return train::optimizer_from_string(name);
  } catch (const std::exception&) {
    throw ConfigError("synthesis.loss.optimizer must be \"gd\" or \"adam\"");
  }
}

double parse_norm_order(const json& v) {
  if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  if (v.is_number()) return v.get<double>();
  throw ConfigError("synthesis.loss.p must be 1, 4 or \"inf\"");
}

}  // namespace

const char* to_string(PlantKind kind) { return kind == PlantKind::Pendulum ? "pendulum" : "toy"; }

const char* to_string(Initialization init) { return init == Initialization::Lqr ? "lqr" : "random"; }

int ExperimentConfig::state_dim() const { return plant == PlantKind::Pendulum ? 2 : 1; }

int ExperimentConfig::control_dim() const { return 1; }

Eigen::VectorXd ExperimentConfig::x_eq() const {
  return plant == PlantKind::Pendulum ? pendulum.x_eq() : Eigen::VectorXd::Zero(1);
}

Eigen::VectorXd ExperimentConfig::u_eq() const {
  return plant == PlantKind::Pendulum ? pendulum.u_eq() : Eigen::VectorXd::Zero(1);
}

certify::VerifyOptions ExperimentConfig::verify_options() const {
  certify::VerifyOptions o;
  o.tolerance = solver.tolerance;
  o.solver.node_budget = solver.node_budget;
  o.solver.time_budget_seconds = solver.time_budget_seconds;
  o.build.bound_method = solver.bound_method;
  o.workers = certify::workers_from_env();
  return o;
}

train::TrainConfig ExperimentConfig::train_config() const {
  train::TrainConfig c;
  c.loss = synthesis.loss;
  c.max_iterations = synthesis.max_iterations;
  c.time_budget_seconds = synthesis.time_budget_seconds;
  c.counterexample_cap = synthesis.counterexample_cap;
  c.dedup_tol = synthesis.dedup_tolerance;
  c.initial_samples = synthesis.initial_samples;
  c.minmax_step = synthesis.minmax_step;
  c.verify = verify_options();
  return c;
}

ExperimentConfig parse_config(const json& doc) {
  Section top(doc, "", {"name", "seed", "plant", "control_limits", "networks", "box", "eps1", "eps2", "fit",
                        "synthesis", "solver", "simulate", "dynamics_weights"});
  ExperimentConfig c;
  c.name = top.get<std::string>("name", "experiment");
  c.seed = top.get<std::uint64_t>("seed", 0);
  c.dynamics_weights = top.get<std::string>("dynamics_weights", c.dynamics_weights);

  const json& pj = top.at("plant");
  const std::string kind = Section(pj, "plant", {"kind", "mass", "length", "damping", "gravity", "dt", "a",
                                                 "perturbed", "v_scale"})
                               .get<std::string>("kind");
  if (kind == "pendulum") {
    c.plant = PlantKind::Pendulum;
    Section(pj, "plant", {"kind", "mass", "length", "damping", "gravity", "dt"});
    json params = pj;
    params.erase("kind");
    c.pendulum = plants::PendulumPlant::from_json(params);
  } else if (kind == "toy") {
    c.plant = PlantKind::Toy;
    Section s(pj, "plant", {"kind", "a", "perturbed", "v_scale"});
    c.toy.a = s.get<double>("a", c.toy.a);
    c.toy.perturbed = s.get<bool>("perturbed", c.toy.perturbed);
    c.toy.v_scale = s.get<double>("v_scale", c.toy.v_scale);
    require(c.toy.v_scale > 0.1, "plant.v_scale must exceed the Sigma floor 0.1");
  } else {
    throw ConfigError("plant.kind must be \"pendulum\" or \"toy\"");
  }
  const int nx = c.state_dim(), nu = c.control_dim();

  c.box = parse_box(top.at("box"), "box");
  require(c.box.dim() == nx, "box must have " + std::to_string(nx) + " dimensions");
  require(c.box.strictly_contains(c.x_eq()), "box must contain the equilibrium in its interior");
  c.eps1 = top.get<double>("eps1", c.eps1);
  c.eps2 = top.get<double>("eps2", c.eps2);
  require(c.eps1 > 0.0 && c.eps1 < 1.0, "eps1 must lie in (0, 1)");
  require(c.eps2 > 0.0, "eps2 must be positive");

  if (c.plant == PlantKind::Toy) {
    c.u_min = Eigen::VectorXd::Constant(1, -1.0);
    c.u_max = Eigen::VectorXd::Constant(1, 1.0);
    if (top.has("control_limits")) {
      certify::Box lim = parse_box(top.at("control_limits"), "control_limits");
      require(lim.lower == c.u_min && lim.upper == c.u_max, "the toy plant has control limits [-1, 1]");
    }
  } else {
    certify::Box lim = parse_box(top.at("control_limits"), "control_limits");
    c.u_min = lim.lower;
    c.u_max = lim.upper;
    require(c.u_min.size() == nu, "control_limits must have " + std::to_string(nu) + " dimensions");
    require((c.u_min.array() <= c.u_eq().array()).all() && (c.u_eq().array() <= c.u_max.array()).all(),
            "control_limits must contain the equilibrium control");
  }

  if (top.has("networks")) {
    Section s(top.at("networks"), "networks", {"leak_slope", "dynamics", "controller", "lyapunov"});
    c.networks.leak_slope = s.get<double>("leak_slope", c.networks.leak_slope);
    c.networks.dynamics = s.sizes("dynamics", c.networks.dynamics);
    c.networks.controller = s.sizes("controller", c.networks.controller);
    c.networks.lyapunov = s.sizes("lyapunov", c.networks.lyapunov);
    require(c.networks.leak_slope >= 0.0 && c.networks.leak_slope < 1.0, "networks.leak_slope must lie in [0, 1)");
  }
  if (c.plant == PlantKind::Toy) {
    c.toy.box = std::max(-c.box.lower[0], c.box.upper[0]);
    c.toy.eps1 = c.eps1;
    c.toy.eps2 = c.eps2;
    c.toy.leak_slope = c.networks.leak_slope;
    c.toy.controller_hidden = c.networks.controller;
    c.toy.lyapunov_hidden = c.networks.lyapunov;
    c.toy.seed = c.seed;
  }

  c.fit.hidden = c.networks.dynamics;
  c.fit.leak_slope = c.networks.leak_slope;
  c.fit.seed = c.seed;
  c.fit_region = c.box;
  if (top.has("fit")) {
    Section s(top.at("fit"), "fit", {"sample_count", "holdout_count", "near_fraction", "near_radius", "adam_epochs",
                                     "batch_size", "learning_rate", "lm_iterations", "target_mse", "region"});
    c.fit.sample_count = s.get<std::size_t>("sample_count", c.fit.sample_count);
    c.fit.holdout_count = s.get<std::size_t>("holdout_count", c.fit.holdout_count);
    c.fit.near_fraction = s.get<double>("near_fraction", c.fit.near_fraction);
    c.fit.near_radius = s.get<double>("near_radius", c.fit.near_radius);
    c.fit.adam_epochs = s.get<int>("adam_epochs", c.fit.adam_epochs);
    c.fit.batch_size = s.get<std::size_t>("batch_size", c.fit.batch_size);
    c.fit.learning_rate = s.get<double>("learning_rate", c.fit.learning_rate);
    c.fit.lm_iterations = s.get<int>("lm_iterations", c.fit.lm_iterations);
    c.fit.target_mse = s.get<double>("target_mse", c.fit.target_mse);
    if (s.has("region")) c.fit_region = parse_box(s.at("region"), "fit.region");
    require(c.fit.sample_count > 0 && c.fit.holdout_count > 0, "fit sample counts must be positive");
    require(c.fit_region.dim() == nx, "fit.region must have " + std::to_string(nx) + " dimensions");
  }

  SynthesisConfig& y = c.synthesis;
  y.warm_start.seed = c.seed;
  if (top.has("synthesis")) {
    Section s(top.at("synthesis"), "synthesis",
              {"algorithm", "initialization", "warm_start", "r_init", "sigma", "loss", "max_iterations",
               "time_budget_seconds", "counterexample_cap", "dedup_tolerance", "initial_samples", "minmax_step",
               "box_schedule"});
    y.algorithm = s.get<int>("algorithm", y.algorithm);
    const std::string init = s.get<std::string>("initialization", to_string(y.initialization));
    require(init == "random" || init == "lqr", "synthesis.initialization must be \"random\" or \"lqr\"");
    y.initialization = init == "lqr" ? Initialization::Lqr : Initialization::Random;
    if (s.has("warm_start")) {
      Section w(s.at("warm_start"), "synthesis.warm_start",
                {"state_weight", "control_weight", "samples", "epochs", "batch_size", "learning_rate"});
      y.warm_start.state_weight = w.get<double>("state_weight", y.warm_start.state_weight);
      y.warm_start.control_weight = w.get<double>("control_weight", y.warm_start.control_weight);
      y.warm_start.samples = w.get<std::size_t>("samples", y.warm_start.samples);
      y.warm_start.epochs = w.get<int>("epochs", y.warm_start.epochs);
      y.warm_start.batch_size = w.get<std::size_t>("batch_size", y.warm_start.batch_size);
      y.warm_start.learning_rate = w.get<double>("learning_rate", y.warm_start.learning_rate);
    }
    y.r_init = s.get<double>("r_init", y.r_init);
    y.sigma = s.get<double>("sigma", y.sigma);
    if (s.has("loss")) {
      Section l(s.at("loss"), "synthesis.loss", {"p", "batch_size", "learning_rate", "max_epochs", "optimizer"});
      if (l.has("p")) y.loss.p = parse_norm_order(l.at("p"));
      y.loss.batch_size = l.get<std::size_t>("batch_size", y.loss.batch_size);
      y.loss.learning_rate = l.get<double>("learning_rate", y.loss.learning_rate);
      y.loss.max_epochs = l.get<int>("max_epochs", y.loss.max_epochs);
      if (l.has("optimizer")) y.loss.optimizer = parse_optimizer(l.get<std::string>("optimizer"));
    }
    y.max_iterations = s.get<int>("max_iterations", y.max_iterations);
    y.time_budget_seconds = s.get<double>("time_budget_seconds", y.time_budget_seconds);
    y.counterexample_cap = s.get<std::size_t>("counterexample_cap", y.counterexample_cap);
    y.dedup_tolerance = s.get<double>("dedup_tolerance", y.dedup_tolerance);
    y.initial_samples = s.get<std::size_t>("initial_samples", y.initial_samples);
    y.minmax_step = s.get<double>("minmax_step", y.minmax_step);
    if (s.has("box_schedule")) y.box_schedule = parse_box_schedule(s.at("box_schedule"));
  }
  require(y.algorithm == 1 || y.algorithm == 2, "synthesis.algorithm must be 1 or 2");
  require(y.initialization == Initialization::Random || c.plant == PlantKind::Pendulum,
          "synthesis.initialization \"lqr\" needs a learned-dynamics plant");
  require(y.sigma > 0.0, "synthesis.sigma must be positive");
  require(y.max_iterations > 0 && y.time_budget_seconds > 0.0, "synthesis budgets must be positive");
  require(y.minmax_step > 0.0, "synthesis.minmax_step must be positive");
  try {
    y.loss.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("synthesis.loss: ") + e.what());
  }
  for (const certify::Box& b : y.box_schedule) {
    require(b.dim() == nx, "synthesis.box_schedule boxes must have " + std::to_string(nx) + " dimensions");
    require(b.strictly_contains(c.x_eq()), "synthesis.box_schedule boxes must contain the equilibrium");
  }

  if (top.has("solver")) {
    Section s(top.at("solver"), "solver", {"tolerance", "node_budget", "time_budget_seconds", "bound_method"});
    c.solver.tolerance = s.get<double>("tolerance", c.solver.tolerance);
    c.solver.node_budget = s.get<long>("node_budget", c.solver.node_budget);
    c.solver.time_budget_seconds = s.get<double>("time_budget_seconds", c.solver.time_budget_seconds);
    const std::string m = s.get<std::string>("bound_method", "interval");
    require(m == "interval" || m == "lp", "solver.bound_method must be \"interval\" or \"lp\"");
    c.solver.bound_method = m == "lp" ? milp::BoundMethod::Lp : milp::BoundMethod::Interval;
  }
  require(c.solver.tolerance >= 0.0 && c.solver.node_budget > 0 && c.solver.time_budget_seconds > 0.0,
          "solver budgets must be positive");

  c.simulate.dt = c.plant == PlantKind::Pendulum ? c.pendulum.dt : 1.0;
  if (top.has("simulate")) {
    Section s(top.at("simulate"), "simulate", {"horizon", "convergence_tol", "blowup_norm"});
    c.simulate.horizon = s.get<int>("horizon", c.simulate.horizon);
    c.simulate.convergence_tol = s.get<double>("convergence_tol", c.simulate.convergence_tol);
    c.simulate.blowup_norm = s.get<double>("blowup_norm", c.simulate.blowup_norm);
  }
  require(c.simulate.horizon > 0 && c.simulate.convergence_tol > 0.0, "simulate settings must be positive");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = io::read_json(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

std::vector<certify::Box> parse_box_schedule(const json& doc) {
  if (!doc.is_array()) throw ConfigError("box schedule must be a list of boxes");
  std::vector<certify::Box> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    out.push_back(parse_box(doc[i], "box_schedule[" + std::to_string(i) + "]"));
  }
  return out;
}

json to_json(const ExperimentConfig& c) {
  json plant;
  if (c.plant == PlantKind::Pendulum) {
    plant = c.pendulum.to_json();
  } else {
    plant = {{"a", c.toy.a}, {"perturbed", c.toy.perturbed}, {"v_scale", c.toy.v_scale}};
  }
  plant["kind"] = to_string(c.plant);
  const SynthesisConfig& y = c.synthesis;
  json schedule = json::array();
  for (const certify::Box& b : y.box_schedule) schedule.push_back(box_to_json(b));
  json p = std::isinf(y.loss.p) ? json("inf") : json(y.loss.p);
  return {
      {"name", c.name},
      {"seed", c.seed},
      {"plant", plant},
      {"control_limits", box_to_json(certify::Box{c.u_min, c.u_max})},
      {"networks",
       {{"leak_slope", c.networks.leak_slope},
        {"dynamics", c.networks.dynamics},
        {"controller", c.networks.controller},
        {"lyapunov", c.networks.lyapunov}}},
      {"box", box_to_json(c.box)},
      {"eps1", c.eps1},
      {"eps2", c.eps2},
      {"fit",
       {{"sample_count", c.fit.sample_count},
        {"holdout_count", c.fit.holdout_count},
        {"near_fraction", c.fit.near_fraction},
        {"near_radius", c.fit.near_radius},
        {"adam_epochs", c.fit.adam_epochs},
        {"batch_size", c.fit.batch_size},
        {"learning_rate", c.fit.learning_rate},
        {"lm_iterations", c.fit.lm_iterations},
        {"target_mse", c.fit.target_mse},
        {"region", box_to_json(c.fit_region)}}},
      {"synthesis",
       {{"algorithm", y.algorithm},
        {"initialization", to_string(y.initialization)},
        {"warm_start",
         {{"state_weight", y.warm_start.state_weight},
          {"control_weight", y.warm_start.control_weight},
          {"samples", y.warm_start.samples},
          {"epochs", y.warm_start.epochs},
          {"batch_size", y.warm_start.batch_size},
          {"learning_rate", y.warm_start.learning_rate}}},
        {"r_init", y.r_init},
        {"sigma", y.sigma},
        {"loss",
         {{"p", p},
          {"batch_size", y.loss.batch_size},
          {"learning_rate", y.loss.learning_rate},
          {"max_epochs", y.loss.max_epochs},
          {"optimizer", train::to_string(y.loss.optimizer)}}},
        {"max_iterations", y.max_iterations},
        {"time_budget_seconds", y.time_budget_seconds},
        {"counterexample_cap", y.counterexample_cap},
        {"dedup_tolerance", y.dedup_tolerance},
        {"initial_samples", y.initial_samples},
        {"minmax_step", y.minmax_step},
        {"box_schedule", schedule}}},
      {"solver",
       {{"tolerance", c.solver.tolerance},
        {"node_budget", c.solver.node_budget},
        {"time_budget_seconds", c.solver.time_budget_seconds},
        {"bound_method", c.solver.bound_method == milp::BoundMethod::Lp ? "lp" : "interval"}}},
      {"simulate",
       {{"horizon", c.simulate.horizon},
        {"convergence_tol", c.simulate.convergence_tol},
        {"blowup_norm", c.simulate.blowup_norm}}},
      {"dynamics_weights", c.dynamics_weights},
  };
}

}  // namespace lyapnet::experiment
