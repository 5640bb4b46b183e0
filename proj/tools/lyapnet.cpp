#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lyapnet/errors.hpp"
#include "lyapnet/experiment/pipeline.hpp"
#include "lyapnet/io/weights.hpp"
#include "lyapnet/log.hpp"

namespace fs = std::filesystem;
using namespace lyapnet;
using experiment::ExperimentConfig;

namespace {

constexpr int kContractFailed = 1;
constexpr int kUsageError = 2;
constexpr int kRuntimeError = 3;

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> algorithm;
  std::string box_schedule;
  std::string dynamics;
  std::string checkpoint;
  std::string initial_states;
  std::size_t samples = 20;
  std::string source = "both";
  bool allow_uncertified = false;
  LogLevel log_level = LogLevel::Info;
};

ExperimentConfig resolve_config(const Options& o) {
  nlohmann::json doc;
  try {
    doc = io::read_json(o.config);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + o.config + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (o.seed) doc["seed"] = *o.seed;
  if (o.algorithm) doc["synthesis"]["algorithm"] = *o.algorithm;
  if (!o.box_schedule.empty()) {
    try {
      doc["synthesis"]["box_schedule"] = io::read_json(o.box_schedule);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("cannot read box schedule " + o.box_schedule + ": " + e.what());
    }
  }
  if (!o.dynamics.empty()) doc["dynamics_weights"] = o.dynamics;
  return experiment::parse_config(doc);
}

fs::path out_path(const Options& o, const std::string& name) { return fs::path(o.out) / name; }

fs::path dynamics_path(const Options& o, const ExperimentConfig& c) {
  fs::path p(c.dynamics_weights);
  return p.is_absolute() ? p : fs::path(o.out) / p;
}

fs::path checkpoint_path(const Options& o) {
  return o.checkpoint.empty() ? out_path(o, "checkpoint.json") : fs::path(o.checkpoint);
}

void write_output(const fs::path& path, const nlohmann::json& doc, nlohmann::json& hashes) {
  io::write_json(path, doc);
  hashes[path.filename().string()] = io::git_blob_hash(io::read_file(path));
}

/// The initial problem for the config plus the weight files it was built from.
certify::CertificationProblem load_problem(const Options& o, const ExperimentConfig& c,
                                           std::vector<fs::path>& inputs) {
  if (!experiment::needs_dynamics_weights(c)) return experiment::initial_problem(c);
  fs::path path = dynamics_path(o, c);
  if (!fs::exists(path)) throw ConfigError("dynamics weights " + path.string() + " not found; run `fit` first");
  FeedforwardNetwork net = io::read_network(path);
  inputs.push_back(path);
  return experiment::initial_problem(c, &net);
}

certify::CertificationProblem load_checkpointed(const Options& o, const ExperimentConfig& c,
                                                std::vector<fs::path>& inputs) {
  certify::CertificationProblem p = load_problem(o, c, inputs);
  fs::path path = checkpoint_path(o);
  if (!fs::exists(path)) throw ConfigError("checkpoint " + path.string() + " not found");
  train::apply_checkpoint(io::read_json(path), p);
  inputs.push_back(path);
  return p;
}

int cmd_fit(const Options& o) {
  ExperimentConfig c = resolve_config(o);
  fs::create_directories(o.out);
  plants::FitReport rep = experiment::fit_dynamics(c);
  nlohmann::json hashes = nlohmann::json::object();
  fs::path weights = dynamics_path(o, c);
  fs::create_directories(weights.parent_path());
  write_output(weights, io::network_to_json(rep.network), hashes);
  nlohmann::json doc = experiment::provenance(c, {});
  doc["fit"] = {{"train_mse", rep.train_mse},
                {"holdout_mse", rep.holdout_mse},
                {"target_mse", c.fit.target_mse},
                {"converged", rep.converged},
                {"adam_epochs", rep.adam_epochs},
                {"lm_iterations", rep.lm_iterations}};
  doc["outputs"] = hashes;
  io::write_json(out_path(o, "fit_report.json"), doc);
  std::cout << "holdout mse " << rep.holdout_mse << (rep.converged ? " (target met)" : " (target missed)") << "\n";
  return rep.converged ? 0 : kContractFailed;
}

int cmd_synthesize(const Options& o) {
  ExperimentConfig c = resolve_config(o);
  fs::create_directories(o.out);
  std::vector<fs::path> inputs;
  certify::CertificationProblem p = load_problem(o, c, inputs);
  const nlohmann::json prov = experiment::provenance(c, inputs);
  const fs::path ckpt = out_path(o, "checkpoint.json");
  auto save = [&](const certify::CertificationProblem& q, const train::TrainState& s) {
    nlohmann::json doc = train::checkpoint_to_json(q, s);
    doc["provenance"] = prov;
    io::write_json(ckpt, doc);
  };
  experiment::SynthesisResult r = experiment::synthesize(c, p, save);

  nlohmann::json hashes = nlohmann::json::object();
  nlohmann::json ckpt_doc = train::checkpoint_to_json(r.problem, r.state);
  ckpt_doc["provenance"] = prov;
  write_output(ckpt, ckpt_doc, hashes);
  train::write_curve_csv(out_path(o, "curve.csv"), r.state.curve);
  hashes["curve.csv"] = io::git_blob_hash(io::read_file(out_path(o, "curve.csv")));

  certify::VerifyOptions vo = c.verify_options();
  certify::VerifyReport vr = certify::verify(r.problem, vo);
  nlohmann::json doc = prov;
  doc["synthesis"] = experiment::synthesis_to_json(r);
  doc["verification"] = certify::report_to_json(vr, vo);
  doc["outputs"] = hashes;
  io::write_json(out_path(o, "report.json"), doc);
  std::cout << (vr.certified ? "certified" : "not certified") << " after " << r.state.iteration << " iterations, "
            << r.seconds << " s\n";
  return vr.certified || o.allow_uncertified ? 0 : kContractFailed;
}

int cmd_verify(const Options& o) {
  ExperimentConfig c = resolve_config(o);
  fs::create_directories(o.out);
  std::vector<fs::path> inputs;
  certify::CertificationProblem p = load_checkpointed(o, c, inputs);
  certify::VerifyOptions vo = c.verify_options();
  certify::VerifyReport vr = certify::verify(p, vo);
  nlohmann::json doc = experiment::provenance(c, inputs);
  doc["verification"] = certify::report_to_json(vr, vo);
  io::write_json(out_path(o, "verify_report.json"), doc);
  std::cout << certify::to_string(vr.status) << ": positivity " << vr.positivity.value << ", decrease "
            << vr.decrease.value << "\n";
  return vr.certified ? 0 : kContractFailed;
}

int cmd_roa(const Options& o) {
  ExperimentConfig c = resolve_config(o);
  fs::create_directories(o.out);
  std::vector<fs::path> inputs;
  certify::CertificationProblem p = load_checkpointed(o, c, inputs);
  certify::RoaResult roa = certify::roa_level(p, c.verify_options());
  nlohmann::json doc = experiment::provenance(c, inputs);
  doc["roa"] = certify::roa_to_json(roa);
  io::write_json(out_path(o, "roa.json"), doc);
  std::cout << "rho " << roa.rho << (roa.exact ? "" : " (solver budget reached; lower bound)") << "\n";
  return roa.exact ? 0 : kContractFailed;
}

std::vector<Eigen::VectorXd> read_initial_states(const fs::path& path, int n) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<Eigen::VectorXd> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    if (static_cast<int>(values.size()) != n) {
      throw ConfigError("initial state rows need " + std::to_string(n) + " columns");
    }
    out.push_back(Eigen::Map<Eigen::VectorXd>(values.data(), n));
  }
  return out;
}

int cmd_simulate(const Options& o) {
  ExperimentConfig c = resolve_config(o);
  if (o.source != "network" && o.source != "plant" && o.source != "both") {
    throw ConfigError("--source must be network, plant or both");
  }
  std::vector<fs::path> inputs;
  certify::CertificationProblem p = load_checkpointed(o, c, inputs);
  std::vector<Eigen::VectorXd> starts;
  nlohmann::json origin;
  if (!o.initial_states.empty()) {
    starts = read_initial_states(o.initial_states, p.state_dim());
    inputs.push_back(o.initial_states);
    origin = {{"file", o.initial_states}};
  } else {
    certify::RoaResult roa = certify::roa_level(p, c.verify_options());
    std::mt19937_64 rng(c.seed);
    starts = experiment::sample_sublevel_set(p, roa.rho, o.samples, rng);
    origin = {{"sublevel_set", certify::roa_to_json(roa)}, {"samples", o.samples}};
  }
  const fs::path dir = out_path(o, "trajectories");
  fs::create_directories(dir);
  nlohmann::json runs = nlohmann::json::array();
  for (const std::string source : {"network", "plant"}) {
    if (o.source != "both" && o.source != source) continue;
    plants::StepFunction step =
        source == "network" ? plants::network_step(p.dynamics) : experiment::plant_step(c);
    int converged = 0;
    for (std::size_t k = 0; k < starts.size(); ++k) {
      plants::TrajectoryRecord rec = plants::simulate(step, p.controller, p.lyapunov, starts[k], c.simulate);
      const std::string name = source + "_" + std::to_string(k) + ".csv";
      plants::write_trajectory_csv(dir / name, rec);
      converged += rec.converged ? 1 : 0;
      runs.push_back({{"source", source},
                      {"file", name},
                      {"x0", io::vector_to_json(starts[k])},
                      {"converged", rec.converged},
                      {"diverged", rec.diverged}});
    }
    std::cout << source << ": " << converged << "/" << starts.size() << " converged\n";
  }
  nlohmann::json doc = experiment::provenance(c, inputs);
  doc["initial_states"] = origin;
  doc["trajectories"] = runs;
  io::write_json(out_path(o, "simulate_summary.json"), doc);
  return 0;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--dynamics", o.dynamics, "Dynamics weight file (default: <out>/dynamics.json)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lyapunov-stable neural-network controller synthesis"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--log-level", o.log_level, "Structured log verbosity on stderr")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, LogLevel>{{"quiet", LogLevel::Quiet}, {"info", LogLevel::Info}, {"debug", LogLevel::Debug}},
          CLI::ignore_case));

  CLI::App* fit = app.add_subcommand("fit", "Fit the dynamics network to the plant");
  add_common(fit, o);

  CLI::App* syn = app.add_subcommand("synthesize", "Train a controller and Lyapunov function");
  add_common(syn, o);
  syn->add_option("--algorithm", o.algorithm, "1: counter-example training, 2: min-max training");
  syn->add_option("--box-schedule", o.box_schedule, "JSON list of nested boxes solved first")
      ->check(CLI::ExistingFile);
  syn->add_flag("--allow-uncertified", o.allow_uncertified, "Exit 0 even when certification fails");

  CLI::App* ver = app.add_subcommand("verify", "Verify a checkpoint");
  add_common(ver, o);
  ver->add_option("--checkpoint", o.checkpoint, "Checkpoint (default: <out>/checkpoint.json)");

  CLI::App* roa = app.add_subcommand("roa", "Largest verified sub-level set inside the box");
  add_common(roa, o);
  roa->add_option("--checkpoint", o.checkpoint, "Checkpoint (default: <out>/checkpoint.json)");

  CLI::App* sim = app.add_subcommand("simulate", "Roll out the closed loop");
  add_common(sim, o);
  sim->add_option("--checkpoint", o.checkpoint, "Checkpoint (default: <out>/checkpoint.json)");
  sim->add_option("--initial-states", o.initial_states, "CSV of initial states with a header row")
      ->check(CLI::ExistingFile);
  sim->add_option("--samples", o.samples, "States sampled from the verified sub-level set")->capture_default_str();
  sim->add_option("--source", o.source, "network, plant or both")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    set_log_level(o.log_level);
    if (*fit) return cmd_fit(o);
    if (*syn) return cmd_synthesize(o);
    if (*ver) return cmd_verify(o);
    if (*roa) return cmd_roa(o);
    return cmd_simulate(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
