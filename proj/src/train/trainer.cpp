#include "lyapnet/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lyapnet/errors.hpp"
#include "lyapnet/io/weights.hpp"
#include "lyapnet/log.hpp"
#include "lyapnet/milp/active_set.hpp"

namespace lyapnet::train {

using certify::CertificationProblem;
using Clock = std::chrono::steady_clock;

TrainState TrainState::initial(const CertificationProblem& p, std::uint64_t seed, OptimizerKind optimizer) {
  TrainState s;
  s.theta = certify::pack_theta(p);
  s.seed = seed;
  s.rng.seed(seed);
  s.optimizer.kind = optimizer;
  s.optimizer.reset(s.theta.size());
  return s;
}

void TrainState::validate(const CertificationProblem& p) const {
  if (theta.size() != certify::ParameterLayout::of(p).size()) throw ContractViolation("theta has the wrong length");
  if (!theta.allFinite()) throw ContractViolation("theta must be finite");
  for (const auto* set : {&x1, &x2}) {
    for (const Eigen::VectorXd& x : *set) {
      if (!p.box.contains(x, 1e-9)) throw ContractViolation("training state lies outside the box");
    }
  }
}

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Appends up to `cap` pooled states not already within tol of a set member.
std::size_t append_counterexamples(std::vector<Eigen::VectorXd>& set, const certify::ConditionOutcome& c,
                                   std::size_t cap, double tol) {
  std::size_t added = 0;
  for (const milp::PoolEntry& e : c.result.pool) {
    if (added >= cap) break;
    Eigen::VectorXd x = c.mip.state_of(e.point);
    bool duplicate = std::any_of(set.begin(), set.end(),
                                 [&](const Eigen::VectorXd& y) { return (x - y).lpNorm<Eigen::Infinity>() <= tol; });
    if (duplicate) continue;
    set.push_back(std::move(x));
    ++added;
  }
  return added;
}

void seed_sets(const CertificationProblem& p, TrainState& s, std::size_t count) {
  for (auto* set : {&s.x1, &s.x2}) {
    if (!set->empty()) continue;
    for (std::size_t i = 0; i < count; ++i) {
      Eigen::VectorXd x(p.state_dim());
      for (int k = 0; k < p.state_dim(); ++k) {
        x[k] = std::uniform_real_distribution<double>(p.box.lower[k], p.box.upper[k])(s.rng);
      }
      set->push_back(std::move(x));
    }
  }
}

std::vector<Eigen::VectorXd> gather(const std::vector<Eigen::VectorXd>& set, const std::vector<std::size_t>& order,
                                    std::size_t begin, std::size_t count) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t i = begin; i < std::min(order.size(), begin + count); ++i) out.push_back(set[order[i]]);
  return out;
}

// Batched descent on the surrogate loss; returns the final full-set loss and the epochs run.
std::pair<double, int> descend(const CertificationProblem& p0, TrainState& s, const LossConfig& cfg) {
  const std::size_t n1 = s.x1.size(), n2 = s.x2.size();
  const std::size_t batches = std::max<std::size_t>(
      1, std::max((n1 + cfg.batch_size - 1) / cfg.batch_size, (n2 + cfg.batch_size - 1) / cfg.batch_size));
  std::vector<std::size_t> o1(n1), o2(n2);
  std::iota(o1.begin(), o1.end(), 0);
  std::iota(o2.begin(), o2.end(), 0);
  int epoch = 0;
  for (; epoch < cfg.max_epochs; ++epoch) {
    CertificationProblem p = certify::with_theta(p0, s.theta);
    if (batches == 1) {
      LossValue lv = surrogate_loss(p, s.x1, s.x2, cfg);
      if (lv.loss <= 0.0) return {0.0, epoch};
      s.optimizer.step(s.theta, lv.gradient, cfg.learning_rate);
    } else {
      if (surrogate_loss(p, s.x1, s.x2, cfg).loss <= 0.0) return {0.0, epoch};
      std::shuffle(o1.begin(), o1.end(), s.rng);
      std::shuffle(o2.begin(), o2.end(), s.rng);
      const std::size_t b1 = (n1 + batches - 1) / batches, b2 = (n2 + batches - 1) / batches;
      for (std::size_t b = 0; b < batches; ++b) {
        CertificationProblem pb = certify::with_theta(p0, s.theta);
        LossValue lv = surrogate_loss(pb, gather(s.x1, o1, b * b1, b1), gather(s.x2, o2, b * b2, b2), cfg);
        if (lv.loss > 0.0) s.optimizer.step(s.theta, lv.gradient, cfg.learning_rate);
      }
    }
    ++s.epochs;
  }
  return {surrogate_loss(certify::with_theta(p0, s.theta), s.x1, s.x2, cfg).loss, epoch};
}

double violation_score(const certify::VerifyReport& r) {
  return std::max(r.positivity.value, 0.0) + std::max(r.decrease.value, 0.0);
}

struct Loop {
  const CertificationProblem& p0;
  const TrainConfig& cfg;
  const char* name;
  Clock::time_point start = Clock::now();

  Loop(const CertificationProblem& p, const TrainConfig& c, const char* n) : p0(p), cfg(c), name(n) {}

  TrainState best;
  double best_score = std::numeric_limits<double>::infinity();

  certify::VerifyReport check(TrainState& s, IterationRecord& rec) {
    CertificationProblem p = certify::with_theta(p0, s.theta);
    certify::VerifyReport rep = certify::verify(p, cfg.verify);
    rec.iteration = s.iteration;
    rec.positivity_max = rep.positivity.value;
    rec.decrease_max = rep.decrease.value;
    double score = violation_score(rep);
    if (score < best_score || rep.certified) {
      best_score = score;
      best = s;
    }
    return rep;
  }

  void finish_iteration(TrainState& s, IterationRecord rec) {
    rec.x1_size = s.x1.size();
    rec.x2_size = s.x2.size();
    rec.elapsed_seconds = seconds_since(start);
    s.curve.push_back(rec);
    log_record(LogLevel::Info, {{"event", "train_iteration"},
                  {"algorithm", name},
                  {"iteration", rec.iteration},
                  {"positivity", rec.positivity_max},
                  {"decrease", rec.decrease_max},
                  {"x1", rec.x1_size},
                  {"x2", rec.x2_size},
                  {"loss", rec.loss},
                  {"epochs", rec.epochs},
                  {"elapsed", rec.elapsed_seconds}});
    if (cfg.on_iteration) cfg.on_iteration(certify::with_theta(p0, s.theta), s);
  }

  void check_budget(const TrainState& s) {
    if (s.iteration >= cfg.max_iterations || seconds_since(start) > cfg.time_budget_seconds) {
      TrainState b = best;
      b.curve = s.curve;
      throw IterationBudgetExceeded(std::string(name) + " training stopped after " + std::to_string(s.iteration) +
                                        " iterations without certification",
                                    std::move(b));
    }
  }
};

void prepare(const CertificationProblem& p, TrainState& s, const TrainConfig& cfg) {
  p.validate();
  cfg.loss.validate();
  if (s.theta.size() == 0) s.theta = certify::pack_theta(p);
  s.validate(p);
  s.converged = false;
}

}  // namespace

TrainState train_counterexamples(const CertificationProblem& p, TrainState s, const TrainConfig& cfg) {
  prepare(p, s, cfg);
  if (cfg.initial_samples > 0) seed_sets(p, s, cfg.initial_samples);
  Loop loop(p, cfg, "counterexample");
  for (;;) {
    IterationRecord rec;
    certify::VerifyReport rep = loop.check(s, rec);
    if (rep.certified) {
      s.converged = true;
      loop.finish_iteration(s, rec);
      return s;
    }
    if (rep.positivity.value > cfg.verify.tolerance) {
      append_counterexamples(s.x1, rep.positivity, cfg.counterexample_cap, cfg.dedup_tol);
    }
    if (rep.decrease.value > cfg.verify.tolerance) {
      append_counterexamples(s.x2, rep.decrease, cfg.counterexample_cap, cfg.dedup_tol);
    }
    auto [loss, epochs] = descend(p, s, cfg.loss);
    rec.loss = loss;
    rec.epochs = epochs;
    rec.step_size = cfg.loss.learning_rate;
    ++s.iteration;
    loop.finish_iteration(s, rec);
    loop.check_budget(s);
  }
}

TrainState train_minmax(const CertificationProblem& p, TrainState s, const TrainConfig& cfg) {
  prepare(p, s, cfg);
  Loop loop(p, cfg, "minmax");
  for (;;) {
    IterationRecord rec;
    certify::VerifyReport rep = loop.check(s, rec);
    if (rep.certified) {
      s.converged = true;
      loop.finish_iteration(s, rec);
      return s;
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(s.theta.size());
    bool degenerate = false;
    for (const certify::ConditionOutcome* c : {&rep.positivity, &rep.decrease}) {
      if (c->result.best_point.empty() || c->value <= cfg.verify.tolerance) continue;
      try {
        grad += milp::mip_objective_gradient(c->mip.model, c->result, c->mip.theta_dim);
      } catch (const DegenerateActiveSet&) {
        degenerate = true;
      }
    }
    rec.loss = violation_score(rep);
    rec.step_size = cfg.minmax_step * s.step_scale;
    if (degenerate) {
      rec.step_skipped = true;
      s.step_scale = 0.5;
    } else {
      s.optimizer.step(s.theta, grad, rec.step_size);
      s.step_scale = 1.0;
    }
    ++s.iteration;
    loop.finish_iteration(s, rec);
    loop.check_budget(s);
  }
}

namespace {

nlohmann::json states_to_json(const std::vector<Eigen::VectorXd>& set) {
  nlohmann::json j = nlohmann::json::array();
  for (const Eigen::VectorXd& x : set) j.push_back(io::vector_to_json(x));
  return j;
}

std::vector<Eigen::VectorXd> states_from_json(const nlohmann::json& j) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& e : j) out.push_back(io::vector_from_json(e));
  return out;
}

}  // namespace

nlohmann::json checkpoint_to_json(const CertificationProblem& p0, const TrainState& s) {
  CertificationProblem p = s.theta.size() ? certify::with_theta(p0, s.theta) : p0;
  const certify::LyapunovFunction& l = p.lyapunov;
  std::ostringstream rng;
  rng << s.rng;
  return {{"controller", io::network_to_json(p.controller.phi)},
          {"lyapunov",
           {{"network", io::network_to_json(l.phi)},
            {"r", io::vector_to_json(l.r)},
            {"sigma", io::vector_to_json(l.sigma)},
            {"u_factor", io::matrix_to_json(l.u_factor)},
            {"v_factor", io::matrix_to_json(l.v_factor)}}},
          {"training",
           {{"x1", states_to_json(s.x1)},
            {"x2", states_to_json(s.x2)},
            {"iteration", s.iteration},
            {"epochs", s.epochs},
            {"seed", s.seed},
            {"rng", rng.str()},
            {"converged", s.converged},
            {"step_scale", s.step_scale},
            {"optimizer", s.optimizer.to_json()}}}};
}

void apply_checkpoint(const nlohmann::json& doc, CertificationProblem& p, TrainState* state) {
  try {
    FeedforwardNetwork ctrl = io::network_from_json(doc.at("controller"));
    const nlohmann::json& lj = doc.at("lyapunov");
    FeedforwardNetwork vnet = io::network_from_json(lj.at("network"));
    if (ctrl.input_dim() != p.controller.phi.input_dim() || ctrl.output_dim() != p.controller.phi.output_dim() ||
        vnet.input_dim() != p.lyapunov.phi.input_dim() || vnet.output_dim() != 1) {
      throw ConfigError("checkpoint networks do not match the problem dimensions");
    }
    if (ctrl.hidden_widths() != p.controller.phi.hidden_widths() || vnet.hidden_widths() != p.lyapunov.phi.hidden_widths()) {
      throw ConfigError("checkpoint hidden layer sizes do not match the configured networks");
    }
    certify::LyapunovFunction l{vnet,
                                io::matrix_from_json(lj.at("u_factor")),
                                io::matrix_from_json(lj.at("v_factor")),
                                io::vector_from_json(lj.at("sigma")),
                                io::vector_from_json(lj.at("r")),
                                p.lyapunov.x_eq};
    l.validate();
    p.controller.phi = std::move(ctrl);
    p.lyapunov = std::move(l);
    if (state) {
      const nlohmann::json& t = doc.at("training");
      TrainState s;
      s.theta = certify::pack_theta(p);
      s.x1 = states_from_json(t.at("x1"));
      s.x2 = states_from_json(t.at("x2"));
      s.iteration = t.at("iteration").get<int>();
      s.epochs = t.at("epochs").get<long>();
      s.seed = t.at("seed").get<std::uint64_t>();
      std::istringstream rng(t.at("rng").get<std::string>());
      rng >> s.rng;
      s.converged = t.at("converged").get<bool>();
      s.step_scale = t.at("step_scale").get<double>();
      s.optimizer = Optimizer::from_json(t.at("optimizer"));
      *state = std::move(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("checkpoint does not fit the problem: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const CertificationProblem& p, const TrainState& state) {
  io::write_json(path, checkpoint_to_json(p, state));
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& curve) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.precision(17);
  out << "iteration,positivity_max,decrease_max,x1_size,x2_size,loss,epochs,step_size,step_skipped,elapsed_seconds\n";
  for (const IterationRecord& r : curve) {
    out << r.iteration << ',' << r.positivity_max << ',' << r.decrease_max << ',' << r.x1_size << ',' << r.x2_size
        << ',' << r.loss << ',' << r.epochs << ',' << r.step_size << ',' << (r.step_skipped ? 1 : 0) << ','
        << r.elapsed_seconds << '\n';
  }
}

}  // namespace lyapnet::train
