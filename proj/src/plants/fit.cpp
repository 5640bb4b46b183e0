#include "lyapnet/plants/fit.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lyapnet/errors.hpp"
#include "lyapnet/log.hpp"
#include "lyapnet/train/optimizer.hpp"

namespace lyapnet::plants {

namespace {

struct Affine {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
};

Affine moments(const std::vector<Eigen::VectorXd>& v) {
  const Eigen::Index n = v.front().size();
  Affine a{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (const auto& e : v) a.mean += e;
  a.mean /= static_cast<double>(v.size());
  for (const auto& e : v) a.scale += (e - a.mean).cwiseAbs2();
  a.scale = (a.scale / static_cast<double>(v.size())).cwiseSqrt();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(a.scale[i] > 1e-12)) a.scale[i] = 1.0;
  }
  return a;
}

Dataset normalized(const Dataset& d, const Affine& in, const Affine& out) {
  Dataset n;
  for (std::size_t i = 0; i < d.size(); ++i) {
    n.inputs.push_back((d.inputs[i] - in.mean).cwiseQuotient(in.scale));
    n.targets.push_back((d.targets[i] - out.mean).cwiseQuotient(out.scale));
  }
  return n;
}

// Folds the input and output normalization into the first and last layers.
FeedforwardNetwork fold(const FeedforwardNetwork& net, const Affine& in, const Affine& out) {
  std::vector<DenseLayer> layers = net.layers();
  DenseLayer& first = layers.front();
  first.bias -= first.weight * in.mean.cwiseQuotient(in.scale);
  first.weight = first.weight * in.scale.cwiseInverse().asDiagonal();
  DenseLayer& last = layers.back();
  last.weight = out.scale.asDiagonal() * last.weight;
  last.bias = out.scale.cwiseProduct(last.bias) + out.mean;
  return FeedforwardNetwork(std::move(layers), net.leak_slope());
}

// Gradient of the mean squared error over the given sample indices.
Eigen::VectorXd mse_gradient(const FeedforwardNetwork& net, const Dataset& d, const std::vector<std::size_t>& idx,
                             std::size_t begin, std::size_t end) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(net.parameter_count());
  const double w = 2.0 / static_cast<double>((end - begin) * static_cast<std::size_t>(net.output_dim()));
  for (std::size_t k = begin; k < end; ++k) {
    const std::size_t i = idx[k];
    ForwardResult f = net.forward(d.inputs[i]);
    g += net.backward(f, w * (f.output - d.targets[i])).params;
  }
  return g;
}

FeedforwardNetwork levenberg_marquardt(FeedforwardNetwork net, const Dataset& d, int iterations, int& used) {
  const int np = net.parameter_count();
  const int no = net.output_dim();
  double lambda = 1e-3;
  double loss = mean_squared_error(net, d);
  used = 0;
  for (int it = 0; it < iterations && loss > 1e-16; ++it) {
    ++used;
    Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(np, np);
    Eigen::VectorXd jtr = Eigen::VectorXd::Zero(np);
    for (std::size_t i = 0; i < d.size(); ++i) {
      ForwardResult f = net.forward(d.inputs[i]);
      Eigen::VectorXd r = f.output - d.targets[i];
      for (int k = 0; k < no; ++k) {
        Eigen::VectorXd row = net.backward(f, Eigen::VectorXd::Unit(no, k)).params;
        jtj.selfadjointView<Eigen::Lower>().rankUpdate(row);
        jtr += r[k] * row;
      }
    }
    jtj.triangularView<Eigen::StrictlyUpper>() = jtj.transpose();
    const Eigen::VectorXd theta = net.pack();
    bool improved = false;
    for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
      Eigen::VectorXd step = a.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      FeedforwardNetwork cand = net.with_parameters(Eigen::VectorXd(theta + step));
      double cl = mean_squared_error(cand, d);
      if (cl < loss) {
        net = std::move(cand);
        loss = cl;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!improved) break;
  }
  return net;
}

}  // namespace

Dataset sample_dataset(const StepFunction& step, const SamplingRegion& r, std::size_t count, double near_fraction,
                       double near_radius, std::uint64_t seed) {
  if (count == 0) throw ContractViolation("at least one regression sample is required");
  const Eigen::Index nx = r.x_lower.size(), nu = r.u_lower.size();
  if (r.x_upper.size() != nx || r.x_eq.size() != nx || r.u_upper.size() != nu || r.u_eq.size() != nu) {
    throw ContractViolation("sampling region dimensions disagree");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t near = static_cast<std::size_t>(std::round(near_fraction * static_cast<double>(count)));
  Dataset d;
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::VectorXd lo(nx + nu), hi(nx + nu), center(nx + nu);
    lo << r.x_lower, r.u_lower;
    hi << r.x_upper, r.u_upper;
    center << r.x_eq, r.u_eq;
    if (i < near) {
      Eigen::VectorXd half = near_radius * (hi - lo);
      lo = lo.cwiseMax(center - half);
      hi = hi.cwiseMin(center + half);
    }
    Eigen::VectorXd in(nx + nu);
    for (Eigen::Index k = 0; k < nx + nu; ++k) in[k] = lo[k] + (hi[k] - lo[k]) * unit(rng);
    d.targets.push_back(step(in.head(nx), in.tail(nu)));
    d.inputs.push_back(std::move(in));
  }
  return d;
}

double mean_squared_error(const FeedforwardNetwork& net, const Dataset& d) {
  if (d.size() == 0) throw ContractViolation("mean squared error of an empty dataset");
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) acc += (net.evaluate(d.inputs[i]) - d.targets[i]).squaredNorm();
  return acc / static_cast<double>(d.size() * static_cast<std::size_t>(net.output_dim()));
}

FitReport fit_dynamics_network(const Dataset& train, const Dataset& holdout, int state_dim, const FitOptions& o) {
  if (train.size() == 0) throw ContractViolation("cannot fit dynamics without samples");
  const int in_dim = static_cast<int>(train.inputs.front().size());
  if (state_dim <= 0 || state_dim >= in_dim + 1 || train.targets.front().size() != state_dim) {
    throw ContractViolation("dataset dimensions do not match the state dimension");
  }
  Affine in = moments(train.inputs), out = moments(train.targets);
  Dataset nd = normalized(train, in, out);
  std::mt19937_64 rng(o.seed);
  FeedforwardNetwork net = FeedforwardNetwork::random(in_dim, o.hidden, state_dim, o.leak_slope, rng);

  train::Optimizer adam;
  adam.kind = train::OptimizerKind::Adam;
  Eigen::VectorXd theta = net.pack();
  adam.reset(theta.size());
  std::vector<std::size_t> idx(nd.size());
  std::iota(idx.begin(), idx.end(), 0);
  FitReport report{net};
  for (int e = 0; e < o.adam_epochs; ++e) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t b = 0; b < idx.size(); b += o.batch_size) {
      FeedforwardNetwork cur = net.with_parameters(theta);
      adam.step(theta, mse_gradient(cur, nd, idx, b, std::min(idx.size(), b + o.batch_size)), o.learning_rate);
    }
    report.adam_epochs = e + 1;
  }
  net = net.with_parameters(theta);
  net = levenberg_marquardt(std::move(net), nd, o.lm_iterations, report.lm_iterations);
  report.network = fold(net, in, out);
  report.train_mse = mean_squared_error(report.network, train);
  report.holdout_mse = holdout.size() ? mean_squared_error(report.network, holdout) : report.train_mse;
  report.converged = report.holdout_mse <= o.target_mse;
  log_record(LogLevel::Info, {{"event", "fit_dynamics"},
                              {"train_mse", report.train_mse},
                              {"holdout_mse", report.holdout_mse},
                              {"adam_epochs", report.adam_epochs},
                              {"lm_iterations", report.lm_iterations}});
  return report;
}

FitReport fit_dynamics_network(const StepFunction& step, const SamplingRegion& region, const FitOptions& o) {
  if (o.sample_count == 0) throw ContractViolation("cannot fit dynamics without samples");
  Dataset train = sample_dataset(step, region, o.sample_count, o.near_fraction, o.near_radius, o.seed);
  Dataset holdout;
  if (o.holdout_count > 0) {
    holdout = sample_dataset(step, region, o.holdout_count, o.near_fraction, o.near_radius, o.seed + 1);
  }
  return fit_dynamics_network(train, holdout, static_cast<int>(region.x_lower.size()), o);
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& d, int state_dim) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.precision(17);
  if (d.size() == 0) throw ContractViolation("empty dataset");
  const Eigen::Index in_dim = d.inputs.front().size();
  for (int i = 0; i < state_dim; ++i) out << 'x' << i << ',';
  for (Eigen::Index i = state_dim; i < in_dim; ++i) out << 'u' << (i - state_dim) << ',';
  for (int i = 0; i < state_dim; ++i) out << 'y' << i << (i + 1 < state_dim ? "," : "\n");
  for (std::size_t s = 0; s < d.size(); ++s) {
    for (Eigen::Index i = 0; i < in_dim; ++i) out << d.inputs[s][i] << ',';
    for (int i = 0; i < state_dim; ++i) out << d.targets[s][i] << (i + 1 < state_dim ? "," : "\n");
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path, int state_dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const std::size_t cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols <= static_cast<std::size_t>(2 * state_dim)) throw ConfigError("dataset has too few columns");
  const Eigen::Index in_dim = static_cast<Eigen::Index>(cols) - state_dim;
  Dataset d;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> v;
    for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
    if (v.size() != cols) throw ConfigError("ragged dataset row");
    d.inputs.push_back(Eigen::Map<Eigen::VectorXd>(v.data(), in_dim));
    d.targets.push_back(Eigen::Map<Eigen::VectorXd>(v.data() + in_dim, state_dim));
  }
  return d;
}

}  // namespace lyapnet::plants
