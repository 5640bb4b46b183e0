#include "lyapnet/network.hpp"

#include <cmath>
#include <string>

#include "lyapnet/errors.hpp"

namespace lyapnet {

FeedforwardNetwork::FeedforwardNetwork(std::vector<DenseLayer> layers, double leak_slope)
    : layers_(std::move(layers)), leak_slope_(leak_slope) {
  if (layers_.empty()) throw ContractViolation("network needs at least one layer");
  if (!(leak_slope_ >= 0.0 && leak_slope_ < 1.0)) {
    throw ContractViolation("leak slope must lie in [0, 1), got " + std::to_string(leak_slope_));
  }
  int offset = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& l = layers_[i];
    if (l.weight.rows() == 0 || l.weight.cols() == 0) {
      throw ContractViolation("layer " + std::to_string(i) + " has an empty weight matrix");
    }
    if (l.bias.size() != l.weight.rows()) {
      throw ContractViolation("layer " + std::to_string(i) + " bias length does not match rows");
    }
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows()) {
      throw ContractViolation("layer " + std::to_string(i) +
                              " input width does not match previous layer output width");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw ContractViolation("layer " + std::to_string(i) + " has non-finite parameters");
    }
    layer_offsets_.push_back(offset);
    offset += static_cast<int>(l.weight.size() + l.bias.size());
  }
  layer_offsets_.push_back(offset);
}

FeedforwardNetwork FeedforwardNetwork::zeros(int input_dim, const std::vector<int>& hidden,
                                             int output_dim, double leak_slope) {
  std::vector<DenseLayer> layers;
  int prev = input_dim;
  for (int width : hidden) {
    layers.push_back({Eigen::MatrixXd::Zero(width, prev), Eigen::VectorXd::Zero(width)});
    prev = width;
  }
  layers.push_back({Eigen::MatrixXd::Zero(output_dim, prev), Eigen::VectorXd::Zero(output_dim)});
  return FeedforwardNetwork(std::move(layers), leak_slope);
}

FeedforwardNetwork FeedforwardNetwork::random(int input_dim, const std::vector<int>& hidden,
                                              int output_dim, double leak_slope,
                                              std::mt19937_64& rng, double scale) {
  FeedforwardNetwork net = zeros(input_dim, hidden, output_dim, leak_slope);
  for (DenseLayer& l : net.layers_) {
    double limit = scale / std::sqrt(static_cast<double>(l.weight.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = u(rng);
  }
  return net;
}

int FeedforwardNetwork::hidden_neuron_count() const {
  int n = 0;
  for (int w : hidden_widths()) n += w;
  return n;
}

std::vector<int> FeedforwardNetwork::hidden_widths() const {
  std::vector<int> widths;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    widths.push_back(static_cast<int>(layers_[i].weight.rows()));
  }
  return widths;
}

void FeedforwardNetwork::check_input(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) {
    throw ContractViolation("network input has dimension " + std::to_string(x.size()) +
                            ", expected " + std::to_string(input_dim()));
  }
}

Eigen::VectorXd FeedforwardNetwork::evaluate(const Eigen::VectorXd& x) const {
  check_input(x);
  Eigen::VectorXd z = x;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    z = layers_[i].weight * z + layers_[i].bias;
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = leaky_relu(z[k], leak_slope_);
  }
  return layers_.back().weight * z + layers_.back().bias;
}

ForwardResult FeedforwardNetwork::forward(const Eigen::VectorXd& x) const {
  check_input(x);
  ForwardResult r;
  r.activations.push_back(x);
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    Eigen::VectorXd y = layers_[i].weight * r.activations.back() + layers_[i].bias;
    Eigen::VectorXd z(y.size());
    for (Eigen::Index k = 0; k < y.size(); ++k) z[k] = leaky_relu(y[k], leak_slope_);
    r.preactivations.push_back(std::move(y));
    r.activations.push_back(std::move(z));
  }
  r.output = layers_.back().weight * r.activations.back() + layers_.back().bias;
  return r;
}

BackwardResult FeedforwardNetwork::backward(const ForwardResult& fwd,
                                            const Eigen::VectorXd& cotangent) const {
  if (cotangent.size() != output_dim()) {
    throw ContractViolation("cotangent has dimension " + std::to_string(cotangent.size()) +
                            ", expected " + std::to_string(output_dim()));
  }
  BackwardResult g;
  g.params = Eigen::VectorXd::Zero(parameter_count());
  Eigen::VectorXd delta = cotangent;  // d(out)/d(preactivation of the current layer)
  for (int i = layer_count() - 1; i >= 0; --i) {
    const DenseLayer& l = layers_[static_cast<std::size_t>(i)];
    const Eigen::VectorXd& input = fwd.activations[static_cast<std::size_t>(i)];
    int off = layer_offsets_[static_cast<std::size_t>(i)];
    // Row-major weight gradient is the outer product delta * input^T.
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        g.params[off + r * l.weight.cols() + c] = delta[r] * input[c];
      }
    }
    g.params.segment(off + l.weight.size(), l.bias.size()) = delta;
    Eigen::VectorXd back = l.weight.transpose() * delta;
    if (i > 0) {
      const Eigen::VectorXd& y = fwd.preactivations[static_cast<std::size_t>(i - 1)];
      for (Eigen::Index k = 0; k < back.size(); ++k) back[k] *= leaky_relu_slope(y[k], leak_slope_);
    }
    delta = std::move(back);
  }
  g.input = std::move(delta);
  return g;
}

Eigen::VectorXd FeedforwardNetwork::grad_params(const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& cotangent) const {
  return backward(forward(x), cotangent).params;
}

Eigen::VectorXd FeedforwardNetwork::grad_input(const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& cotangent) const {
  return backward(forward(x), cotangent).input;
}

int FeedforwardNetwork::parameter_count() const { return layer_offsets_.back(); }

int FeedforwardNetwork::weight_index(int layer_index, int row, int col) const {
  const DenseLayer& l = layer(layer_index);
  return layer_offsets_[static_cast<std::size_t>(layer_index)] +
         row * static_cast<int>(l.weight.cols()) + col;
}

int FeedforwardNetwork::bias_index(int layer_index, int row) const {
  const DenseLayer& l = layer(layer_index);
  return layer_offsets_[static_cast<std::size_t>(layer_index)] + static_cast<int>(l.weight.size()) +
         row;
}

void FeedforwardNetwork::pack(std::span<double> out) const {
  if (static_cast<int>(out.size()) != parameter_count()) {
    throw ContractViolation("pack target has wrong length");
  }
  std::size_t k = 0;
  for (const DenseLayer& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out[k++] = l.weight(r, c);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out[k++] = l.bias[r];
  }
}

Eigen::VectorXd FeedforwardNetwork::pack() const {
  Eigen::VectorXd v(parameter_count());
  pack(std::span<double>(v.data(), static_cast<std::size_t>(v.size())));
  return v;
}

FeedforwardNetwork FeedforwardNetwork::with_parameters(std::span<const double> params) const {
  if (static_cast<int>(params.size()) != parameter_count()) {
    throw ContractViolation("parameter vector has length " + std::to_string(params.size()) +
                            ", expected " + std::to_string(parameter_count()));
  }
  std::vector<DenseLayer> layers = layers_;
  std::size_t k = 0;
  for (DenseLayer& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = params[k++];
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = params[k++];
  }
  return FeedforwardNetwork(std::move(layers), leak_slope_);
}

}  // namespace lyapnet
