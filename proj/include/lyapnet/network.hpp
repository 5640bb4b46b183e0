#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lyapnet {

/// One dense layer, y = weight * z + bias. `weight` has one row per output neuron.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Leaky ReLU, sigma(y) = max(y, c*y).
inline double leaky_relu(double y, double leak_slope) { return y >= 0.0 ? y : leak_slope * y; }

/// Slope of the leaky ReLU; the kink at y == 0 takes the slope-1 branch.
inline double leaky_relu_slope(double y, double leak_slope) { return y >= 0.0 ? 1.0 : leak_slope; }

/// Values produced by a forward pass. `preactivations[i]` holds W_i z_{i-1} + b_i for hidden
/// layer i, `activations[i]` the post-activation output; `activations` starts with the input.
struct ForwardResult {
  Eigen::VectorXd output;
  std::vector<Eigen::VectorXd> preactivations;
  std::vector<Eigen::VectorXd> activations;
};

/// Gradients of cotangent^T * output with respect to the parameters and the input.
struct BackwardResult {
  Eigen::VectorXd params;
  Eigen::VectorXd input;
};

/// Fully connected feed-forward network with leaky ReLU on every hidden layer and a linear
/// output layer. Immutable after construction, so concurrent evaluation is safe.
///
/// Parameter layout (used by pack/unpack and every gradient): layer by layer, each layer's
/// weight matrix in row-major order followed by its bias vector.
class FeedforwardNetwork {
 public:
  FeedforwardNetwork(std::vector<DenseLayer> layers, double leak_slope);

  /// Network with every weight and bias zero, layer widths input -> hidden... -> output.
  /// Weights uniform in +-scale/sqrt(fan_in), biases uniform in +-scale/sqrt(fan_in).
  static FeedforwardNetwork random(int input_dim, const std::vector<int>& hidden, int output_dim,
                                   double leak_slope, std::mt19937_64& rng, double scale = 1.0);
  static FeedforwardNetwork zeros(int input_dim, const std::vector<int>& hidden, int output_dim,
                                  double leak_slope);

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  int layer_count() const { return static_cast<int>(layers_.size()); }
  int hidden_neuron_count() const;
  std::vector<int> hidden_widths() const;
  double leak_slope() const { return leak_slope_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  const DenseLayer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
  ForwardResult forward(const Eigen::VectorXd& x) const;

  Eigen::VectorXd grad_params(const Eigen::VectorXd& x, const Eigen::VectorXd& cotangent) const;
  Eigen::VectorXd grad_input(const Eigen::VectorXd& x, const Eigen::VectorXd& cotangent) const;
  BackwardResult backward(const ForwardResult& fwd, const Eigen::VectorXd& cotangent) const;

  int parameter_count() const;
  /// Offset of weight(row, col) of `layer_index` in the flat parameter layout.
  int weight_index(int layer_index, int row, int col) const;
  int bias_index(int layer_index, int row) const;

  void pack(std::span<double> out) const;
  Eigen::VectorXd pack() const;
  /// Same architecture and leak slope, parameters read from `params`.
  FeedforwardNetwork with_parameters(const Eigen::VectorXd& params) const {
    return with_parameters(std::span<const double>(params.data(), static_cast<std::size_t>(params.size())));
  }
  FeedforwardNetwork with_parameters(std::span<const double> params) const;

 private:
  void check_input(const Eigen::VectorXd& x) const;

  std::vector<DenseLayer> layers_;
  double leak_slope_;
  std::vector<int> layer_offsets_;
};

}  // namespace lyapnet
