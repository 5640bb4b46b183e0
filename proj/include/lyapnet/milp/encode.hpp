#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "lyapnet/milp/model.hpp"
#include "lyapnet/milp/simplex.hpp"
#include "lyapnet/network.hpp"

namespace lyapnet::milp {

/// Preactivation bounds of every hidden neuron plus bounds of the (linear) output layer.
struct NetworkBounds {
  std::vector<Eigen::VectorXd> lower;  // one entry per hidden layer
  std::vector<Eigen::VectorXd> upper;
  Eigen::VectorXd output_lower;
  Eigen::VectorXd output_upper;
};

enum class BoundMethod { Interval, Lp };

/// Sound layer-by-layer interval propagation over the input box.
NetworkBounds interval_bounds(const FeedforwardNetwork& net, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper);

/// Bounds from the LP relaxation of the big-M encoding of all earlier layers, intersected with
/// interval propagation of the tightened earlier layers.
NetworkBounds lp_bounds(const FeedforwardNetwork& net, const Eigen::VectorXd& lower,
                        const Eigen::VectorXd& upper, const LpOptions& lp = {});

NetworkBounds compute_bounds(const FeedforwardNetwork& net, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, BoundMethod method);

/// Memoizes compute_bounds per network instance and input box.
class BoundCache {
 public:
  explicit BoundCache(BoundMethod method = BoundMethod::Interval) : method_(method) {}
  const NetworkBounds& get(const FeedforwardNetwork& net, const Eigen::VectorXd& lower,
                           const Eigen::VectorXd& upper);
  BoundMethod method() const { return method_; }

 private:
  BoundMethod method_;
  std::map<std::pair<const FeedforwardNetwork*, std::vector<double>>, NetworkBounds> cache_;
};

/// w = max(y, c y) for y in [lower, upper]. A neuron whose phase is fixed by the bounds is
/// returned as a linear expression without new variables.
LinearExpr encode_leaky_relu(MilpModel& model, const LinearExpr& y, double lower, double upper,
                             double leak_slope, const std::string& name = "relu");

/// Encodes net(inputs) and returns the output expressions. When theta_offset >= 0, every weight
/// and bias coefficient records its provenance theta[theta_offset + parameter index].
std::vector<LinearExpr> encode_relu_network(MilpModel& model, const FeedforwardNetwork& net,
                                            const std::vector<LinearExpr>& inputs,
                                            const NetworkBounds& bounds, int theta_offset = -1,
                                            const std::string& name = "net");

/// sum_i |t_i| for t_i in [lower_i, upper_i].
LinearExpr encode_l1(MilpModel& model, const std::vector<LinearExpr>& t,
                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                     const std::string& name = "l1");

/// clamp(x, lo, up) = up - ReLU(up - (ReLU(x - lo) + lo)) for x in [x_lower, x_upper].
LinearExpr encode_clamp(MilpModel& model, const LinearExpr& x, double lo, double up,
                        double x_lower, double x_upper, const std::string& name = "clamp");

/// Scalar clamp used by the evaluators.
inline double clamp_value(double x, double lo, double up) { return x < lo ? lo : (x > up ? up : x); }

}  // namespace lyapnet::milp
