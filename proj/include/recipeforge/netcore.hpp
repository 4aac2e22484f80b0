#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

namespace recipeforge {

/// Scratch buffers for forward/backward passes. One per thread; reusing a
/// workspace across calls avoids per-call allocation in the sampling loops.
struct Workspace {
  std::vector<std::vector<double>> activations;
  std::vector<double> delta;
  std::vector<double> delta_prev;

  std::span<const double> output() const { return activations.back(); }
};

/// Fully connected network: tanh hidden layers, linear output layer.
///
/// Parameters live in one flat array. For each layer l (input size n, output
/// size m) the block is an m x n row-major weight matrix followed by m biases.
class Network {
 public:
  Network() = default;
  /// Adopts existing parameters (checkpoint restore). Throws std::invalid_argument
  /// on shape mismatch.
  Network(std::vector<std::size_t> layer_sizes, std::vector<double> parameters);

  /// Glorot-uniform weights, zero biases. Deterministic for a fixed seed.
  static Network init(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  Workspace make_workspace() const;

  std::vector<double> forward(std::span<const double> input) const;
  /// Result is left in ws.output().
  void forward(std::span<const double> input, Workspace& ws) const;

  /// Gradient of dot(forward(input), output_grad) with respect to the parameters.
  std::vector<double> gradient(std::span<const double> input,
                               std::span<const double> output_grad) const;
  /// Adds the gradient into `grad`. Runs its own forward pass.
  void accumulate_gradient(std::span<const double> input, std::span<const double> output_grad,
                           std::span<double> grad, Workspace& ws) const;
  /// Backward pass only; ws must hold the activations of a forward pass on `input`.
  void backward(std::span<const double> output_grad, std::span<double> grad, Workspace& ws) const;

 private:
  void check_input(std::span<const double> input) const;

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;  // start of each layer's weight block
  std::vector<double> params_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_network(const Network& net, AdamConfig config = {});
};

/// Linear decay from `initial` to `initial * final_fraction` across `total` iterations.
double decayed_rate(double initial, double final_fraction, std::size_t iteration, std::size_t total);

/// One Adam update. Throws NumericError on a non-finite gradient component
/// (parameters are left untouched in that case).
void optimizer_step(Network& net, std::span<const double> grads, OptimizerState& state);

using GradientFn = std::function<std::vector<double>(const Network&, std::span<const double>,
                                                     std::span<const double>)>;

/// Max over a random parameter subset of |analytic - numeric| / (|analytic| + |numeric| + eps),
/// for the scalar loss dot(forward(x), g) at a random input x and random g.
/// `analytic` defaults to Network::gradient.
double gradcheck(const Network& net, std::uint64_t seed, std::size_t parameter_samples = 100,
                 const GradientFn& analytic = {});

/// (t, sin 2 pi t, cos 2 pi t) for a time fraction t in [0, 1].
std::array<double, 3> time_features(double fraction);

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);
nlohmann::json optimizer_to_json(const OptimizerState& state);
OptimizerState optimizer_from_json(const nlohmann::json& j);

}  // namespace recipeforge
