#include "recipeforge/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "recipeforge/common.hpp"

namespace recipeforge {

Network::Network(std::vector<std::size_t> layer_sizes, std::vector<double> parameters)
    : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("network needs at least two layer sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw std::invalid_argument("layer sizes must be >= 1");
    offsets_.push_back(total);
    total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  if (parameters.empty()) parameters.assign(total, 0.0);
  if (parameters.size() != total)
    throw std::invalid_argument("expected " + std::to_string(total) + " parameters, got " +
                                std::to_string(parameters.size()));
  params_ = std::move(parameters);
}

Network Network::init(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
  Network net(std::move(layer_sizes), {});
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
    const std::size_t in = net.sizes_[l], out = net.sizes_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    double* w = net.params_.data() + net.offsets_[l];
    for (std::size_t i = 0; i < in * out; ++i) w[i] = dist(rng);
  }
  return net;
}

Workspace Network::make_workspace() const {
  Workspace ws;
  ws.activations.resize(sizes_.size());
  for (std::size_t l = 0; l < sizes_.size(); ++l) ws.activations[l].assign(sizes_[l], 0.0);
  const std::size_t widest = *std::max_element(sizes_.begin(), sizes_.end());
  ws.delta.assign(widest, 0.0);
  ws.delta_prev.assign(widest, 0.0);
  return ws;
}

void Network::check_input(std::span<const double> input) const {
  if (input.size() != input_size())
    throw std::invalid_argument("network input has length " + std::to_string(input.size()) +
                                ", expected " + std::to_string(input_size()));
}

void Network::forward(std::span<const double> input, Workspace& ws) const {
  check_input(input);
  bool shaped = ws.activations.size() == sizes_.size();
  for (std::size_t l = 0; shaped && l < sizes_.size(); ++l) shaped = ws.activations[l].size() == sizes_[l];
  if (!shaped) ws = make_workspace();
  std::copy(input.begin(), input.end(), ws.activations[0].begin());
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + in * out;
    const double* x = ws.activations[l].data();
    double* y = ws.activations[l + 1].data();
    const bool hidden = l + 1 < layers;
    for (std::size_t r = 0; r < out; ++r) {
      const double* row = w + r * in;
      // Four independent partial sums let the compiler pipeline the dot product.
      double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
      std::size_t c = 0;
      for (; c + 4 <= in; c += 4) {
        a0 += row[c] * x[c];
        a1 += row[c + 1] * x[c + 1];
        a2 += row[c + 2] * x[c + 2];
        a3 += row[c + 3] * x[c + 3];
      }
      for (; c < in; ++c) a0 += row[c] * x[c];
      const double acc = b[r] + ((a0 + a1) + (a2 + a3));
      y[r] = hidden ? std::tanh(acc) : acc;
    }
  }
}

std::vector<double> Network::forward(std::span<const double> input) const {
  Workspace ws = make_workspace();
  forward(input, ws);
  return {ws.output().begin(), ws.output().end()};
}

void Network::backward(std::span<const double> output_grad, std::span<double> grad,
                       Workspace& ws) const {
  if (output_grad.size() != output_size())
    throw std::invalid_argument("output gradient has length " + std::to_string(output_grad.size()) +
                                ", expected " + std::to_string(output_size()));
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer has wrong length");
  std::copy(output_grad.begin(), output_grad.end(), ws.delta.begin());
  for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    double* gw = grad.data() + offsets_[l];
    double* gb = gw + in * out;
    const double* x = ws.activations[l].data();
    const double* d = ws.delta.data();
    for (std::size_t r = 0; r < out; ++r) {
      const double dr = d[r];
      gb[r] += dr;
      if (dr == 0.0) continue;
      double* grow = gw + r * in;
      for (std::size_t c = 0; c < in; ++c) grow[c] += dr * x[c];
    }
    if (l == 0) break;
    double* dp = ws.delta_prev.data();
    std::fill(dp, dp + in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      const double dr = d[r];
      if (dr == 0.0) continue;
      const double* row = w + r * in;
      for (std::size_t c = 0; c < in; ++c) dp[c] += row[c] * dr;
    }
    for (std::size_t c = 0; c < in; ++c) dp[c] *= 1.0 - x[c] * x[c];  // tanh'
    std::swap(ws.delta, ws.delta_prev);
  }
}

void Network::accumulate_gradient(std::span<const double> input, std::span<const double> output_grad,
                                  std::span<double> grad, Workspace& ws) const {
  forward(input, ws);
  backward(output_grad, grad, ws);
}

std::vector<double> Network::gradient(std::span<const double> input,
                                      std::span<const double> output_grad) const {
  std::vector<double> grad(params_.size(), 0.0);
  Workspace ws = make_workspace();
  accumulate_gradient(input, output_grad, grad, ws);
  return grad;
}

OptimizerState OptimizerState::for_network(const Network& net, AdamConfig config) {
  OptimizerState state;
  state.config = config;
  state.first_moment.assign(net.parameter_count(), 0.0);
  state.second_moment.assign(net.parameter_count(), 0.0);
  return state;
}

double decayed_rate(double initial, double final_fraction, std::size_t iteration, std::size_t total) {
  if (total <= 1) return initial;
  const double progress = static_cast<double>(iteration) / static_cast<double>(total - 1);
  return initial * (1.0 - (1.0 - final_fraction) * progress);
}

void optimizer_step(Network& net, std::span<const double> grads, OptimizerState& state) {
  auto params = net.parameters();
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw std::invalid_argument("optimizer shapes do not match network");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw NumericError("non-finite gradient at parameter " + std::to_string(i));

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i] * grads[i];
    params[i] -= c.learning_rate * (m / correction1) / (std::sqrt(v / correction2) + c.epsilon);
  }
}

double gradcheck(const Network& net, std::uint64_t seed, std::size_t parameter_samples,
                 const GradientFn& analytic) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(net.input_size()), g(net.output_size());
  for (auto& v : x) v = normal(rng);
  for (auto& v : g) v = normal(rng);

  const auto grad = analytic ? analytic(net, x, g) : net.gradient(x, g);
  if (grad.size() != net.parameter_count()) throw std::invalid_argument("gradient has wrong length");

  auto loss = [&](const Network& n) {
    const auto y = n.forward(x);
    return std::inner_product(y.begin(), y.end(), g.begin(), 0.0);
  };

  std::vector<std::size_t> indices(net.parameter_count());
  std::iota(indices.begin(), indices.end(), 0);
  std::shuffle(indices.begin(), indices.end(), rng);
  indices.resize(std::min(parameter_samples, indices.size()));

  constexpr double h = 1e-5;
  constexpr double guard = 1e-8;
  Network probe = net;
  double worst = 0.0;
  for (std::size_t index : indices) {
    double& p = probe.parameters()[index];
    const double original = p;
    p = original + h;
    const double up = loss(probe);
    p = original - h;
    const double down = loss(probe);
    p = original;
    const double numeric = (up - down) / (2.0 * h);
    const double error = std::abs(grad[index] - numeric) / (std::abs(grad[index]) + std::abs(numeric) + guard);
    worst = std::max(worst, error);
  }
  return worst;
}

std::array<double, 3> time_features(double fraction) {
  const double angle = 2.0 * std::numbers::pi * fraction;
  return {fraction, std::sin(angle), std::cos(angle)};
}

nlohmann::json network_to_json(const Network& net) {
  return {{"layer_sizes", net.layer_sizes()},
          {"activation", "tanh"},
          {"parameters", std::vector<double>(net.parameters().begin(), net.parameters().end())}};
}

Network network_from_json(const nlohmann::json& j) {
  try {
    return Network(j.at("layer_sizes").get<std::vector<std::size_t>>(),
                   j.at("parameters").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("network checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("network checkpoint: ") + e.what());
  }
}

nlohmann::json optimizer_to_json(const OptimizerState& state) {
  return {{"learning_rate", state.config.learning_rate},
          {"beta1", state.config.beta1},
          {"beta2", state.config.beta2},
          {"epsilon", state.config.epsilon},
          {"step", state.step},
          {"first_moment", state.first_moment},
          {"second_moment", state.second_moment}};
}

OptimizerState optimizer_from_json(const nlohmann::json& j) {
  try {
    OptimizerState state;
    state.config = {j.at("learning_rate").get<double>(), j.at("beta1").get<double>(),
                    j.at("beta2").get<double>(), j.at("epsilon").get<double>()};
    state.step = j.at("step").get<std::uint64_t>();
    state.first_moment = j.at("first_moment").get<std::vector<double>>();
    state.second_moment = j.at("second_moment").get<std::vector<double>>();
    if (state.first_moment.size() != state.second_moment.size())
      throw DataError("optimizer moment lengths differ");
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("optimizer checkpoint: ") + e.what());
  }
}

}  // namespace recipeforge
