#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "recipeforge/common.hpp"
#include "recipeforge/netcore.hpp"

using namespace recipeforge;

TEST_CASE("init is deterministic and validates sizes") {
  const auto a = Network::init({4, 8, 2}, 7);
  const auto b = Network::init({4, 8, 2}, 7);
  CHECK(std::vector<double>(a.parameters().begin(), a.parameters().end()) ==
        std::vector<double>(b.parameters().begin(), b.parameters().end()));
  CHECK_THROWS_AS(Network::init({4}, 1), std::invalid_argument);
  CHECK_THROWS_AS(Network::init({4, 0, 2}, 1), std::invalid_argument);
  CHECK(Network::init({1, 1}, 3).parameter_count() == 2);
}

TEST_CASE("forward: zero net, identity passthrough, hand-set 2-2-1 net") {
  const Network zero({3, 5, 2}, std::vector<double>(3 * 5 + 5 + 5 * 2 + 2, 0.0));
  const std::vector<double> x{0.3, -1.0, 2.0};
  CHECK(zero.forward(x) == std::vector<double>{0.0, 0.0});

  const Network identity({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0});
  CHECK(identity.forward(x) == x);

  // W1 = [[0.5, -1], [2, 0.25]], b1 = [0.1, -0.2], W2 = [[1.5, -0.5]], b2 = [0.3].
  const Network net({2, 2, 1}, {0.5, -1, 2, 0.25, 0.1, -0.2, 1.5, -0.5, 0.3});
  const double expected = 1.5 * std::tanh(0.5 * 1 - 1 * 2 + 0.1) - 0.5 * std::tanh(2 * 1 + 0.25 * 2 - 0.2) + 0.3;
  CHECK(net.forward(std::vector<double>{1, 2})[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK_THROWS_AS(net.forward(std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("gradient: zero loss gradient and least-squares closed form") {
  const auto net = Network::init({3, 4, 2}, 5);
  const std::vector<double> x{0.1, 0.2, 0.3};
  for (double g : net.gradient(x, std::vector<double>{0.0, 0.0})) CHECK(g == 0.0);

  // Linear y = w.x + b with loss (y - t)^2 / 2: dL/dw = (y - t) x, dL/db = y - t.
  const Network lin({3, 1}, {0.4, -0.7, 1.1, 0.25});
  const double t = 0.9;
  const double y = lin.forward(x)[0];
  const auto grad = lin.gradient(x, std::vector<double>{y - t});
  for (std::size_t i = 0; i < 3; ++i) CHECK(grad[i] == doctest::Approx((y - t) * x[i]).epsilon(1e-14));
  CHECK(grad[3] == doctest::Approx(y - t).epsilon(1e-14));
  CHECK_THROWS_AS(lin.gradient(x, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("gradcheck agrees with finite differences") {
  CHECK(gradcheck(Network::init({8, 16, 16, 8}, 1), 2) < 1e-4);
  CHECK(gradcheck(Network::init({5, 7, 3}, 9), 4, 200) < 1e-5);
  const Network zero({2, 3, 1}, std::vector<double>(13, 0.0));
  CHECK(gradcheck(zero, 1) == 0.0);
}

TEST_CASE("gradcheck catches a corrupted gradient path") {
  const auto net = Network::init({4, 6, 3}, 3);
  GradientFn broken = [](const Network& n, std::span<const double> x, std::span<const double> g) {
    auto grad = n.gradient(x, g);
    for (std::size_t i = 0; i < grad.size(); i += 2) grad[i] *= 1.5;
    return grad;
  };
  CHECK(gradcheck(net, 1, 100, broken) > 1e-2);
}

TEST_CASE("adam: zero gradient leaves parameters, constant gradient descends") {
  auto net = Network::init({2, 3, 1}, 4);
  const std::vector<double> before(net.parameters().begin(), net.parameters().end());
  auto state = OptimizerState::for_network(net);
  optimizer_step(net, std::vector<double>(net.parameter_count(), 0.0), state);
  CHECK(std::vector<double>(net.parameters().begin(), net.parameters().end()) == before);
  CHECK(state.step == 1);

  std::vector<double> g(net.parameter_count());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = i % 2 ? 0.5 : -2.0;
  for (int s = 0; s < 50; ++s) optimizer_step(net, g, state);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] > 0) CHECK(net.parameters()[i] < before[i]);
    else CHECK(net.parameters()[i] > before[i]);
  }
}

TEST_CASE("adam rejects non-finite gradients without touching parameters") {
  auto net = Network::init({2, 2}, 4);
  const std::vector<double> before(net.parameters().begin(), net.parameters().end());
  auto state = OptimizerState::for_network(net);
  std::vector<double> g(net.parameter_count(), 1.0);
  g[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(optimizer_step(net, g, state), NumericError);
  CHECK(std::vector<double>(net.parameters().begin(), net.parameters().end()) == before);
}

TEST_CASE("adam on f(x) = x^2 strictly decreases over 100 steps") {
  Network net({1, 1}, {3.0, -2.0});
  auto state = OptimizerState::for_network(net, {0.01, 0.9, 0.999, 1e-8});
  auto loss = [&] { return net.parameters()[0] * net.parameters()[0] + net.parameters()[1] * net.parameters()[1]; };
  double prev = loss();
  for (int s = 0; s < 100; ++s) {
    const std::vector<double> g{2 * net.parameters()[0], 2 * net.parameters()[1]};
    optimizer_step(net, g, state);
    const double now = loss();
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("one hidden layer fits sin(x) on 50 points") {
  auto net = Network::init({1, 16, 1}, 12);
  auto state = OptimizerState::for_network(net, {0.01, 0.9, 0.999, 1e-8});
  std::vector<double> xs, ys;
  for (int i = 0; i < 50; ++i) {
    xs.push_back(-3.0 + 6.0 * i / 49.0);
    ys.push_back(std::sin(xs.back()));
  }
  auto ws = net.make_workspace();
  std::vector<double> grad(net.parameter_count());
  double mse = 0.0;
  for (int step = 0; step < 5000; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    mse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::vector<double> in{xs[i]};
      net.forward(in, ws);
      const double err = ws.output()[0] - ys[i];
      mse += err * err / 50.0;
      net.backward(std::vector<double>{2.0 * err / 50.0}, grad, ws);
    }
    optimizer_step(net, grad, state);
  }
  CHECK(mse < 1e-2);
}

TEST_CASE("decayed learning rate is linear between the endpoints") {
  CHECK(decayed_rate(0.1, 0.02, 0, 100) == doctest::Approx(0.1));
  CHECK(decayed_rate(0.1, 0.02, 50, 100) < 0.1);
  CHECK(decayed_rate(0.1, 0.02, 99, 100) == doctest::Approx(0.002).epsilon(0.02));
  CHECK(decayed_rate(0.1, 1.0, 70, 100) == doctest::Approx(0.1));
}

TEST_CASE("time features and serialization") {
  const auto f = time_features(0.25);
  CHECK(f[0] == 0.25);
  CHECK(f[1] == doctest::Approx(1.0));
  CHECK(f[2] == doctest::Approx(0.0));

  const auto net = Network::init({3, 4, 2}, 8);
  const auto again = network_from_json(network_to_json(net));
  CHECK(again.layer_sizes() == net.layer_sizes());
  const std::vector<double> x{0.3, 0.1, -0.4};
  CHECK(again.forward(x) == net.forward(x));

  auto state = OptimizerState::for_network(net);
  state.step = 12;
  const auto restored = optimizer_from_json(optimizer_to_json(state));
  CHECK(restored.step == 12);
  CHECK(restored.first_moment.size() == net.parameter_count());
}
