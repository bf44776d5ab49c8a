#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "rfgsnn/snn/neuron.hpp"
#include "rfgsnn/snn/spiking_mlp.hpp"

using namespace rfgsnn;
using namespace rfgsnn::snn;

TEST_CASE("heaviside fires at zero") {
  CHECK(heaviside(-1.0) == 0.0);
  CHECK(heaviside(0.0) == 1.0);
  CHECK(heaviside(0.5) == 1.0);
}

TEST_CASE("sg surrogate is a gaussian density") {
  CHECK(surrogate_sg(0.0, 0.5) == doctest::Approx(0.797885).epsilon(1e-6));
  CHECK(surrogate_sg(0.0, 0.3) == doctest::Approx(1.329808).epsilon(1e-6));
  CHECK(surrogate_sg(1.0, 0.5) == surrogate_sg(-1.0, 0.5));

  // Trapezoid over +-12 sigma.
  for (double sigma : {0.3, 0.5, 1.0}) {
    const int n = 20000;
    const double a = -12 * sigma, h = 24 * sigma / n;
    double sum = 0.5 * (surrogate_sg(a, sigma) + surrogate_sg(-a, sigma));
    for (int i = 1; i < n; ++i) sum += surrogate_sg(a + i * h, sigma);
    CHECK(std::abs(sum * h - 1.0) < 1e-6);
    CHECK(surrogate_sg(0.0, sigma) > surrogate_sg(0.01, sigma));
    CHECK(surrogate_sg(3.0 * sigma, sigma) > 0.0);
  }
}

TEST_CASE("smooth spike is the primitive of the sg surrogate") {
  const double s = 0.4, h = 1e-5;
  for (double x : {-1.0, -0.2, 0.0, 0.3, 0.9}) {
    const double fd = (smooth_spike(x + h, s) - smooth_spike(x - h, s)) / (2 * h);
    CHECK(fd == doctest::Approx(surrogate_sg(x, s)).epsilon(1e-8));
  }
  CHECK(smooth_spike(0.0, s) == doctest::Approx(0.5));
}

TEST_CASE("wsg surrogate") {
  std::mt19937_64 rng(7);
  CHECK(surrogate_wsg(10.0, 0.5, 8, rng) == 0.0);

  const double forced[] = {0.2};
  CHECK(surrogate_wsg(-0.1, 0.5, forced) == doctest::Approx(0.8));

  std::mt19937_64 a(11), b(11);
  CHECK(surrogate_wsg(0.1, 0.5, 8, a) == surrogate_wsg(0.1, 0.5, 8, b));

  std::mt19937_64 mc(12);
  const double est = surrogate_wsg(0.0, 0.5, 1000000, mc);
  CHECK(std::abs(est - surrogate_sg(0.0, 0.5)) / surrogate_sg(0.0, 0.5) < 0.01);

  CHECK_THROWS_AS(surrogate_wsg(0.0, 0.0, 8, rng), ConfigError);
  CHECK_THROWS_AS(surrogate_wsg(0.0, 0.5, 0, rng), ConfigError);
}

TEST_CASE("if_step integrates, fires and resets by subtraction") {
  NeuronConfig cfg;
  const double z[] = {0.6};
  const double u0[] = {0.0};
  auto s1 = if_step(u0, z, cfg);
  CHECK(s1.membrane[0] == doctest::Approx(0.6));
  CHECK(s1.spikes[0] == 0.0);
  auto s2 = if_step(s1.membrane, z, cfg);
  CHECK(s2.membrane[0] == doctest::Approx(0.2));
  CHECK(s2.spikes[0] == 1.0);

  cfg.leak = 0.5;
  const double u1[] = {0.8};
  const double zero[] = {0.0};
  auto s3 = if_step(u1, zero, cfg);
  CHECK(s3.membrane[0] == doctest::Approx(0.4));
  CHECK(s3.spikes[0] == 0.0);

  const double two[] = {0.0, 0.0};
  CHECK_THROWS_AS(if_step(two, z, cfg), DimensionError);
}

TEST_CASE("neuron config validation") {
  NeuronConfig cfg;
  cfg.threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.leak = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.time_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

namespace {

SpikingMLP random_net(std::vector<std::size_t> widths, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  auto net = SpikingMLP::create(widths, NeuronConfig{}, SurrogateConfig{}, rng);
  auto p = net.flatten();
  for (auto& v : p) v *= scale;
  net.assign(p);
  return net;
}

}  // namespace

TEST_CASE("zero network outputs the readout bias") {
  auto net = random_net({3, 5, 4, 2}, 1);
  auto p = net.flatten();
  std::fill(p.begin(), p.end(), 0.0);
  net.assign(p);
  net.readout.biases = {0.25, -1.5};
  const double in[] = {1.0, -2.0, 0.5};
  auto r = mlp_forward(net, in, true);
  CHECK(r.output == std::vector<double>{0.25, -1.5});
  for (const auto& layer : r.trace->spikes)
    for (const auto& step : layer)
      for (double s : step) CHECK(s == 0.0);
}

TEST_CASE("strong drive fires every step") {
  auto net = random_net({1, 1, 1}, 2);
  net.spiking_layers[0].weights = {10.0};
  net.spiking_layers[0].biases = {0.0};
  net.readout.weights = {1.0};
  net.readout.biases = {0.0};
  const double in[] = {1.0};
  CHECK(mlp_forward(net, in, false).output[0] == doctest::Approx(1.0));
}

TEST_CASE("trace invariants: binarity and charge conservation") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    auto net = random_net({4, 6, 5, 2}, 100 + trial, 2.0);
    std::vector<double> in(4);
    for (auto& v : in) v = normal(rng);
    const auto r = mlp_forward(net, in, true);
    const auto& tr = *r.trace;
    for (std::size_t l = 0; l < net.depth(); ++l) {
      std::vector<double> zsum(net.spiking_layers[l].fan_out, 0.0), ssum(zsum.size(), 0.0);
      for (std::size_t t = 0; t < tr.spikes[l].size(); ++t) {
        for (std::size_t i = 0; i < zsum.size(); ++i) {
          const double s = tr.spikes[l][t][i];
          CHECK((s == 0.0 || s == 1.0));
          zsum[i] += tr.postsynaptic[l][t][i];
          ssum[i] += s;
          CHECK(std::abs(tr.membranes[l][t][i] + net.neuron.threshold * ssum[i] - zsum[i]) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("infinite threshold silences the network") {
  auto net = random_net({2, 4, 1}, 4, 3.0);
  net.neuron.threshold = 1e300;
  const double in[] = {5.0, -5.0};
  CHECK(mlp_forward(net, in, false).output[0] == net.readout.biases[0]);
}

TEST_CASE("rate saturates at drive over threshold") {
  for (double z : {0.1, 0.37, 0.5, 0.81, 1.0}) {
    auto net = random_net({1, 1, 1}, 5);
    net.spiking_layers[0].weights = {z};
    net.spiking_layers[0].biases = {0.0};
    net.readout.weights = {1.0};
    net.readout.biases = {0.0};
    const double in[] = {1.0};
    const double rate = mlp_forward(net, in, false).output[0];
    CHECK(std::abs(rate - z / net.neuron.threshold) <= 1.0 / net.neuron.time_steps);
  }
}

TEST_CASE("rate decoding") {
  std::vector<std::vector<double>> ones(32, std::vector<double>(3, 1.0));
  std::vector<std::vector<double>> zeros(32, std::vector<double>(3, 0.0));
  std::vector<std::vector<double>> half(32, std::vector<double>(1, 0.0));
  for (int t = 0; t < 32; t += 2) half[t][0] = 1.0;
  CHECK(rate_decode(ones) == std::vector<double>(3, 1.0));
  CHECK(rate_decode(zeros) == std::vector<double>(3, 0.0));
  CHECK(rate_decode(half)[0] == 0.5);
  CHECK_THROWS_AS(rate_decode({}), EmptyTraceError);
}

TEST_CASE("input size mismatch") {
  auto net = random_net({3, 4, 1}, 6);
  const double in[] = {1.0, 2.0};
  CHECK_THROWS_AS(mlp_forward(net, in, false), DimensionError);
}

TEST_CASE("init is uniform within the fan-in bound and seeded") {
  auto a = random_net({9, 16, 1}, 7);
  auto b = random_net({9, 16, 1}, 7);
  CHECK(a.flatten() == b.flatten());
  for (double w : a.spiking_layers[0].weights) CHECK(std::abs(w) <= std::sqrt(1.0 / 9.0));
  for (double w : a.readout.weights) CHECK(std::abs(w) <= 0.25);
}

TEST_CASE("flatten and assign round-trip") {
  auto net = random_net({3, 5, 4, 2}, 8);
  auto p = net.flatten();
  CHECK(p.size() == net.param_count());
  CHECK(net.param_count() == (3 * 5 + 5) + (5 * 4 + 4) + (4 * 2 + 2));
  for (auto& v : p) v += 1.0;
  net.assign(p);
  CHECK(net.flatten() == p);
  p.pop_back();
  CHECK_THROWS_AS(net.assign(p), DimensionError);
}
