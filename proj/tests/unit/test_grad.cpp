#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "rfgsnn/grad/estimators.hpp"
#include "rfgsnn/grad/optimizer.hpp"
#include "rfgsnn/opnet/separable_objective.hpp"

using namespace rfgsnn;
using namespace rfgsnn::grad;

namespace {

struct Toy {
  opnet::SeparableData data;
  opnet::SeparableObjective objective;
};

opnet::SeparableData regression_data(std::size_t n, std::size_t in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  opnet::SeparableData d;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(in);
    for (auto& v : x) v = normal(rng);
    d.inputs.push_back(x);
    d.targets.push_back(std::sin(x[0]) + 0.1 * normal(rng));
  }
  return d;
}

snn::SpikingMLP make_net(std::vector<std::size_t> widths, std::uint64_t seed,
                         snn::SurrogateKind kind = snn::SurrogateKind::SG, double scale = 3.0,
                         snn::SpikeMode mode = snn::SpikeMode::Heaviside, bool detach = true) {
  std::mt19937_64 rng(seed);
  snn::NeuronConfig nc;
  nc.time_steps = 8;
  nc.spike_mode = mode;
  nc.detach_reset = detach;
  snn::SurrogateConfig sc;
  sc.kind = kind;
  auto net = snn::SpikingMLP::create(widths, nc, sc, rng);
  auto p = net.flatten();
  for (auto& v : p) v *= scale;
  net.assign(p);
  return net;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

const std::vector<std::size_t> kBatch{0, 1, 3, 4, 6};

}  // namespace

TEST_CASE("rademacher perturbation") {
  ParamLayout layout{{{0, 60000, "a"}, {60000, 40000, "b"}}};
  std::mt19937_64 a(1), b(1);
  const auto v = sample_perturbation(layout, PerturbationMode::Global, a);
  const auto w = sample_perturbation(layout, PerturbationMode::Layerwise, b);
  CHECK(v.values == w.values);
  CHECK(w.layer_slices.size() == 2);
  double mean = 0.0;
  for (double x : v.values) {
    CHECK((x == 1.0 || x == -1.0));
    mean += x;
  }
  CHECK(std::abs(mean / v.values.size()) < 0.02);
}

TEST_CASE("jvp is linear in the tangent and matches bptt") {
  const auto data = regression_data(8, 3, 1);
  for (auto kind : {snn::SurrogateKind::SG, snn::SurrogateKind::WSG}) {
    opnet::SeparableObjective obj(opnet::to_separable(make_net({3, 6, 5, 1}, 2, kind)), data);
    const std::size_t n = obj.layout().total();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    std::vector<double> v(n);
    for (auto& x : v) x = normal(rng);
    std::vector<double> v2(v), zero(n, 0.0);
    for (auto& x : v2) x *= 2.0;
    const std::span<const double> views[] = {v, v2, zero};
    double jvps[3];
    OpTally ops;
    obj.loss_and_jvp(kBatch, 9, views, jvps, ops);
    CHECK(jvps[2] == 0.0);
    CHECK(std::abs(jvps[1] - 2.0 * jvps[0]) <= 1e-12 * std::abs(jvps[1]));

    const auto g = bptt_grad(obj, kBatch, 9);
    const double ref = dot(g.values, v);
    CHECK(std::abs(jvps[0] - ref) <= 1e-6 * (1.0 + std::abs(ref)));
  }
}

TEST_CASE("bptt matches finite differences on the relaxed network") {
  const auto data = regression_data(8, 2, 4);
  opnet::SeparableObjective obj(
      opnet::to_separable(make_net({2, 5, 4, 1}, 5, snn::SurrogateKind::SG, 2.0,
                                   snn::SpikeMode::Relaxed, false)),
      data);
  const auto g = bptt_grad(obj, kBatch, 1);
  auto p = obj.parameters();
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto q = p;
    OpTally ops;
    q[i] = p[i] + h;
    obj.set_parameters(q);
    const double up = obj.loss(kBatch, ops);
    q[i] = p[i] - h;
    obj.set_parameters(q);
    const double down = obj.loss(kBatch, ops);
    const double fd = (up - down) / (2 * h);
    CHECK(std::abs(fd - g.values[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("readout gradient is the residual-weighted mean of the last rates") {
  const auto data = regression_data(8, 3, 6);
  const auto net = make_net({3, 6, 4, 1}, 7);
  opnet::SeparableObjective obj(opnet::to_separable(net), data);
  const auto g = bptt_grad(obj, kBatch, 0);

  std::vector<double> expect(4, 0.0);
  double expect_bias = 0.0;
  for (std::size_t rec : kBatch) {
    const auto r = snn::mlp_forward(net, data.inputs[rec], true);
    const auto rates = snn::rate_decode(r.trace->spikes.back());
    const double res = r.output[0] - data.targets[rec];
    for (std::size_t j = 0; j < 4; ++j) expect[j] += 2.0 * res * rates[j] / kBatch.size();
    expect_bias += 2.0 * res / kBatch.size();
  }
  const auto& ranges = net.layer_ranges();
  const std::size_t off = ranges.back().offset;
  for (std::size_t j = 0; j < 4; ++j) CHECK(g.values[off + j] == doctest::Approx(expect[j]));
  CHECK(g.values[off + 4] == doctest::Approx(expect_bias));
}

TEST_CASE("zero residual gives zero estimates") {
  auto data = regression_data(8, 3, 8);
  const auto net = make_net({3, 6, 1}, 9);
  {
    opnet::SeparableObjective probe(opnet::to_separable(net), data);
    std::vector<std::size_t> all(data.records());
    std::iota(all.begin(), all.end(), 0);
    data.targets = probe.predict(all);
  }
  opnet::SeparableObjective obj(opnet::to_separable(net), data);
  std::mt19937_64 rng(1);
  for (const auto& g : {bptt_grad(obj, kBatch, 0), rfg_global(obj, kBatch, rng, 0),
                        rfg_layerwise(obj, kBatch, rng, 0)}) {
    CHECK(g.loss == 0.0);
    for (double x : g.values) CHECK(x == 0.0);
  }
}

TEST_CASE("rfg estimates are collinear with their directions") {
  const auto data = regression_data(8, 3, 10);
  opnet::SeparableObjective obj(opnet::to_separable(make_net({3, 6, 5, 1}, 11)), data);
  std::mt19937_64 rng(2), replay(2);
  const auto g = rfg_global(obj, kBatch, rng, 4);
  const auto v = sample_perturbation(obj.layout(), PerturbationMode::Global, replay);
  const double s = g.values[0] / v.values[0];
  for (std::size_t i = 0; i < v.values.size(); ++i) CHECK(g.values[i] == s * v.values[i]);

  const auto gl = rfg_layerwise(obj, kBatch, rng, 4);
  const auto vl = sample_perturbation(obj.layout(), PerturbationMode::Layerwise, replay);
  for (const auto& slice : vl.layer_slices) {
    const double sl = gl.values[slice.offset] / vl.values[slice.offset];
    for (std::size_t i = slice.offset; i < slice.offset + slice.size; ++i)
      CHECK(gl.values[i] == sl * vl.values[i]);
  }
}

TEST_CASE("layer-wise equals global when there is one block") {
  const auto data = regression_data(8, 3, 12);
  opnet::SeparableObjective obj(opnet::to_separable(make_net({3, 6, 1}, 13)), data);
  std::mt19937_64 rng(5);
  auto v = sample_perturbation(obj.layout(), PerturbationMode::Global, rng);
  const auto g = rfg_global_with(obj, kBatch, v, 3);
  v.layer_slices = {{0, v.values.size(), "all"}};
  const auto l = rfg_layerwise_with(obj, kBatch, v, 3);
  CHECK(g.values == l.values);
}

TEST_CASE("estimates are deterministic") {
  const auto data = regression_data(8, 3, 14);
  opnet::SeparableObjective obj(
      opnet::to_separable(make_net({3, 6, 5, 1}, 15, snn::SurrogateKind::WSG)), data);
  std::mt19937_64 a(6), b(6);
  CHECK(rfg_layerwise(obj, kBatch, a, 8).values == rfg_layerwise(obj, kBatch, b, 8).values);
  CHECK(bptt_grad(obj, kBatch, 8).values == bptt_grad(obj, kBatch, 8).values);
  CHECK_THROWS_AS(bptt_grad(obj, {}, 0), ConfigError);
}

TEST_CASE("optimizer rules") {
  OptimizerSpec sgd{OptimizerKind::SGD, 0.1};
  Optimizer opt(sgd);
  std::vector<double> theta{1.0};
  const double g[] = {2.0};
  opt.step(theta, g);
  CHECK(theta[0] == doctest::Approx(0.8));

  Optimizer adam(OptimizerSpec{});
  std::vector<double> fixed{0.5, -0.5};
  const double zero[] = {0.0, 0.0};
  adam.step(fixed, zero);
  CHECK(fixed == std::vector<double>{0.5, -0.5});

  const double bad[] = {std::nan(""), 0.0};
  CHECK_THROWS_AS(adam.step(fixed, bad), NumericalError);
  CHECK_THROWS_AS(Optimizer(OptimizerSpec{OptimizerKind::SGD, -1.0}), ConfigError);

  // Two SGD steps with gradients held fixed equal one step with their sum.
  Optimizer s1(sgd), s2(sgd);
  std::vector<double> a{1.0}, b{1.0};
  const double g1[] = {0.3}, g2[] = {-0.7}, gsum[] = {-0.4};
  s1.step(a, g1);
  s1.step(a, g2);
  s2.step(b, gsum);
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-15));
}

TEST_CASE("op counts") {
  auto net = make_net({2, 16, 16, 1}, 16);
  net.neuron.time_steps = 32;
  const auto fwd = count_ops(net, PassKind::Forward);
  const auto bwd = count_ops(net, PassKind::Backward);
  const auto tan = count_ops(net, PassKind::ForwardWithTangents, 1);
  const double ratio = double(bwd.backward) / double(fwd.forward);
  CHECK(ratio >= 1.5);
  CHECK(ratio <= 2.5);
  // Primal plus one tangent. The tangent of W s needs both dW s and W ds, so
  // the pass lands between 2x and 3x the primal rather than at 2x.
  const double tratio = double(tan.total()) / double(fwd.forward);
  CHECK(tratio >= 2.0);
  CHECK(tratio <= 3.0);
}
