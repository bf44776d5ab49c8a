#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "doctest.h"
#include "rfgsnn/grad/estimators.hpp"
#include "rfgsnn/opnet/losses.hpp"
#include "rfgsnn/opnet/operator_models.hpp"
#include "rfgsnn/opnet/separable_objective.hpp"

using namespace rfgsnn;
using namespace rfgsnn::opnet;

namespace {

snn::SpikingMLP net(std::vector<std::size_t> widths, std::mt19937_64& rng, double scale = 2.0) {
  snn::NeuronConfig nc;
  nc.time_steps = 16;
  auto n = snn::SpikingMLP::create(widths, nc, snn::SurrogateConfig{}, rng);
  auto p = n.flatten();
  for (auto& v : p) v *= scale;
  n.assign(p);
  return n;
}

// Readout that ignores the spikes and emits fixed values through its bias.
void constant_readout(snn::SpikingMLP& n, std::vector<double> values) {
  std::fill(n.readout.weights.begin(), n.readout.weights.end(), 0.0);
  n.readout.biases = std::move(values);
}

std::vector<double> features(const snn::SpikingMLP& n, std::span<const double> x) {
  return snn::mlp_forward(n, x, false).output;
}

}  // namespace

TEST_CASE("deeponet with a constant unit trunk returns the branch output") {
  std::mt19937_64 rng(1);
  DeepONetModel m{net({4, 8, 1}, rng), net({1, 8, 1}, rng), 1};
  constant_readout(m.trunk, {1.0});
  const std::vector<double> u{0.3, -0.2, 0.9, 0.1}, y{0.4};
  CHECK(deeponet_forward(m, u, y) == features(m.branch, u)[0]);

  constant_readout(m.branch, {0.0});
  CHECK(deeponet_forward(m, u, y) == 0.0);
}

TEST_CASE("deeponet equals the explicit inner product") {
  std::mt19937_64 rng(2);
  DeepONetModel m{net({4, 8, 5}, rng), net({1, 8, 5}, rng), 5};
  const std::vector<double> u{0.5, -1.0, 0.25, 2.0}, y{0.3};
  const auto b = features(m.branch, u), t = features(m.trunk, y);
  double ref = 0.0;
  for (std::size_t i = 0; i < 5; ++i) ref += b[i] * t[i];
  CHECK(std::abs(deeponet_forward(m, u, y) - ref) <= 1e-12 * (1.0 + std::abs(ref)));
}

TEST_CASE("seponet reductions") {
  std::mt19937_64 rng(3);
  auto b = net({3, 6, 2}, rng), t1 = net({1, 6, 2}, rng), t2 = net({1, 6, 2}, rng);
  const std::vector<double> u{0.2, 0.7, -0.4};

  SepONetModel one{b, {t1}, 2};
  DeepONetModel deep{b, t1, 2};
  const std::vector<double> y1{0.6};
  CHECK(seponet_forward(one, u, y1) == deeponet_forward(deep, u, y1));

  SepONetModel two{b, {t1, t2}, 2};
  const std::vector<double> y2{0.6, -0.3};
  const auto fb = features(b, u), f1 = features(t1, std::span(y2).subspan(0, 1)),
             f2 = features(t2, std::span(y2).subspan(1, 1));
  double ref = 0.0;
  for (std::size_t i = 0; i < 2; ++i) ref += fb[i] * f1[i] * f2[i];
  CHECK(std::abs(seponet_forward(two, u, y2) - ref) <= 1e-12 * (1.0 + std::abs(ref)));

  constant_readout(two.trunks[1], {0.0, 0.0});
  CHECK(seponet_forward(two, u, y2) == 0.0);
}

TEST_CASE("scaling branch features scales the output") {
  std::mt19937_64 rng(4);
  DeepONetModel m{net({3, 6, 4}, rng), net({1, 6, 4}, rng), 4};
  const std::vector<double> u{0.1, 0.2, 0.3}, y{-0.5};
  const double base = deeponet_forward(m, u, y);
  for (auto& w : m.branch.readout.weights) w *= 3.0;
  for (auto& v : m.branch.readout.biases) v *= 3.0;
  CHECK(deeponet_forward(m, u, y) == doctest::Approx(3.0 * base).epsilon(1e-12));
}

TEST_CASE("rank-one separable function is reproduced on a grid") {
  std::mt19937_64 rng(5);
  SeparableModel m;
  m.branch = net({1, 4, 1}, rng);
  constant_readout(m.branch, {2.5});
  m.trunks = {net({1, 4, 1}, rng), net({1, 4, 1}, rng)};

  // Trunk features are injected through the readout bias per query point, so
  // the check exercises the separable head rather than the spiking internals.
  SeparableData d;
  d.inputs = {{0.0}};
  d.axes = {{{-0.5}, {0.0}, {0.25}}, {{0.1}, {0.7}}};
  for (const auto& a : d.axes[0])
    for (const auto& b : d.axes[1])
      d.targets.push_back(2.5 * std::sin(std::numbers::pi * a[0]) * std::exp(b[0]));

  for (std::size_t i = 0; i < d.axes[0].size(); ++i) {
    for (std::size_t j = 0; j < d.axes[1].size(); ++j) {
      auto mm = m;
      constant_readout(mm.trunks[0], {std::sin(std::numbers::pi * d.axes[0][i][0])});
      constant_readout(mm.trunks[1], {std::exp(d.axes[1][j][0])});
      SeparableObjective obj(mm, d);
      const std::size_t rec[] = {0};
      const auto pred = obj.predict(rec);
      CHECK(std::abs(pred[i * 2 + j] - d.targets[i * 2 + j]) < 1e-10);
    }
  }
}

TEST_CASE("mse") {
  const std::vector<double> a{1.0, 2.0}, b{0.0, -1.0};
  CHECK(mse_loss(a, a) == 0.0);
  CHECK(mse_loss(std::vector<double>{2.0}, std::vector<double>{0.0}) == 4.0);
  CHECK(mse_loss(a, b) == 5.0);
  CHECK_THROWS_AS(mse_loss(a, std::vector<double>{1.0}), DimensionError);
  CHECK_THROWS_AS(mse_loss(std::vector<double>{}, std::vector<double>{}), DimensionError);
}

TEST_CASE("local loss") {
  std::mt19937_64 rng(6);
  auto n = net({2, 5, 4, 1}, rng);
  SeparableModel sm = to_separable(n);
  LocalLossSpec spec = make_local_loss(sm, 1.0, rng);
  REQUIRE(spec.levels() == 2);

  std::vector<std::vector<double>> xs{{0.3, -0.2}, {1.0, 0.5}, {-0.7, 0.1}};
  std::vector<snn::SimulationTrace> traces;
  std::vector<double> targets;
  for (const auto& x : xs) {
    auto r = snn::mlp_forward(n, x, true);
    traces.push_back(*r.trace);
    targets.push_back(0.1 * x[0]);
  }

  // Term-by-term reference.
  double global = 0.0, local[2] = {0.0, 0.0};
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const double out = snn::mlp_forward(n, xs[s], false).output[0];
    global += (out - targets[s]) * (out - targets[s]) / 3.0;
    for (std::size_t l = 0; l < 2; ++l) {
      const auto rates = snn::rate_decode(traces[s].spikes[l]);
      const auto& p = spec.projections[l][0];
      double v = p.biases[0];
      for (std::size_t j = 0; j < rates.size(); ++j) v += p.weight(0, j) * rates[j];
      local[l] += (v - targets[s]) * (v - targets[s]) / 3.0;
    }
  }
  const double ref = global + (local[0] + local[1]) / 2.0;
  CHECK(std::abs(local_loss(n, traces, spec, targets) - ref) <= 1e-12 * (1.0 + ref));

  // Projections and readout that hit the targets exactly give zero loss.
  auto exact = n;
  std::fill(exact.readout.weights.begin(), exact.readout.weights.end(), 0.0);
  auto zero_spec = spec;
  for (auto& level : zero_spec.projections)
    for (auto& p : level) std::fill(p.weights.begin(), p.weights.end(), 0.0);
  std::vector<double> flat(3, 0.7);
  exact.readout.biases = {0.7};
  for (auto& level : zero_spec.projections) level[0].biases = {0.7};
  CHECK(local_loss(exact, traces, zero_spec, flat) == 0.0);

  // One hidden layer: global plus the single local term.
  auto shallow = net({2, 5, 1}, rng);
  auto sspec = make_local_loss(to_separable(shallow), 1.0, rng);
  std::vector<snn::SimulationTrace> st;
  for (const auto& x : xs) st.push_back(*snn::mlp_forward(shallow, x, true).trace);
  double g1 = 0.0, l1 = 0.0;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const auto rates = snn::rate_decode(st[s].spikes[0]);
    const double out = snn::mlp_forward(shallow, xs[s], false).output[0];
    std::vector<double> pv(1);
    sspec.projections[0][0].apply(rates, pv);
    g1 += (out - targets[s]) * (out - targets[s]) / 3.0;
    l1 += (pv[0] - targets[s]) * (pv[0] - targets[s]) / 3.0;
  }
  CHECK(local_loss(shallow, st, sspec, targets) == doctest::Approx(g1 + l1).epsilon(1e-12));
}

TEST_CASE("separable objective matches the explicit model loss") {
  std::mt19937_64 rng(7);
  SepONetModel sep{net({3, 6, 4}, rng), {net({1, 6, 4}, rng), net({1, 6, 4}, rng)}, 4};
  SeparableData d;
  std::normal_distribution<double> normal;
  for (int i = 0; i < 4; ++i) d.inputs.push_back({normal(rng), normal(rng), normal(rng)});
  d.axes = {{{0.0}, {0.5}, {1.0}}, {{-1.0}, {1.0}}};
  for (int i = 0; i < 4 * 6; ++i) d.targets.push_back(normal(rng));

  SeparableObjective obj(to_separable(sep), d);
  const std::vector<std::size_t> batch{1, 3};
  double ref = 0.0;
  for (std::size_t b : batch)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        const std::vector<double> y{d.axes[0][i][0], d.axes[1][j][0]};
        const double e = seponet_forward(sep, d.inputs[b], y) - d.targets[b * 6 + i * 2 + j];
        ref += e * e / 12.0;
      }
  grad::OpTally ops;
  CHECK(obj.loss(batch, ops) == doctest::Approx(ref).epsilon(1e-12));
  CHECK(ops.forward > 0);

  SeparableData bad = d;
  bad.targets.pop_back();
  CHECK_THROWS_AS(SeparableObjective(to_separable(sep), bad), DimensionError);
}

TEST_CASE("parameter layout names every block") {
  std::mt19937_64 rng(8);
  SeparableModel m;
  m.branch = net({3, 5, 4}, rng);
  m.trunks = {net({1, 5, 4}, rng)};
  m.local = make_local_loss(m, 1.0, rng);
  SeparableData d;
  d.inputs = {{0.0, 0.0, 0.0}};
  d.axes = {{{0.0}}};
  d.targets = {0.0};
  SeparableObjective obj(m, d);
  const auto& layout = obj.layout();
  CHECK_NOTHROW(layout.validate());
  CHECK(layout.total() == m.param_count());
  CHECK(layout.slices.size() == 6);  // 2 per net, 1 projection per net
  auto p = m.flatten();
  auto copy = m;
  copy.assign(p);
  CHECK(copy.flatten() == p);
}
