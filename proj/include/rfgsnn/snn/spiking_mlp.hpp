#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rfgsnn/snn/neuron.hpp"

namespace rfgsnn::snn {

// Affine map y = W x + b with W stored row-major [fan_out x fan_in].
struct LayerParams {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  static LayerParams zeros(std::size_t fan_out, std::size_t fan_in);
  // Weights and biases uniform in +-sqrt(1 / fan_in).
  static LayerParams uniform(std::size_t fan_out, std::size_t fan_in, std::mt19937_64& rng);

  std::size_t param_count() const { return weights.size() + biases.size(); }
  double weight(std::size_t row, std::size_t col) const { return weights[row * fan_in + col]; }
  double& weight(std::size_t row, std::size_t col) { return weights[row * fan_in + col]; }

  // y = W x + b
  void apply(std::span<const double> x, std::span<double> y) const;
  void validate() const;
};

struct ParamRange {
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Layered IF network: spiking layers driven by direct current injection,
// followed by a non-spiking affine readout of last-layer firing rates.
struct SpikingMLP {
  std::vector<LayerParams> spiking_layers;
  LayerParams readout;
  NeuronConfig neuron;
  SurrogateConfig surrogate;

  // widths = {input, hidden_1, ..., hidden_L, output}, L >= 1.
  static SpikingMLP create(std::span<const std::size_t> widths, const NeuronConfig& neuron,
                           const SurrogateConfig& surrogate, std::mt19937_64& rng);

  std::size_t input_size() const { return spiking_layers.front().fan_in; }
  std::size_t output_size() const { return readout.fan_out; }
  std::size_t depth() const { return spiking_layers.size(); }

  // Flat order: for each spiking layer W then b, then readout W then b.
  std::size_t param_count() const;
  // One range per spiking layer plus one for the readout.
  std::vector<ParamRange> layer_ranges() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  void validate() const;
};

// Per-layer, per-step records of one simulation.
struct SimulationTrace {
  // [layer][step][neuron]; membranes are post-reset values.
  std::vector<std::vector<std::vector<double>>> membranes;
  std::vector<std::vector<std::vector<double>>> spikes;
  std::vector<std::vector<std::vector<double>>> postsynaptic;
};

struct ForwardResult {
  std::vector<double> output;
  std::optional<SimulationTrace> trace;
};

ForwardResult mlp_forward(const SpikingMLP& net, std::span<const double> input, bool record);

// Mean over time of a [T][width] spike matrix.
std::vector<double> rate_decode(const std::vector<std::vector<double>>& spikes);

}  // namespace rfgsnn::snn
