#include "rfgsnn/snn/spiking_mlp.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace rfgsnn::snn {

LayerParams LayerParams::zeros(std::size_t fan_out, std::size_t fan_in) {
  return LayerParams{fan_in, fan_out, std::vector<double>(fan_out * fan_in, 0.0),
                     std::vector<double>(fan_out, 0.0)};
}

LayerParams LayerParams::uniform(std::size_t fan_out, std::size_t fan_in, std::mt19937_64& rng) {
  LayerParams p = zeros(fan_out, fan_in);
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : p.weights) w = dist(rng);
  for (double& b : p.biases) b = dist(rng);
  return p;
}

void LayerParams::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != fan_in || y.size() != fan_out) {
    throw DimensionError(fmt::format("affine map {}x{} applied to input {} / output {}",
                                     fan_out, fan_in, x.size(), y.size()));
  }
  for (std::size_t i = 0; i < fan_out; ++i) {
    const double* row = weights.data() + i * fan_in;
    double acc = biases[i];
    for (std::size_t j = 0; j < fan_in; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void LayerParams::validate() const {
  if (weights.size() != fan_in * fan_out) {
    throw DimensionError(fmt::format("weight buffer has {} entries, expected {}x{}",
                                     weights.size(), fan_out, fan_in));
  }
  if (biases.size() != fan_out) {
    throw DimensionError(fmt::format("bias length {} does not match {} rows", biases.size(),
                                     fan_out));
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(weights.begin(), weights.end(), finite) ||
      !std::all_of(biases.begin(), biases.end(), finite)) {
    throw NumericalError("layer parameters contain non-finite entries");
  }
}

SpikingMLP SpikingMLP::create(std::span<const std::size_t> widths, const NeuronConfig& neuron,
                              const SurrogateConfig& surrogate, std::mt19937_64& rng) {
  if (widths.size() < 3) {
    throw ConfigError("a spiking MLP needs input, at least one hidden and an output width");
  }
  if (std::any_of(widths.begin(), widths.end(), [](std::size_t w) { return w == 0; })) {
    throw ConfigError("layer widths must be positive");
  }
  neuron.validate();
  surrogate.validate();
  SpikingMLP net;
  net.neuron = neuron;
  net.surrogate = surrogate;
  for (std::size_t l = 1; l + 1 < widths.size(); ++l) {
    net.spiking_layers.push_back(LayerParams::uniform(widths[l], widths[l - 1], rng));
  }
  net.readout = LayerParams::uniform(widths.back(), widths[widths.size() - 2], rng);
  return net;
}

std::size_t SpikingMLP::param_count() const {
  std::size_t n = readout.param_count();
  for (const auto& l : spiking_layers) n += l.param_count();
  return n;
}

std::vector<ParamRange> SpikingMLP::layer_ranges() const {
  std::vector<ParamRange> ranges;
  std::size_t offset = 0;
  for (const auto& l : spiking_layers) {
    ranges.push_back({offset, l.param_count()});
    offset += l.param_count();
  }
  ranges.push_back({offset, readout.param_count()});
  return ranges;
}

std::vector<double> SpikingMLP::flatten() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  auto push = [&flat](const LayerParams& l) {
    flat.insert(flat.end(), l.weights.begin(), l.weights.end());
    flat.insert(flat.end(), l.biases.begin(), l.biases.end());
  };
  for (const auto& l : spiking_layers) push(l);
  push(readout);
  return flat;
}

void SpikingMLP::assign(std::span<const double> flat) {
  if (flat.size() != param_count()) {
    throw DimensionError(fmt::format("parameter vector has {} entries, network needs {}",
                                     flat.size(), param_count()));
  }
  auto it = flat.begin();
  auto pull = [&it](LayerParams& l) {
    std::copy_n(it, l.weights.size(), l.weights.begin());
    it += static_cast<std::ptrdiff_t>(l.weights.size());
    std::copy_n(it, l.biases.size(), l.biases.begin());
    it += static_cast<std::ptrdiff_t>(l.biases.size());
  };
  for (auto& l : spiking_layers) pull(l);
  pull(readout);
}

void SpikingMLP::validate() const {
  if (spiking_layers.empty()) throw ConfigError("network has no spiking layers");
  neuron.validate();
  surrogate.validate();
  for (std::size_t l = 0; l < spiking_layers.size(); ++l) {
    spiking_layers[l].validate();
    if (l > 0 && spiking_layers[l].fan_in != spiking_layers[l - 1].fan_out) {
      throw DimensionError(fmt::format("layer {} expects {} inputs but layer {} emits {}", l,
                                       spiking_layers[l].fan_in, l - 1,
                                       spiking_layers[l - 1].fan_out));
    }
  }
  readout.validate();
  if (readout.fan_in != spiking_layers.back().fan_out) {
    throw DimensionError(fmt::format("readout expects {} rates but last layer has {} neurons",
                                     readout.fan_in, spiking_layers.back().fan_out));
  }
}

ForwardResult mlp_forward(const SpikingMLP& net, std::span<const double> input, bool record) {
  if (input.size() != net.input_size()) {
    throw DimensionError(fmt::format("network expects {} inputs, got {}", net.input_size(),
                                     input.size()));
  }
  const auto& cfg = net.neuron;
  const std::size_t depth = net.depth();
  const auto steps = static_cast<std::size_t>(cfg.time_steps);

  std::vector<std::vector<double>> membrane(depth), spikes(depth), z(depth), counts(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t m = net.spiking_layers[l].fan_out;
    membrane[l].assign(m, 0.0);
    spikes[l].assign(m, 0.0);
    z[l].assign(m, 0.0);
    counts[l].assign(m, 0.0);
  }
  // Direct encoding: the first layer sees the same current at every step.
  std::vector<double> drive(net.spiking_layers[0].fan_out);
  net.spiking_layers[0].apply(input, drive);

  ForwardResult result;
  if (record) {
    SimulationTrace trace;
    trace.membranes.resize(depth);
    trace.spikes.resize(depth);
    trace.postsynaptic.resize(depth);
    result.trace = std::move(trace);
  }

  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t l = 0; l < depth; ++l) {
      if (l == 0) {
        z[0] = drive;
      } else {
        net.spiking_layers[l].apply(spikes[l - 1], z[l]);
      }
      for (std::size_t i = 0; i < membrane[l].size(); ++i) {
        double u = cfg.leak * membrane[l][i] + z[l][i];
        const double x = u - cfg.threshold;
        const double s = cfg.spike_mode == SpikeMode::Heaviside
                             ? heaviside(x)
                             : smooth_spike(x, net.surrogate.sigma);
        u -= s * cfg.threshold;
        membrane[l][i] = u;
        spikes[l][i] = s;
        counts[l][i] += s;
      }
      if (record) {
        result.trace->membranes[l].push_back(membrane[l]);
        result.trace->spikes[l].push_back(spikes[l]);
        result.trace->postsynaptic[l].push_back(z[l]);
      }
    }
  }

  std::vector<double> rates = counts.back();
  for (double& r : rates) r /= static_cast<double>(steps);
  result.output.resize(net.output_size());
  net.readout.apply(rates, result.output);
  return result;
}

std::vector<double> rate_decode(const std::vector<std::vector<double>>& spikes) {
  if (spikes.empty()) throw EmptyTraceError("rate_decode: spike train has no time steps");
  const std::size_t width = spikes.front().size();
  std::vector<double> rates(width, 0.0);
  for (const auto& row : spikes) {
    if (row.size() != width) throw DimensionError("rate_decode: ragged spike matrix");
    for (std::size_t i = 0; i < width; ++i) rates[i] += row[i];
  }
  for (double& r : rates) r /= static_cast<double>(spikes.size());
  return rates;
}

}  // namespace rfgsnn::snn
