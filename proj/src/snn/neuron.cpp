#include "rfgsnn/snn/neuron.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace rfgsnn::snn {

void NeuronConfig::validate() const {
  if (!(threshold > 0.0)) {
    throw ConfigError(fmt::format("threshold must be positive, got {}", threshold));
  }
  if (!(leak >= 0.0 && leak <= 1.0)) {
    throw ConfigError(fmt::format("leak must lie in [0, 1], got {}", leak));
  }
  if (time_steps < 1) {
    throw ConfigError(fmt::format("time_steps must be >= 1, got {}", time_steps));
  }
}

void SurrogateConfig::validate() const {
  if (!(sigma > 0.0)) {
    throw ConfigError(fmt::format("surrogate sigma must be positive, got {}", sigma));
  }
  if (wsg_samples < 1) {
    throw ConfigError(fmt::format("wsg_samples must be >= 1, got {}", wsg_samples));
  }
}

double surrogate_sg(double x, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("surrogate sigma must be positive");
  const double u = x / sigma;
  return std::numbers::inv_sqrtpi / (std::numbers::sqrt2 * sigma) * std::exp(-0.5 * u * u);
}

double smooth_spike(double x, double sigma) {
  return 0.5 * std::erfc(-x / (sigma * std::numbers::sqrt2));
}

double surrogate_wsg(double x, double sigma, std::span<const double> deltas) {
  if (!(sigma > 0.0)) throw ConfigError("surrogate sigma must be positive");
  if (deltas.empty()) throw ConfigError("wsg needs at least one perturbation");
  const double base = heaviside(x);
  double acc = 0.0;
  for (double d : deltas) acc += d * (heaviside(x + d) - base);
  return acc / (sigma * sigma * static_cast<double>(deltas.size()));
}

IfStepResult if_step(std::span<const double> membrane, std::span<const double> z,
                     const NeuronConfig& cfg) {
  if (membrane.size() != z.size()) {
    throw DimensionError(fmt::format("if_step: membrane has {} entries, current has {}",
                                     membrane.size(), z.size()));
  }
  IfStepResult out{std::vector<double>(membrane.size()), std::vector<double>(membrane.size())};
  for (std::size_t i = 0; i < membrane.size(); ++i) {
    double u = cfg.leak * membrane[i] + z[i];
    const double s = heaviside(u - cfg.threshold);
    u -= s * cfg.threshold;
    out.membrane[i] = u;
    out.spikes[i] = s;
  }
  return out;
}

}  // namespace rfgsnn::snn
