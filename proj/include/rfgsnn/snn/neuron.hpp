#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rfgsnn/errors.hpp"

namespace rfgsnn::snn {

// How a membrane crossing becomes a spike. Relaxed replaces the Heaviside
// step by the Gaussian CDF whose derivative is the SG surrogate, giving a
// smooth network used for finite-difference verification.
enum class SpikeMode { Heaviside, Relaxed };

struct NeuronConfig {
  double threshold = 1.0;
  double leak = 1.0;  // 1.0 is plain integrate-and-fire
  int time_steps = 32;
  // Treat the reset term as a constant when differentiating.
  bool detach_reset = true;
  SpikeMode spike_mode = SpikeMode::Heaviside;

  void validate() const;
};

enum class SurrogateKind { SG, WSG };

struct SurrogateConfig {
  SurrogateKind kind = SurrogateKind::SG;
  double sigma = 0.5;
  int wsg_samples = 8;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// H(x) with H(0) = 1.
inline double heaviside(double x) { return x >= 0.0 ? 1.0 : 0.0; }

// Gaussian density with standard deviation sigma.
double surrogate_sg(double x, double sigma);

// Gaussian CDF scaled by sigma; its derivative is surrogate_sg.
double smooth_spike(double x, double sigma);

// Stein-lemma surrogate from explicit perturbations delta_k.
double surrogate_wsg(double x, double sigma, std::span<const double> deltas);

// Stein-lemma surrogate with K perturbations drawn from N(0, sigma^2).
template <class Urbg>
double surrogate_wsg(double x, double sigma, int k_samples, Urbg& rng) {
  if (!(sigma > 0.0)) throw ConfigError("surrogate sigma must be positive");
  if (k_samples < 1) throw ConfigError("wsg_samples must be at least 1");
  std::normal_distribution<double> normal(0.0, sigma);
  const double base = heaviside(x);
  double acc = 0.0;
  for (int k = 0; k < k_samples; ++k) {
    const double d = normal(rng);
    acc += d * (heaviside(x + d) - base);
  }
  return acc / (sigma * sigma * k_samples);
}

struct IfStepResult {
  std::vector<double> membrane;
  std::vector<double> spikes;
};

// One integrate-and-fire step: leak and integrate, fire, reset by subtraction.
IfStepResult if_step(std::span<const double> membrane, std::span<const double> z,
                     const NeuronConfig& cfg);

}  // namespace rfgsnn::snn
