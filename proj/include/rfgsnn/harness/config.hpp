#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rfgsnn/data/datasets.hpp"
#include "rfgsnn/grad/estimators.hpp"
#include "rfgsnn/grad/optimizer.hpp"
#include "rfgsnn/snn/neuron.hpp"

namespace rfgsnn::harness {

enum class GradientMethod { BP, RFG };
enum class Perturbation { None, Global, Layerwise };

// "Surrogate - gradient method - perturbation", e.g. WSG-RFG-G, SG-BP-LL.
// RFG with local loss defaults to the global perturbation and renders as
// SG-RFG-LL; the layer-wise variant is SG-RFG-L-LL.
struct Combination {
  snn::SurrogateKind surrogate = snn::SurrogateKind::SG;
  GradientMethod gradient = GradientMethod::BP;
  Perturbation perturbation = Perturbation::None;
  bool local_loss = false;

  bool operator==(const Combination&) const = default;
  void validate() const;
  grad::Estimator estimator() const;
};

std::string render(const Combination& c);
Combination parse_combination(std::string_view name);

// The ten rows of the Poisson comparison table.
std::vector<Combination> table_combinations();

struct ExperimentConfig {
  std::string label;  // run name; empty means the rendered combination
  data::Task task = data::Task::MexicanHat;
  std::size_t epochs = 200;
  std::size_t batch_size = 256;

  std::vector<std::size_t> hidden{16, 16};
  std::size_t features = 16;  // p for DeepONet, r for SepONet
  snn::NeuronConfig neuron{};
  double local_weight = 1.0;

  Combination combination{};
  double sigma = 0.5;
  std::size_t wsg_samples = 8;

  grad::OptimizerSpec optimizer{};
  std::uint64_t seed = 1;

  std::string name() const { return label.empty() ? render(combination) : label; }
  void validate() const;
};

// Per-task defaults for architecture, schedule and sigma.
ExperimentConfig default_config(data::Task task);

// `key = value` lines under [task], [network], [surrogate], [gradient],
// [optimizer] and [seeds]. Keys left out keep the task defaults; unknown
// sections or keys are ConfigErrors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& file);
std::string render_config(const ExperimentConfig& cfg);

// Git-style hash of the rendered config.
std::string config_hash(const ExperimentConfig& cfg);

// A matrix file holds a [matrix] section with
//   base = <config file, relative to the matrix file>
//   combinations = SG-BP, WSG-RFG-G, ...
//   data = <dataset dir> (optional; generated under the output dir otherwise)
//   data_seed = N (optional, used when generating)
struct MatrixSpec {
  std::vector<ExperimentConfig> runs;
  std::optional<std::filesystem::path> data;
  std::uint64_t data_seed = 0;
};

MatrixSpec load_matrix(const std::filesystem::path& file);

}  // namespace rfgsnn::harness
