#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rfgsnn/snn/spiking_mlp.hpp"

namespace rfgsnn::opnet {

struct DeepONetModel {
  snn::SpikingMLP branch;  // n sensor values -> p features
  snn::SpikingMLP trunk;   // query coordinate -> p features
  std::size_t p = 0;

  void validate() const;
};

struct SepONetModel {
  snn::SpikingMLP branch;              // -> r features
  std::vector<snn::SpikingMLP> trunks;  // d nets, each scalar -> r features
  std::size_t r = 0;

  std::size_t d() const { return trunks.size(); }
  void validate() const;
};

// sum_i Branch_i(u) Trunk_i(y)
double deeponet_forward(const DeepONetModel& model, std::span<const double> u,
                        std::span<const double> y);

// sum_i Branch_i(u) prod_n Trunk_{i,n}(y_n)
double seponet_forward(const SepONetModel& model, std::span<const double> u,
                       std::span<const double> y);

// Affine maps from hidden-layer rates to feature space, used for the
// auxiliary per-layer losses. projections[level][net], net 0 is the branch.
struct LocalLossSpec {
  std::vector<std::vector<snn::LayerParams>> projections;
  double weight = 1.0;

  std::size_t levels() const { return projections.size(); }
};

// Branch net plus d trunk nets whose features combine as
//   pred(u, y) = sum_i b_i(u) prod_n t_{i,n}(y_n).
// d = 0 is a plain regressor (prediction = sum of branch outputs), d = 1 a
// DeepONet, d >= 2 a SepONet.
struct SeparableModel {
  snn::SpikingMLP branch;
  std::vector<snn::SpikingMLP> trunks;
  std::optional<LocalLossSpec> local;

  std::size_t features() const { return branch.output_size(); }
  std::size_t param_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  void validate() const;
};

SeparableModel to_separable(const DeepONetModel& model);
SeparableModel to_separable(const SepONetModel& model);
SeparableModel to_separable(const snn::SpikingMLP& regressor);

// One projection per spiking layer of every net, mapping rates to features.
LocalLossSpec make_local_loss(const SeparableModel& model, double weight, std::mt19937_64& rng);

}  // namespace rfgsnn::opnet
