#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rfgsnn/snn/spiking_mlp.hpp"

namespace rfgsnn::grad {

// Operation tallies. One unit per multiply-add or standalone add/multiply;
// an affine map costs fan_out * fan_in (the bias seeds the accumulator).
// Counts depend only on architecture, T and the tangent structure.
struct OpTally {
  std::uint64_t forward = 0;
  std::uint64_t tangent = 0;
  std::uint64_t backward = 0;

  std::uint64_t total() const { return forward + tangent + backward; }
  OpTally& operator+=(const OpTally& o) {
    forward += o.forward;
    tangent += o.tangent;
    backward += o.backward;
    return *this;
  }
  bool operator==(const OpTally&) const = default;
};

// Identifies the random substream used for WSG surrogate values of one
// network evaluation. Reverse and tangent passes that share a stream see
// identical surrogate values.
struct SurrogateStream {
  std::uint64_t pass_seed = 0;
  std::uint64_t eval_id = 0;
  std::uint32_t net_id = 0;
};

// Surrogate derivative values for one layer at one step; x = U - threshold.
void surrogate_slopes(const snn::SpikingMLP& net, const SurrogateStream& stream,
                      std::size_t layer, std::size_t step, std::span<const double> x,
                      std::span<double> out);

struct NetActivity {
  std::vector<double> output;
  std::vector<std::vector<double>> rates;  // per spiking layer
};

// What the reverse pass needs from the forward simulation.
struct NetTape {
  std::vector<std::vector<double>> spikes;  // [layer][step * width + neuron]
  std::vector<std::vector<double>> slopes;  // surrogate dS/dU, same layout
};

struct NetTangents {
  std::vector<bool> live;                               // [channel] output tangent nonzero
  std::vector<std::vector<double>> output;              // [channel][out]
  std::vector<std::vector<std::vector<double>>> rates;  // [channel][layer][width]
};

// Primal simulation; fills the tape when one is given.
NetActivity forward_pass(const snn::SpikingMLP& net, std::span<const double> input,
                         const SurrogateStream& stream, NetTape* tape, OpTally& ops);

// Primal simulation carrying one tangent per channel. Each tangent is aligned
// with net.flatten(); an empty span marks a channel that is zero on this net.
NetActivity tangent_pass(const snn::SpikingMLP& net, std::span<const double> input,
                         const SurrogateStream& stream,
                         std::span<const std::span<const double>> tangents, NetTangents& out,
                         OpTally& ops);

// Reverse sweep through the recorded simulation. Accumulates into grad
// (aligned with net.flatten()). rate_cotangents, when non-empty, holds one
// entry per spiking layer (an empty entry means zero).
void backward_pass(const snn::SpikingMLP& net, std::span<const double> input,
                   const NetTape& tape, const NetActivity& activity,
                   std::span<const double> output_cotangent,
                   std::span<const std::vector<double>> rate_cotangents, std::span<double> grad,
                   OpTally& ops);

}  // namespace rfgsnn::grad
