#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "rfgsnn/grad/objective.hpp"
#include "rfgsnn/grad/perturbation.hpp"

namespace rfgsnn::grad {

enum class Estimator { BP, RFG_G, RFG_L };

std::string_view estimator_name(Estimator e);

struct GradientEstimate {
  std::vector<double> values;
  Estimator estimator = Estimator::BP;
  OpTally op_count;
  double loss = 0.0;  // primal loss of the pass that produced the estimate
};

struct TangentChannel {
  int channel_id = 0;
  std::vector<double> tangent;
  double accumulated_jvp = 0.0;
};

// Reverse-mode gradient through the unrolled simulation.
GradientEstimate bptt_grad(const Objective& objective, Batch batch, std::uint64_t pass_seed);

// One forward simulation carrying every channel; stores <grad, tangent_c> in
// channels[c].accumulated_jvp and returns the primal loss.
double jvp_loss(const Objective& objective, std::span<TangentChannel> channels, Batch batch,
                std::uint64_t pass_seed, OpTally& ops);

// (grad . v) v with one Rademacher direction v over all parameters.
GradientEstimate rfg_global(const Objective& objective, Batch batch, std::mt19937_64& rng,
                            std::uint64_t pass_seed);

// Per layer block l: (grad_l . v_l) v_l, all blocks in a single multi-channel pass.
GradientEstimate rfg_layerwise(const Objective& objective, Batch batch, std::mt19937_64& rng,
                               std::uint64_t pass_seed);

// Same estimators with a caller-supplied direction.
GradientEstimate rfg_global_with(const Objective& objective, Batch batch,
                                 const PerturbationVector& v, std::uint64_t pass_seed);
GradientEstimate rfg_layerwise_with(const Objective& objective, Batch batch,
                                    const PerturbationVector& v, std::uint64_t pass_seed);

enum class PassKind { Forward, ForwardWithTangents, Backward };

// Instrumented single-sample pass over one network. ForwardWithTangents runs
// `channels` dense tangents; Backward reports the taped forward plus the
// reverse sweep.
OpTally count_ops(const snn::SpikingMLP& net, PassKind pass, std::size_t channels = 1);

}  // namespace rfgsnn::grad
