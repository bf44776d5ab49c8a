#pragma once

#include <span>

#include "rfgsnn/opnet/operator_models.hpp"

namespace rfgsnn::opnet {

// (1/N) sum (pred - target)^2
double mse_loss(std::span<const double> preds, std::span<const double> targets);

// Global MSE of the network readout plus weight * mean over hidden layers of
// the MSE between each layer's projected rates and the targets. One trace per
// sample; single-output regressor, projections[n][0] used for layer n.
double local_loss(const snn::SpikingMLP& net, std::span<const snn::SimulationTrace> traces,
                  const LocalLossSpec& spec, std::span<const double> targets);

}  // namespace rfgsnn::opnet
