#include "rfgsnn/opnet/losses.hpp"

#include <fmt/format.h>

namespace rfgsnn::opnet {

double mse_loss(std::span<const double> preds, std::span<const double> targets) {
  if (preds.size() != targets.size()) {
    throw DimensionError(fmt::format("mse_loss: {} predictions vs {} targets", preds.size(),
                                     targets.size()));
  }
  if (preds.empty()) throw DimensionError("mse_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = preds[i] - targets[i];
    acc += e * e;
  }
  return acc / static_cast<double>(preds.size());
}

double local_loss(const snn::SpikingMLP& net, std::span<const snn::SimulationTrace> traces,
                  const LocalLossSpec& spec, std::span<const double> targets) {
  if (traces.size() != targets.size()) {
    throw DimensionError(fmt::format("local_loss: {} traces vs {} targets", traces.size(),
                                     targets.size()));
  }
  if (net.output_size() != 1) throw DimensionError("local_loss expects a scalar regressor");
  const std::size_t levels = net.depth();
  if (spec.projections.size() < levels) {
    throw ConfigError(fmt::format("local_loss: {} projections for {} hidden layers",
                                  spec.projections.size(), levels));
  }
  std::vector<double> global(traces.size());
  std::vector<std::vector<double>> local(levels, std::vector<double>(traces.size()));
  for (std::size_t s = 0; s < traces.size(); ++s) {
    const auto& tr = traces[s];
    if (tr.spikes.size() != levels) throw DimensionError("trace depth does not match network");
    for (std::size_t n = 0; n < levels; ++n) {
      if (spec.projections[n].empty()) {
        throw ConfigError(fmt::format("local_loss: missing projection for layer {}", n));
      }
      const auto rates = snn::rate_decode(tr.spikes[n]);
      const auto& proj = spec.projections[n][0];
      std::vector<double> out(proj.fan_out);
      proj.apply(rates, out);
      double sum = 0.0;
      for (double v : out) sum += v;
      local[n][s] = sum;
      if (n + 1 == levels) {
        std::vector<double> y(net.output_size());
        net.readout.apply(rates, y);
        global[s] = y[0];
      }
    }
  }
  double total = mse_loss(global, targets);
  double extra = 0.0;
  for (const auto& l : local) extra += mse_loss(l, targets);
  return total + spec.weight * extra / static_cast<double>(levels);
}

}  // namespace rfgsnn::opnet
