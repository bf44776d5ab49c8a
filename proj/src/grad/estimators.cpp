#include "rfgsnn/grad/estimators.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace rfgsnn::grad {

std::string_view estimator_name(Estimator e) {
  switch (e) {
    case Estimator::BP: return "BP";
    case Estimator::RFG_G: return "RFG-G";
    case Estimator::RFG_L: return "RFG-L";
  }
  return "?";
}

namespace {

void require_batch(Batch batch) {
  if (batch.empty()) throw ConfigError("gradient requested for an empty batch");
}

void require_finite(const GradientEstimate& g) {
  if (!std::isfinite(g.loss) ||
      !std::all_of(g.values.begin(), g.values.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericalError(fmt::format("{} gradient estimate is not finite (loss {})",
                                     estimator_name(g.estimator), g.loss));
  }
}

}  // namespace

GradientEstimate bptt_grad(const Objective& objective, Batch batch, std::uint64_t pass_seed) {
  require_batch(batch);
  GradientEstimate g;
  g.estimator = Estimator::BP;
  g.values.assign(objective.layout().total(), 0.0);
  g.loss = objective.loss_and_gradient(batch, pass_seed, g.values, g.op_count);
  require_finite(g);
  return g;
}

double jvp_loss(const Objective& objective, std::span<TangentChannel> channels, Batch batch,
                std::uint64_t pass_seed, OpTally& ops) {
  require_batch(batch);
  const std::size_t n = objective.layout().total();
  std::vector<std::span<const double>> views;
  views.reserve(channels.size());
  for (const auto& c : channels) {
    if (c.tangent.size() != n) {
      throw DimensionError(fmt::format("tangent channel {} has {} entries, objective has {}",
                                       c.channel_id, c.tangent.size(), n));
    }
    views.emplace_back(c.tangent);
  }
  std::vector<double> jvps(channels.size(), 0.0);
  const double loss = objective.loss_and_jvp(batch, pass_seed, views, jvps, ops);
  for (std::size_t c = 0; c < channels.size(); ++c) channels[c].accumulated_jvp = jvps[c];
  return loss;
}

GradientEstimate rfg_global_with(const Objective& objective, Batch batch,
                                 const PerturbationVector& v, std::uint64_t pass_seed) {
  require_batch(batch);
  if (v.values.size() != objective.layout().total()) {
    throw DimensionError("perturbation does not match the parameter layout");
  }
  GradientEstimate g;
  g.estimator = Estimator::RFG_G;
  const std::span<const double> view(v.values);
  double s = 0.0;
  g.loss = objective.loss_and_jvp(batch, pass_seed, std::span(&view, 1), std::span(&s, 1),
                                  g.op_count);
  g.values.resize(v.values.size());
  for (std::size_t i = 0; i < v.values.size(); ++i) g.values[i] = s * v.values[i];
  g.op_count.tangent += v.values.size();
  require_finite(g);
  return g;
}

GradientEstimate rfg_layerwise_with(const Objective& objective, Batch batch,
                                    const PerturbationVector& v, std::uint64_t pass_seed) {
  require_batch(batch);
  const std::size_t n = objective.layout().total();
  if (v.values.size() != n) {
    throw DimensionError("perturbation does not match the parameter layout");
  }
  const auto& slices = v.layer_slices;
  // Channel l carries block l of v and zeros elsewhere.
  std::vector<std::vector<double>> channels(slices.size(), std::vector<double>(n, 0.0));
  std::vector<std::span<const double>> views;
  for (std::size_t l = 0; l < slices.size(); ++l) {
    std::copy_n(v.values.begin() + static_cast<std::ptrdiff_t>(slices[l].offset), slices[l].size,
                channels[l].begin() + static_cast<std::ptrdiff_t>(slices[l].offset));
    views.emplace_back(channels[l]);
  }
  std::vector<double> s(slices.size(), 0.0);
  GradientEstimate g;
  g.estimator = Estimator::RFG_L;
  g.loss = objective.loss_and_jvp(batch, pass_seed, views, s, g.op_count);
  g.values.assign(n, 0.0);
  for (std::size_t l = 0; l < slices.size(); ++l) {
    for (std::size_t i = slices[l].offset; i < slices[l].offset + slices[l].size; ++i) {
      g.values[i] = s[l] * v.values[i];
    }
  }
  g.op_count.tangent += n;
  require_finite(g);
  return g;
}

GradientEstimate rfg_global(const Objective& objective, Batch batch, std::mt19937_64& rng,
                            std::uint64_t pass_seed) {
  const auto v = sample_perturbation(objective.layout(), PerturbationMode::Global, rng);
  return rfg_global_with(objective, batch, v, pass_seed);
}

GradientEstimate rfg_layerwise(const Objective& objective, Batch batch, std::mt19937_64& rng,
                               std::uint64_t pass_seed) {
  const auto v = sample_perturbation(objective.layout(), PerturbationMode::Layerwise, rng);
  return rfg_layerwise_with(objective, batch, v, pass_seed);
}

OpTally count_ops(const snn::SpikingMLP& net, PassKind pass, std::size_t channels) {
  const std::vector<double> input(net.input_size(), 0.0);
  const SurrogateStream stream{};
  OpTally ops;
  switch (pass) {
    case PassKind::Forward: {
      forward_pass(net, input, stream, nullptr, ops);
      break;
    }
    case PassKind::ForwardWithTangents: {
      const std::vector<double> dense(net.param_count(), 1.0);
      std::vector<std::span<const double>> views(channels, std::span<const double>(dense));
      NetTangents tan;
      tangent_pass(net, input, stream, views, tan, ops);
      break;
    }
    case PassKind::Backward: {
      NetTape tape;
      const auto act = forward_pass(net, input, stream, &tape, ops);
      std::vector<double> grad(net.param_count(), 0.0);
      const std::vector<double> cot(net.output_size(), 1.0);
      backward_pass(net, input, tape, act, cot, {}, grad, ops);
      break;
    }
  }
  return ops;
}

}  // namespace rfgsnn::grad
