#include "rfgsnn/opnet/operator_models.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace rfgsnn::opnet {

void DeepONetModel::validate() const {
  branch.validate();
  trunk.validate();
  if (p == 0 || branch.output_size() != p || trunk.output_size() != p) {
    throw DimensionError(fmt::format("DeepONet basis count {} but branch emits {} and trunk {}",
                                     p, branch.output_size(), trunk.output_size()));
  }
}

void SepONetModel::validate() const {
  branch.validate();
  if (trunks.empty()) throw ConfigError("SepONet needs at least one trunk network");
  if (r == 0 || branch.output_size() != r) {
    throw DimensionError(fmt::format("SepONet rank {} but branch emits {}", r,
                                     branch.output_size()));
  }
  for (std::size_t n = 0; n < trunks.size(); ++n) {
    trunks[n].validate();
    if (trunks[n].output_size() != r) {
      throw DimensionError(fmt::format("trunk {} emits {} features, expected {}", n,
                                       trunks[n].output_size(), r));
    }
  }
}

double deeponet_forward(const DeepONetModel& model, std::span<const double> u,
                        std::span<const double> y) {
  model.validate();
  const auto b = snn::mlp_forward(model.branch, u, false).output;
  const auto t = snn::mlp_forward(model.trunk, y, false).output;
  double acc = 0.0;
  for (std::size_t i = 0; i < model.p; ++i) acc += b[i] * t[i];
  return acc;
}

double seponet_forward(const SepONetModel& model, std::span<const double> u,
                       std::span<const double> y) {
  model.validate();
  if (y.size() != model.d()) {
    throw DimensionError(fmt::format("SepONet has {} trunks, query has {} coordinates",
                                     model.d(), y.size()));
  }
  std::vector<double> prod = snn::mlp_forward(model.branch, u, false).output;
  for (std::size_t n = 0; n < model.d(); ++n) {
    const auto t = snn::mlp_forward(model.trunks[n], y.subspan(n, 1), false).output;
    for (std::size_t i = 0; i < model.r; ++i) prod[i] *= t[i];
  }
  double acc = 0.0;
  for (double v : prod) acc += v;
  return acc;
}

namespace {

template <class F>
void for_each_projection(const std::optional<LocalLossSpec>& local, F&& f) {
  if (!local) return;
  for (const auto& level : local->projections) {
    for (const auto& p : level) f(p);
  }
}

}  // namespace

std::size_t SeparableModel::param_count() const {
  std::size_t n = branch.param_count();
  for (const auto& t : trunks) n += t.param_count();
  for_each_projection(local, [&n](const snn::LayerParams& p) { n += p.param_count(); });
  return n;
}

std::vector<double> SeparableModel::flatten() const {
  std::vector<double> flat = branch.flatten();
  for (const auto& t : trunks) {
    const auto f = t.flatten();
    flat.insert(flat.end(), f.begin(), f.end());
  }
  for_each_projection(local, [&flat](const snn::LayerParams& p) {
    flat.insert(flat.end(), p.weights.begin(), p.weights.end());
    flat.insert(flat.end(), p.biases.begin(), p.biases.end());
  });
  return flat;
}

void SeparableModel::assign(std::span<const double> flat) {
  if (flat.size() != param_count()) {
    throw DimensionError(fmt::format("parameter vector has {} entries, model needs {}",
                                     flat.size(), param_count()));
  }
  std::size_t at = 0;
  branch.assign(flat.subspan(at, branch.param_count()));
  at += branch.param_count();
  for (auto& t : trunks) {
    t.assign(flat.subspan(at, t.param_count()));
    at += t.param_count();
  }
  if (local) {
    for (auto& level : local->projections) {
      for (auto& p : level) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), p.weights.size(),
                    p.weights.begin());
        at += p.weights.size();
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), p.biases.size(),
                    p.biases.begin());
        at += p.biases.size();
      }
    }
  }
}

void SeparableModel::validate() const {
  branch.validate();
  const std::size_t r = features();
  for (std::size_t k = 0; k < trunks.size(); ++k) {
    trunks[k].validate();
    if (trunks[k].output_size() != r) {
      throw DimensionError(fmt::format("trunk {} emits {} features, branch emits {}", k,
                                       trunks[k].output_size(), r));
    }
  }
  if (!local) return;
  const std::size_t nets = 1 + trunks.size();
  for (std::size_t n = 0; n < local->projections.size(); ++n) {
    const auto& level = local->projections[n];
    if (level.size() != nets) {
      throw ConfigError(fmt::format("local loss level {} has {} projections, model has {} nets",
                                    n, level.size(), nets));
    }
    for (std::size_t k = 0; k < nets; ++k) {
      const auto& net = k == 0 ? branch : trunks[k - 1];
      if (n >= net.depth()) {
        throw ConfigError(fmt::format("local loss level {} exceeds depth of net {}", n, k));
      }
      level[k].validate();
      if (level[k].fan_in != net.spiking_layers[n].fan_out || level[k].fan_out != r) {
        throw DimensionError(fmt::format("projection ({}, {}) is {}x{}, expected {}x{}", n, k,
                                         level[k].fan_out, level[k].fan_in, r,
                                         net.spiking_layers[n].fan_out));
      }
    }
  }
}

SeparableModel to_separable(const DeepONetModel& model) {
  model.validate();
  return SeparableModel{model.branch, {model.trunk}, std::nullopt};
}

SeparableModel to_separable(const SepONetModel& model) {
  model.validate();
  return SeparableModel{model.branch, model.trunks, std::nullopt};
}

SeparableModel to_separable(const snn::SpikingMLP& regressor) {
  regressor.validate();
  return SeparableModel{regressor, {}, std::nullopt};
}

LocalLossSpec make_local_loss(const SeparableModel& model, double weight, std::mt19937_64& rng) {
  std::size_t depth = model.branch.depth();
  for (const auto& t : model.trunks) {
    if (t.depth() != depth) {
      throw ConfigError("local loss needs branch and trunk nets of equal depth");
    }
  }
  LocalLossSpec spec;
  spec.weight = weight;
  spec.projections.resize(depth);
  for (std::size_t n = 0; n < depth; ++n) {
    spec.projections[n].push_back(
        snn::LayerParams::uniform(model.features(), model.branch.spiking_layers[n].fan_out, rng));
    for (const auto& t : model.trunks) {
      spec.projections[n].push_back(
          snn::LayerParams::uniform(model.features(), t.spiking_layers[n].fan_out, rng));
    }
  }
  return spec;
}

}  // namespace rfgsnn::opnet
