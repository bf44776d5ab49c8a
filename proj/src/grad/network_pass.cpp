#include "rfgsnn/grad/network_pass.hpp"

#include <algorithm>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <fmt/format.h>

#include "rfgsnn/rng.hpp"

namespace rfgsnn::grad {

using snn::LayerParams;
using snn::SpikeMode;
using snn::SpikingMLP;
using snn::SurrogateKind;

void surrogate_slopes(const SpikingMLP& net, const SurrogateStream& stream, std::size_t layer,
                      std::size_t step, std::span<const double> x, std::span<double> out) {
  const double sigma = net.surrogate.sigma;
  if (net.neuron.spike_mode == SpikeMode::Relaxed || net.surrogate.kind == SurrogateKind::SG) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = snn::surrogate_sg(x[i], sigma);
    return;
  }
  SplitMix64 rng(mix_seed({net.surrogate.rng_seed, stream.pass_seed, stream.net_id,
                           stream.eval_id, layer, step}));
  // Ziggurat sampling; the WSG cost is dominated by these draws.
  boost::random::normal_distribution<double> normal(0.0, sigma);
  const int k = net.surrogate.wsg_samples;
  const double scale = 1.0 / (sigma * sigma * k);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double base = snn::heaviside(x[i]);
    double acc = 0.0;
    for (int s = 0; s < k; ++s) {
      const double d = normal(rng);
      acc += d * (snn::heaviside(x[i] + d) - base);
    }
    out[i] = acc * scale;
  }
}

namespace {

// y += W x (no bias)
void accumulate_matvec(const LayerParams& layer, const double* weights, const double* x,
                       double* y) {
  const std::size_t n = layer.fan_in;
  for (std::size_t i = 0; i < layer.fan_out; ++i) {
    const double* row = weights + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

// y += W^T x
void accumulate_matvec_t(const LayerParams& layer, const double* x, double* y) {
  const std::size_t n = layer.fan_in;
  for (std::size_t i = 0; i < layer.fan_out; ++i) {
    const double* row = layer.weights.data() + i * n;
    const double xi = x[i];
    for (std::size_t j = 0; j < n; ++j) y[j] += row[j] * xi;
  }
}

// G += a b^T for a gradient block laid out like the layer weights.
void accumulate_outer(const LayerParams& layer, const double* a, const double* b, double* g) {
  const std::size_t n = layer.fan_in;
  for (std::size_t i = 0; i < layer.fan_out; ++i) {
    const double ai = a[i];
    double* row = g + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += ai * b[j];
  }
}

std::uint64_t affine_cost(const LayerParams& l) {
  return static_cast<std::uint64_t>(l.fan_in) * l.fan_out;
}

std::uint64_t slope_cost(const SpikingMLP& net, std::size_t width) {
  const bool wsg =
      net.neuron.spike_mode == SpikeMode::Heaviside && net.surrogate.kind == SurrogateKind::WSG;
  return width * static_cast<std::uint64_t>(wsg ? net.surrogate.wsg_samples : 1);
}

struct ChannelState {
  std::vector<bool> active;  // [layer], readout at index depth
  std::vector<bool> live;    // [layer] state tangent nonzero
  std::vector<std::vector<double>> du, ds, dcount;
  std::vector<double> dz0;
};

NetActivity simulate(const SpikingMLP& net, std::span<const double> input,
                     const SurrogateStream& stream, NetTape* tape,
                     std::span<const std::span<const double>> tangents, NetTangents* tan,
                     OpTally& ops) {
  if (input.size() != net.input_size()) {
    throw DimensionError(fmt::format("network expects {} inputs, got {}", net.input_size(),
                                     input.size()));
  }
  const auto& cfg = net.neuron;
  const std::size_t depth = net.depth();
  const auto steps = static_cast<std::size_t>(cfg.time_steps);
  const auto ranges = net.layer_ranges();
  const std::size_t n_params = net.param_count();
  const double th = cfg.threshold;
  const double leak = cfg.leak;

  // Tangent bookkeeping.
  std::vector<ChannelState> ch(tangents.size());
  bool any_live = false;
  for (std::size_t c = 0; c < tangents.size(); ++c) {
    const auto& tv = tangents[c];
    if (!tv.empty() && tv.size() != n_params) {
      throw DimensionError(fmt::format("tangent channel {} has {} entries, network has {}", c,
                                       tv.size(), n_params));
    }
    auto& s = ch[c];
    s.active.assign(depth + 1, false);
    s.live.assign(depth, false);
    for (std::size_t l = 0; l <= depth && !tv.empty(); ++l) {
      auto block = tv.subspan(ranges[l].offset, ranges[l].size);
      s.active[l] = std::any_of(block.begin(), block.end(), [](double v) { return v != 0.0; });
    }
    for (std::size_t l = 0; l < depth; ++l) {
      s.live[l] = s.active[l] || (l > 0 && s.live[l - 1]);
      if (s.live[l]) {
        const std::size_t m = net.spiking_layers[l].fan_out;
        if (s.du.empty()) {
          s.du.resize(depth);
          s.ds.resize(depth);
          s.dcount.resize(depth);
        }
        s.du[l].assign(m, 0.0);
        s.ds[l].assign(m, 0.0);
        s.dcount[l].assign(m, 0.0);
      }
    }
    any_live = any_live || s.live[depth - 1] || s.active[depth];
  }
  const bool need_slopes = tape != nullptr || any_live;

  std::vector<std::vector<double>> u(depth), s(depth), count(depth);
  std::size_t max_width = 0;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t m = net.spiking_layers[l].fan_out;
    u[l].assign(m, 0.0);
    s[l].assign(m, 0.0);
    count[l].assign(m, 0.0);
    max_width = std::max(max_width, m);
  }
  if (tape) {
    tape->spikes.assign(depth, {});
    tape->slopes.assign(depth, {});
    for (std::size_t l = 0; l < depth; ++l) {
      tape->spikes[l].assign(steps * u[l].size(), 0.0);
      tape->slopes[l].assign(steps * u[l].size(), 0.0);
    }
  }

  const LayerParams& first = net.spiking_layers[0];
  std::vector<double> drive(first.fan_out);
  first.apply(input, drive);
  ops.forward += affine_cost(first);

  for (std::size_t c = 0; c < ch.size(); ++c) {
    if (!ch[c].active[0]) continue;
    const double* tw = tangents[c].data() + ranges[0].offset;
    ch[c].dz0.assign(tw + first.weights.size(), tw + first.param_count());
    accumulate_matvec(first, tw, input.data(), ch[c].dz0.data());
    ops.tangent += affine_cost(first);
  }

  std::vector<double> z(max_width), x(max_width), slope(max_width), dz(max_width);

  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t l = 0; l < depth; ++l) {
      const LayerParams& layer = net.spiking_layers[l];
      const std::size_t m = layer.fan_out;
      // Presynaptic spikes of layer l-1 at this step are still in s[l-1].
      if (l == 0) {
        std::copy(drive.begin(), drive.end(), z.begin());
      } else {
        std::copy(layer.biases.begin(), layer.biases.end(), z.begin());
        accumulate_matvec(layer, layer.weights.data(), s[l - 1].data(), z.data());
        ops.forward += affine_cost(layer);
      }
      for (std::size_t i = 0; i < m; ++i) {
        const double upre = leak * u[l][i] + z[i];
        x[i] = upre - th;
        u[l][i] = upre;
      }
      ops.forward += 2 * m;

      if (need_slopes) {
        surrogate_slopes(net, stream, l, t, std::span<const double>(x.data(), m),
                         std::span<double>(slope.data(), m));
        (tape ? ops.backward : ops.tangent) += slope_cost(net, m);
      }

      // Tangents use the presynaptic state before this layer's update.
      for (std::size_t c = 0; c < ch.size(); ++c) {
        auto& st = ch[c];
        if (!st.live[l]) continue;
        if (l == 0) {
          if (st.active[0]) {
            std::copy(st.dz0.begin(), st.dz0.end(), dz.begin());
          } else {
            std::fill_n(dz.begin(), m, 0.0);
          }
        } else {
          if (st.active[l]) {
            const double* tw = tangents[c].data() + ranges[l].offset;
            std::copy(tw + layer.weights.size(), tw + layer.param_count(), dz.begin());
            accumulate_matvec(layer, tw, s[l - 1].data(), dz.data());
            ops.tangent += affine_cost(layer);
          } else {
            std::fill_n(dz.begin(), m, 0.0);
          }
          if (st.live[l - 1]) {
            accumulate_matvec(layer, layer.weights.data(), st.ds[l - 1].data(), dz.data());
            ops.tangent += affine_cost(layer);
          }
        }
        auto& du = st.du[l];
        auto& ds = st.ds[l];
        auto& dcount = st.dcount[l];
        for (std::size_t i = 0; i < m; ++i) {
          const double dupre = leak * du[i] + dz[i];
          const double dsi = slope[i] * dupre;
          du[i] = cfg.detach_reset ? dupre : dupre - th * dsi;
          ds[i] = dsi;
          dcount[i] += dsi;
        }
        ops.tangent += (cfg.detach_reset ? 3 : 4) * m;
      }

      for (std::size_t i = 0; i < m; ++i) {
        const double si = cfg.spike_mode == SpikeMode::Heaviside
                              ? snn::heaviside(x[i])
                              : snn::smooth_spike(x[i], net.surrogate.sigma);
        u[l][i] -= si * th;
        s[l][i] = si;
        count[l][i] += si;
      }
      ops.forward += 2 * m;
      if (tape) {
        std::copy_n(s[l].begin(), m, tape->spikes[l].begin() + static_cast<std::ptrdiff_t>(t * m));
        std::copy_n(slope.begin(), m, tape->slopes[l].begin() + static_cast<std::ptrdiff_t>(t * m));
      }
    }
  }

  const double inv_steps = 1.0 / static_cast<double>(steps);
  NetActivity act;
  act.rates.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    act.rates[l] = count[l];
    for (double& r : act.rates[l]) r *= inv_steps;
    ops.forward += count[l].size();
  }
  act.output.resize(net.output_size());
  net.readout.apply(act.rates.back(), act.output);
  ops.forward += affine_cost(net.readout);

  if (tan) {
    const std::size_t p = net.output_size();
    tan->live.assign(ch.size(), false);
    tan->output.assign(ch.size(), {});
    tan->rates.assign(ch.size(), {});
    for (std::size_t c = 0; c < ch.size(); ++c) {
      auto& st = ch[c];
      const bool top_live = st.live[depth - 1];
      tan->rates[c].resize(depth);
      for (std::size_t l = 0; l < depth; ++l) {
        if (!st.live[l]) continue;
        tan->rates[c][l] = st.dcount[l];
        for (double& r : tan->rates[c][l]) r *= inv_steps;
        ops.tangent += st.dcount[l].size();
      }
      if (!top_live && !st.active[depth]) continue;
      tan->live[c] = true;
      auto& dy = tan->output[c];
      dy.assign(p, 0.0);
      if (st.active[depth]) {
        const double* tw = tangents[c].data() + ranges[depth].offset;
        std::copy(tw + net.readout.weights.size(), tw + net.readout.param_count(), dy.begin());
        accumulate_matvec(net.readout, tw, act.rates.back().data(), dy.data());
        ops.tangent += affine_cost(net.readout);
      }
      if (top_live) {
        accumulate_matvec(net.readout, net.readout.weights.data(), tan->rates[c][depth - 1].data(),
                          dy.data());
        ops.tangent += affine_cost(net.readout);
      }
    }
  }
  return act;
}

}  // namespace

NetActivity forward_pass(const SpikingMLP& net, std::span<const double> input,
                         const SurrogateStream& stream, NetTape* tape, OpTally& ops) {
  return simulate(net, input, stream, tape, {}, nullptr, ops);
}

NetActivity tangent_pass(const SpikingMLP& net, std::span<const double> input,
                         const SurrogateStream& stream,
                         std::span<const std::span<const double>> tangents, NetTangents& out,
                         OpTally& ops) {
  return simulate(net, input, stream, nullptr, tangents, &out, ops);
}

void backward_pass(const SpikingMLP& net, std::span<const double> input, const NetTape& tape,
                   const NetActivity& activity, std::span<const double> output_cotangent,
                   std::span<const std::vector<double>> rate_cotangents, std::span<double> grad,
                   OpTally& ops) {
  const std::size_t depth = net.depth();
  const auto steps = static_cast<std::size_t>(net.neuron.time_steps);
  if (grad.size() != net.param_count()) {
    throw DimensionError(fmt::format("gradient buffer has {} entries, network has {}",
                                     grad.size(), net.param_count()));
  }
  if (output_cotangent.size() != net.output_size()) {
    throw DimensionError("output cotangent does not match network output width");
  }
  if (!rate_cotangents.empty() && rate_cotangents.size() != depth) {
    throw DimensionError("rate cotangents must cover every spiking layer");
  }
  if (tape.spikes.size() != depth) throw DimensionError("tape does not match network depth");

  const auto ranges = net.layer_ranges();
  const double th = net.neuron.threshold;
  const double leak = net.neuron.leak;
  const bool detach = net.neuron.detach_reset;
  const double inv_steps = 1.0 / static_cast<double>(steps);

  // Readout.
  const LayerParams& ro = net.readout;
  double* g_ro = grad.data() + ranges[depth].offset;
  accumulate_outer(ro, output_cotangent.data(), activity.rates.back().data(), g_ro);
  for (std::size_t i = 0; i < ro.fan_out; ++i) g_ro[ro.weights.size() + i] += output_cotangent[i];
  std::vector<double> g_rate(ro.fan_in, 0.0);
  accumulate_matvec_t(ro, output_cotangent.data(), g_rate.data());
  ops.backward += 2 * affine_cost(ro) + ro.fan_out;

  // Cotangent of the spikes of the layer being processed, per step.
  std::vector<double> g_spikes;  // [step * width]
  std::vector<double> g_below;   // for layer l-1

  for (std::size_t l = depth; l-- > 0;) {
    const LayerParams& layer = net.spiking_layers[l];
    const std::size_t m = layer.fan_out;
    const std::size_t n = layer.fan_in;

    // Step-independent part: rate-based terms, spread uniformly over time.
    std::vector<double> g_const(m, 0.0);
    if (l + 1 == depth) {
      for (std::size_t i = 0; i < m; ++i) g_const[i] += g_rate[i];
    }
    if (!rate_cotangents.empty() && !rate_cotangents[l].empty()) {
      for (std::size_t i = 0; i < m; ++i) g_const[i] += rate_cotangents[l][i];
    }
    for (double& v : g_const) v *= inv_steps;
    ops.backward += m;

    double* g_layer = grad.data() + ranges[l].offset;
    double* g_bias = g_layer + layer.weights.size();
    if (l > 0) g_below.assign(steps * n, 0.0);
    std::vector<double> gz_sum(m, 0.0), g_upost(m, 0.0), gz(m);

    const auto& slopes_l = tape.slopes[l];
    for (std::size_t t = steps; t-- > 0;) {
      const double* f = slopes_l.data() + t * m;
      for (std::size_t i = 0; i < m; ++i) {
        double gs = g_const[i];
        if (l + 1 < depth) gs += g_spikes[t * m + i];
        const double gu = g_upost[i];
        const double gupre = detach ? gu + f[i] * gs : gu + f[i] * (gs - th * gu);
        gz[i] = gupre;
        g_upost[i] = leak * gupre;
      }
      ops.backward += (l + 1 < depth ? 1 : 0) * m + (detach ? 1 : 2) * m + m;
      if (l == 0) {
        for (std::size_t i = 0; i < m; ++i) gz_sum[i] += gz[i];
        ops.backward += m;
      } else {
        const double* s_prev = tape.spikes[l - 1].data() + t * n;
        accumulate_outer(layer, gz.data(), s_prev, g_layer);
        for (std::size_t i = 0; i < m; ++i) g_bias[i] += gz[i];
        accumulate_matvec_t(layer, gz.data(), g_below.data() + t * n);
        ops.backward += 2 * affine_cost(layer) + m;
      }
    }
    if (l == 0) {
      accumulate_outer(layer, gz_sum.data(), input.data(), g_layer);
      for (std::size_t i = 0; i < m; ++i) g_bias[i] += gz_sum[i];
      ops.backward += affine_cost(layer) + m;
    } else {
      g_spikes.swap(g_below);
    }
  }
}

}  // namespace rfgsnn::grad
