#include "rfgsnn/opnet/separable_objective.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "rfgsnn/parallel.hpp"

namespace rfgsnn::opnet {

using grad::NetActivity;
using grad::NetTangents;
using grad::NetTape;
using grad::OpTally;

std::size_t SeparableData::grid_size() const {
  std::size_t q = 1;
  for (const auto& a : axes) q *= a.size();
  return q;
}

std::vector<std::size_t> SeparableData::axis_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& a : axes) sizes.push_back(a.size());
  return sizes;
}

void SeparableData::validate(const SeparableModel& model) const {
  if (inputs.empty()) throw DimensionError("dataset has no records");
  if (axes.size() != model.trunks.size()) {
    throw DimensionError(fmt::format("dataset has {} query axes, model has {} trunks",
                                     axes.size(), model.trunks.size()));
  }
  for (const auto& in : inputs) {
    if (in.size() != model.branch.input_size()) {
      throw DimensionError(fmt::format("record has {} inputs, branch expects {}", in.size(),
                                       model.branch.input_size()));
    }
  }
  for (std::size_t k = 0; k < axes.size(); ++k) {
    if (axes[k].empty()) throw DimensionError(fmt::format("query axis {} is empty", k));
    for (const auto& y : axes[k]) {
      if (y.size() != model.trunks[k].input_size()) {
        throw DimensionError(fmt::format("axis {} point has {} coordinates, trunk expects {}", k,
                                         y.size(), model.trunks[k].input_size()));
      }
    }
  }
  if (targets.size() != inputs.size() * grid_size()) {
    throw DimensionError(fmt::format("expected {} targets ({} records x {} points), got {}",
                                     inputs.size() * grid_size(), inputs.size(), grid_size(),
                                     targets.size()));
  }
}

namespace {

struct Features {
  std::vector<double> branch;               // [record][r]
  std::vector<std::vector<double>> trunks;  // [trunk][point][r]
};

Features zeros_like(const Features& f) {
  Features z;
  z.branch.assign(f.branch.size(), 0.0);
  for (const auto& t : f.trunks) z.trunks.emplace_back(t.size(), 0.0);
  return z;
}

// Evaluates sum_i b_i prod_n t_{i,n} on the tensor grid for every record.
// Returns the mean squared error when targets are given; fills predictions
// and feature cotangents of that mean when requested.
double run_head(const Features& f, std::size_t r, std::span<const std::size_t> sizes,
                std::span<const double* const> targets, double* preds, Features* grad,
                std::uint64_t& fwd_ops, std::uint64_t& bwd_ops) {
  const std::size_t records = f.branch.size() / r;
  const std::size_t d = sizes.size();
  std::size_t grid = 1;
  for (std::size_t s : sizes) grid *= s;
  const double norm = 1.0 / static_cast<double>(records * grid);
  const bool scored = !targets.empty();
  double loss = 0.0;

  if (d == 0) {
    for (std::size_t b = 0; b < records; ++b) {
      const double* bf = f.branch.data() + b * r;
      double pred = 0.0;
      for (std::size_t i = 0; i < r; ++i) pred += bf[i];
      if (preds) preds[b] = pred;
      if (!scored) continue;
      const double res = pred - targets[b][0];
      loss += res * res;
      if (grad) {
        const double g = 2.0 * res * norm;
        double* gb = grad->branch.data() + b * r;
        for (std::size_t i = 0; i < r; ++i) gb[i] += g;
      }
    }
    fwd_ops += records * (r + 2);
    if (grad) bwd_ops += records * (r + 1);
    return loss * norm;
  }

  const std::size_t last = sizes[d - 1];
  const std::size_t outer = grid / last;
  std::vector<std::size_t> idx(d - 1, 0);
  std::vector<double> pre(r), w(r), gpre(r), others(r);
  const double* tl = f.trunks[d - 1].data();

  for (std::size_t o = 0; o < outer; ++o) {
    std::fill(pre.begin(), pre.end(), 1.0);
    for (std::size_t k = 0; k + 1 < d; ++k) {
      const double* row = f.trunks[k].data() + idx[k] * r;
      for (std::size_t i = 0; i < r; ++i) pre[i] *= row[i];
    }
    fwd_ops += (d - 1) * r;
    for (std::size_t b = 0; b < records; ++b) {
      const double* bf = f.branch.data() + b * r;
      for (std::size_t i = 0; i < r; ++i) w[i] = bf[i] * pre[i];
      if (grad) std::fill(gpre.begin(), gpre.end(), 0.0);
      for (std::size_t j = 0; j < last; ++j) {
        const double* trow = tl + j * r;
        double pred = 0.0;
        for (std::size_t i = 0; i < r; ++i) pred += w[i] * trow[i];
        const std::size_t q = o * last + j;
        if (preds) preds[b * grid + q] = pred;
        if (!scored) continue;
        const double res = pred - targets[b][q];
        loss += res * res;
        if (grad) {
          const double g = 2.0 * res * norm;
          double* gb = grad->branch.data() + b * r;
          double* gt = grad->trunks[d - 1].data() + j * r;
          for (std::size_t i = 0; i < r; ++i) {
            gb[i] += g * pre[i] * trow[i];
            gt[i] += g * w[i];
            gpre[i] += g * bf[i] * trow[i];
          }
        }
      }
      fwd_ops += r + last * (r + 2);
      if (grad) bwd_ops += last * (3 * r + 1);
      if (grad && d > 1) {
        for (std::size_t k = 0; k + 1 < d; ++k) {
          std::copy(gpre.begin(), gpre.end(), others.begin());
          for (std::size_t k2 = 0; k2 + 1 < d; ++k2) {
            if (k2 == k) continue;
            const double* row = f.trunks[k2].data() + idx[k2] * r;
            for (std::size_t i = 0; i < r; ++i) others[i] *= row[i];
          }
          double* gt = grad->trunks[k].data() + idx[k] * r;
          for (std::size_t i = 0; i < r; ++i) gt[i] += others[i];
        }
        bwd_ops += (d - 1) * (d - 1) * r;
      }
    }
    for (std::size_t k = d - 1; k-- > 0;) {
      if (++idx[k] < sizes[k]) break;
      idx[k] = 0;
    }
  }
  return loss * norm;
}

}  // namespace

SeparableObjective::SeparableObjective(SeparableModel model, const SeparableData& data,
                                       unsigned threads)
    : model_(std::move(model)), data_(&data), threads_(std::max(1U, threads)) {
  model_.validate();
  data.validate(model_);
  std::size_t offset = 0;
  const std::size_t nets = 1 + model_.trunks.size();
  for (std::size_t k = 0; k < nets; ++k) {
    const auto& nk = net(k);
    const std::string prefix = k == 0 ? "branch" : fmt::format("trunk{}", k - 1);
    net_offset_.push_back(offset);
    const auto ranges = nk.layer_ranges();
    for (std::size_t l = 0; l < ranges.size(); ++l) {
      const std::string name = l + 1 == ranges.size() ? prefix + ".readout"
                                                      : fmt::format("{}.layer{}", prefix, l);
      layout_.slices.push_back({offset + ranges[l].offset, ranges[l].size, name});
    }
    offset += nk.param_count();
  }
  if (model_.local) {
    const auto& proj = model_.local->projections;
    proj_offset_.resize(proj.size());
    for (std::size_t n = 0; n < proj.size(); ++n) {
      for (std::size_t k = 0; k < proj[n].size(); ++k) {
        proj_offset_[n].push_back(offset);
        layout_.slices.push_back({offset, proj[n][k].param_count(),
                                  fmt::format("local{}.{}", n, k == 0 ? std::string("branch")
                                                                      : fmt::format("trunk{}", k - 1))});
        offset += proj[n][k].param_count();
      }
    }
  }
  layout_.validate();
}

std::vector<SeparableObjective::Eval> SeparableObjective::plan(grad::Batch batch) const {
  std::vector<Eval> evals;
  evals.reserve(batch.size());
  for (std::size_t rec : batch) {
    if (rec >= data_->records()) {
      throw DimensionError(fmt::format("record {} out of range ({} records)", rec,
                                       data_->records()));
    }
    evals.push_back({0, &data_->inputs[rec]});
  }
  for (std::size_t k = 0; k < data_->axes.size(); ++k) {
    for (const auto& y : data_->axes[k]) evals.push_back({k + 1, &y});
  }
  return evals;
}

namespace {

// Features of one loss level: level 0 reads network outputs, level n + 1 the
// projected rates of spiking layer n.
Features collect_features(const SeparableModel& model, std::size_t level, std::size_t batch,
                          std::span<const std::size_t> sizes, std::span<const NetActivity> acts,
                          std::uint64_t& ops) {
  const std::size_t r = model.features();
  Features f;
  f.branch.resize(batch * r);
  f.trunks.resize(sizes.size());
  std::size_t e = 0;
  auto emit = [&](std::size_t k, double* dst) {
    const auto& act = acts[e++];
    if (level == 0) {
      std::copy(act.output.begin(), act.output.end(), dst);
    } else {
      const auto& p = model.local->projections[level - 1][k];
      p.apply(act.rates[level - 1], std::span<double>(dst, r));
      ops += p.fan_in * p.fan_out;
    }
  };
  for (std::size_t b = 0; b < batch; ++b) emit(0, f.branch.data() + b * r);
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    f.trunks[k].resize(sizes[k] * r);
    for (std::size_t i = 0; i < sizes[k]; ++i) emit(k + 1, f.trunks[k].data() + i * r);
  }
  return f;
}

const double* feature_row(const Features& f, std::size_t batch, std::span<const std::size_t> sizes,
                          std::size_t e, std::size_t r) {
  if (e < batch) return f.branch.data() + e * r;
  e -= batch;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (e < sizes[k]) return f.trunks[k].data() + e * r;
    e -= sizes[k];
  }
  return nullptr;
}

}  // namespace

double SeparableObjective::loss(grad::Batch batch, OpTally& ops) const {
  if (batch.empty()) throw ConfigError("loss requested for an empty batch");
  const auto evals = plan(batch);
  std::vector<NetActivity> acts(evals.size());
  std::vector<OpTally> eops(evals.size());
  parallel_for(evals.size(), threads_, [&](std::size_t e) {
    acts[e] = grad::forward_pass(net(evals[e].net), *evals[e].input, {}, nullptr, eops[e]);
  });
  for (const auto& o : eops) ops += o;

  const auto sizes = data_->axis_sizes();
  const std::size_t grid = data_->grid_size();
  std::vector<const double*> rows;
  for (std::size_t rec : batch) rows.push_back(data_->targets.data() + rec * grid);
  const std::size_t levels = 1 + (model_.local ? model_.local->levels() : 0);
  double total = 0.0;
  std::uint64_t unused = 0;
  for (std::size_t lvl = 0; lvl < levels; ++lvl) {
    const auto f = collect_features(model_, lvl, batch.size(), sizes, acts, ops.forward);
    const double l = run_head(f, model_.features(), sizes, rows, nullptr, nullptr, ops.forward,
                              unused);
    total += lvl == 0 ? l : model_.local->weight * l / static_cast<double>(levels - 1);
  }
  return total;
}

double SeparableObjective::loss_and_gradient(grad::Batch batch, std::uint64_t pass_seed,
                                             std::span<double> grad, OpTally& ops) const {
  if (batch.empty()) throw ConfigError("gradient requested for an empty batch");
  if (grad.size() != layout_.total()) {
    throw DimensionError(fmt::format("gradient buffer has {} entries, objective has {}",
                                     grad.size(), layout_.total()));
  }
  const auto evals = plan(batch);
  const std::size_t n_evals = evals.size();
  std::vector<NetActivity> acts(n_evals);
  std::vector<NetTape> tapes(n_evals);
  std::vector<OpTally> eops(n_evals);
  parallel_for(n_evals, threads_, [&](std::size_t e) {
    const auto k = static_cast<std::uint32_t>(evals[e].net);
    acts[e] = grad::forward_pass(net(k), *evals[e].input, {pass_seed, e, k}, &tapes[e], eops[e]);
  });

  const auto sizes = data_->axis_sizes();
  const std::size_t grid = data_->grid_size();
  const std::size_t r = model_.features();
  std::vector<const double*> rows;
  for (std::size_t rec : batch) rows.push_back(data_->targets.data() + rec * grid);
  const std::size_t levels = 1 + (model_.local ? model_.local->levels() : 0);

  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<std::vector<double>> g_out(n_evals);
  std::vector<std::vector<std::vector<double>>> g_rates(n_evals);
  double total = 0.0;
  for (std::size_t lvl = 0; lvl < levels; ++lvl) {
    const auto f = collect_features(model_, lvl, batch.size(), sizes, acts, ops.forward);
    auto g = zeros_like(f);
    const double l = run_head(f, r, sizes, rows, nullptr, &g, ops.forward, ops.backward);
    const double scale =
        lvl == 0 ? 1.0 : model_.local->weight / static_cast<double>(levels - 1);
    total += scale * l;
    for (std::size_t e = 0; e < n_evals; ++e) {
      const double* ge = feature_row(g, batch.size(), sizes, e, r);
      if (lvl == 0) {
        g_out[e].assign(ge, ge + r);
        continue;
      }
      const std::size_t n = lvl - 1;
      const std::size_t k = evals[e].net;
      const auto& p = model_.local->projections[n][k];
      const auto& rate = acts[e].rates[n];
      std::vector<double> gs(ge, ge + r);
      for (double& v : gs) v *= scale;
      double* gp = grad.data() + proj_offset_[n][k];
      for (std::size_t i = 0; i < p.fan_out; ++i) {
        for (std::size_t j = 0; j < p.fan_in; ++j) gp[i * p.fan_in + j] += gs[i] * rate[j];
        gp[p.weights.size() + i] += gs[i];
      }
      auto& gr = g_rates[e];
      if (gr.empty()) gr.resize(net(k).depth());
      if (gr[n].empty()) gr[n].assign(p.fan_in, 0.0);
      for (std::size_t i = 0; i < p.fan_out; ++i) {
        for (std::size_t j = 0; j < p.fan_in; ++j) gr[n][j] += p.weight(i, j) * gs[i];
      }
      ops.backward += 2 * p.fan_in * p.fan_out + 2 * r;
    }
  }

  std::vector<std::vector<double>> bufs(n_evals);
  parallel_for(n_evals, threads_, [&](std::size_t e) {
    const auto& nk = net(evals[e].net);
    bufs[e].assign(nk.param_count(), 0.0);
    grad::backward_pass(nk, *evals[e].input, tapes[e], acts[e], g_out[e], g_rates[e], bufs[e],
                        eops[e]);
  });
  for (std::size_t e = 0; e < n_evals; ++e) {
    double* dst = grad.data() + net_offset_[evals[e].net];
    for (std::size_t i = 0; i < bufs[e].size(); ++i) dst[i] += bufs[e][i];
    ops += eops[e];
  }
  return total;
}

double SeparableObjective::loss_and_jvp(grad::Batch batch, std::uint64_t pass_seed,
                                        std::span<const std::span<const double>> tangents,
                                        std::span<double> jvps, OpTally& ops) const {
  if (batch.empty()) throw ConfigError("jvp requested for an empty batch");
  if (jvps.size() != tangents.size()) throw DimensionError("one jvp slot per tangent expected");
  const std::size_t n_params = layout_.total();
  for (std::size_t c = 0; c < tangents.size(); ++c) {
    if (tangents[c].size() != n_params) {
      throw DimensionError(fmt::format("tangent {} has {} entries, objective has {}", c,
                                       tangents[c].size(), n_params));
    }
  }
  const std::size_t n_nets = 1 + model_.trunks.size();
  const std::size_t channels = tangents.size();
  auto nonzero = [](std::span<const double> s) {
    return std::any_of(s.begin(), s.end(), [](double v) { return v != 0.0; });
  };
  // Net-local views; empty where a channel does not touch the net.
  std::vector<std::vector<std::span<const double>>> views(n_nets);
  for (std::size_t k = 0; k < n_nets; ++k) {
    for (std::size_t c = 0; c < channels; ++c) {
      auto sub = tangents[c].subspan(net_offset_[k], net(k).param_count());
      views[k].push_back(nonzero(sub) ? sub : std::span<const double>());
    }
  }

  const auto evals = plan(batch);
  const std::size_t n_evals = evals.size();
  std::vector<NetActivity> acts(n_evals);
  std::vector<NetTangents> tans(n_evals);
  std::vector<OpTally> eops(n_evals);
  parallel_for(n_evals, threads_, [&](std::size_t e) {
    const auto k = static_cast<std::uint32_t>(evals[e].net);
    acts[e] = grad::tangent_pass(net(k), *evals[e].input, {pass_seed, e, k}, views[k], tans[e],
                                 eops[e]);
  });
  for (const auto& o : eops) ops += o;

  const auto sizes = data_->axis_sizes();
  const std::size_t grid = data_->grid_size();
  const std::size_t r = model_.features();
  std::vector<const double*> rows;
  for (std::size_t rec : batch) rows.push_back(data_->targets.data() + rec * grid);
  const std::size_t levels = 1 + (model_.local ? model_.local->levels() : 0);

  std::fill(jvps.begin(), jvps.end(), 0.0);
  double total = 0.0;
  std::vector<double> dfeat(r);
  for (std::size_t lvl = 0; lvl < levels; ++lvl) {
    const auto f = collect_features(model_, lvl, batch.size(), sizes, acts, ops.forward);
    // Directional derivative of the head is <dL/dfeatures, feature tangent>.
    auto g = zeros_like(f);
    const double l = run_head(f, r, sizes, rows, nullptr, &g, ops.forward, ops.tangent);
    const double scale =
        lvl == 0 ? 1.0 : model_.local->weight / static_cast<double>(levels - 1);
    total += scale * l;
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::size_t e = 0; e < n_evals; ++e) {
        const double* ge = feature_row(g, batch.size(), sizes, e, r);
        const auto& tn = tans[e];
        if (lvl == 0) {
          if (!tn.live[c]) continue;
          for (std::size_t i = 0; i < r; ++i) acc += ge[i] * tn.output[c][i];
          ops.tangent += r;
          continue;
        }
        const std::size_t n = lvl - 1;
        const std::size_t k = evals[e].net;
        const auto& p = model_.local->projections[n][k];
        const auto ptan = tangents[c].subspan(proj_offset_[n][k], p.param_count());
        const bool param_live = nonzero(ptan);
        const bool rate_live = !tn.rates[c][n].empty();
        if (!param_live && !rate_live) continue;
        std::fill(dfeat.begin(), dfeat.end(), 0.0);
        if (param_live) {
          for (std::size_t i = 0; i < r; ++i) {
            double v = ptan[p.weights.size() + i];
            for (std::size_t j = 0; j < p.fan_in; ++j) {
              v += ptan[i * p.fan_in + j] * acts[e].rates[n][j];
            }
            dfeat[i] = v;
          }
          ops.tangent += p.fan_in * p.fan_out;
        }
        if (rate_live) {
          const auto& dr = tn.rates[c][n];
          for (std::size_t i = 0; i < r; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < p.fan_in; ++j) v += p.weight(i, j) * dr[j];
            dfeat[i] += v;
          }
          ops.tangent += p.fan_in * p.fan_out;
        }
        for (std::size_t i = 0; i < r; ++i) acc += ge[i] * dfeat[i];
        ops.tangent += r;
      }
      jvps[c] += scale * acc;
    }
  }
  return total;
}

std::vector<double> SeparableObjective::predict(std::span<const std::size_t> records) const {
  if (records.empty()) return {};
  const auto evals = plan(records);
  std::vector<NetActivity> acts(evals.size());
  std::vector<OpTally> eops(evals.size());
  parallel_for(evals.size(), threads_, [&](std::size_t e) {
    acts[e] = grad::forward_pass(net(evals[e].net), *evals[e].input, {}, nullptr, eops[e]);
  });
  const auto sizes = data_->axis_sizes();
  std::vector<double> preds(records.size() * data_->grid_size());
  std::uint64_t f_ops = 0, b_ops = 0;
  const auto f = collect_features(model_, 0, records.size(), sizes, acts, f_ops);
  run_head(f, model_.features(), sizes, {}, preds.data(), nullptr, f_ops, b_ops);
  return preds;
}

}  // namespace rfgsnn::opnet
