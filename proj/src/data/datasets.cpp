#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "rfgsnn/data/datasets.hpp"
#include "rfgsnn/rng.hpp"

namespace rfgsnn::data {

std::string_view task_name(Task task) {
  switch (task) {
    case Task::MexicanHat: return "mexican_hat";
    case Task::Poisson1d: return "poisson1d";
    case Task::DiffusionReaction: return "diffusion_reaction";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  for (Task t : {Task::MexicanHat, Task::Poisson1d, Task::DiffusionReaction})
    if (task_name(t) == name) return t;
  throw ConfigError(fmt::format("unknown task '{}'", name));
}

void DataConfig::validate() const {
  if (sensors < 2) throw ConfigError("data: need at least 2 sensors");
  if (mh_train == 0 || mh_test_side < 2) throw ConfigError("data: empty mexican hat split");
  if (!(mh_sigma > 0.0)) throw ConfigError("data: mexican hat sigma must be positive");
  if (poisson_train == 0 || poisson_train >= poisson_functions)
    throw ConfigError("data: poisson split must leave both sides nonempty");
  if (poisson_points < 5) throw ConfigError("data: poisson grid needs at least 3 interior points");
  if (dr_train == 0 || dr_train >= dr_functions)
    throw ConfigError("data: diffusion-reaction split must leave both sides nonempty");
  if (dr_diffusion < 0.0) throw ConfigError("data: diffusion must be non-negative");
  dr_grid.validate();
}

std::size_t Dataset::grid_size() const {
  std::size_t q = 1;
  for (const auto& a : axes) q *= a.size();
  return q;
}

void Dataset::validate() const {
  if (inputs.empty()) throw DimensionError("dataset: no records");
  for (const auto& in : inputs)
    if (in.size() != input_size()) throw DimensionError("dataset: ragged inputs");
  if (targets.size() != records() * grid_size())
    throw DimensionError(fmt::format("dataset: {} targets for {} records x {} points",
                                     targets.size(), records(), grid_size()));
  std::vector<std::size_t> all(train);
  all.insert(all.end(), test.begin(), test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i] != i || all.size() != records())
      throw DimensionError("dataset: split is not a partition of the records");
}

namespace {

// Sorted union of two grids, merging points closer than 1e-12.
std::vector<double> merge_grids(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (double v : all)
    if (out.empty() || v - out.back() > 1e-12) out.push_back(v);
  return out;
}

std::vector<double> pick(const std::vector<double>& union_grid, const std::vector<double>& values,
                         const std::vector<double>& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (double p : points) {
    auto it = std::lower_bound(union_grid.begin(), union_grid.end(), p - 1e-12);
    out.push_back(values[static_cast<std::size_t>(it - union_grid.begin())]);
  }
  return out;
}

void random_split(Dataset& ds, std::size_t n_train, std::uint64_t seed) {
  std::vector<std::size_t> perm(ds.records());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(mix_seed({seed, 2}));
  std::shuffle(perm.begin(), perm.end(), rng);
  ds.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(ds.train.begin(), ds.train.end());
  std::sort(ds.test.begin(), ds.test.end());
}

Dataset mexican_hat_data(const DataConfig& cfg) {
  Dataset ds;
  std::mt19937_64 rng(mix_seed({cfg.seed, 1}));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (std::size_t i = 0; i < cfg.mh_train; ++i) {
    const double x = unif(rng);
    const double y = unif(rng);
    ds.inputs.push_back({x, y});
    ds.targets.push_back(mexican_hat(x, y, cfg.mh_sigma));
    ds.train.push_back(i);
  }
  const auto side = linspace(-1.0, 1.0, cfg.mh_test_side);
  for (double x : side)
    for (double y : side) {
      ds.test.push_back(ds.inputs.size());
      ds.inputs.push_back({x, y});
      ds.targets.push_back(mexican_hat(x, y, cfg.mh_sigma));
    }
  return ds;
}

Dataset poisson_data(const DataConfig& cfg) {
  Dataset ds;
  const auto xs = linspace(-1.0, 1.0, cfg.poisson_points);
  ds.sensors = linspace(-1.0, 1.0, cfg.sensors);
  ds.axes = {xs};
  const auto grid = merge_grids(xs, ds.sensors);
  GrfSampler sampler(GrfSpec{grid, cfg.poisson_length_scale, Kernel::Gaussian, 1.0, cfg.seed});
  std::mt19937_64 rng(mix_seed({cfg.seed, 1}));
  for (std::size_t k = 0; k < cfg.poisson_functions; ++k) {
    const auto g = sampler.sample(rng);
    const auto u = poisson_solve_1d(pick(grid, g, xs), -1.0, 1.0);
    ds.inputs.push_back(pick(grid, g, ds.sensors));
    ds.targets.insert(ds.targets.end(), u.begin(), u.end());
  }
  random_split(ds, cfg.poisson_train, cfg.seed);
  return ds;
}

Dataset reaction_diffusion_data(const DataConfig& cfg) {
  Dataset ds;
  const auto& pg = cfg.dr_grid;
  const auto xs = pg.xs();
  ds.sensors = linspace(pg.x0, pg.x1, cfg.sensors);
  ds.axes = {pg.ts(), xs};
  const auto grid = merge_grids(xs, ds.sensors);
  GrfSampler sampler(GrfSpec{grid, cfg.dr_length_scale, Kernel::Gaussian, 1.0, cfg.seed});
  std::mt19937_64 rng(mix_seed({cfg.seed, 1}));
  for (std::size_t k = 0; k < cfg.dr_functions; ++k) {
    const auto f = sampler.sample(rng);
    const auto u = reaction_diffusion_solve(pick(grid, f, xs), cfg.dr_diffusion, cfg.dr_reaction, pg);
    ds.inputs.push_back(pick(grid, f, ds.sensors));
    ds.targets.insert(ds.targets.end(), u.begin(), u.end());
  }
  random_split(ds, cfg.dr_train, cfg.seed);
  return ds;
}

}  // namespace

Dataset build_dataset(Task task, const DataConfig& config) {
  config.validate();
  Dataset ds;
  switch (task) {
    case Task::MexicanHat: ds = mexican_hat_data(config); break;
    case Task::Poisson1d: ds = poisson_data(config); break;
    case Task::DiffusionReaction: ds = reaction_diffusion_data(config); break;
  }
  ds.task = task;
  ds.config = config;
  ds.validate();
  return ds;
}

}  // namespace rfgsnn::data
