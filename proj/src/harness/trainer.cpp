#include "rfgsnn/harness/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "rfgsnn/grad/estimators.hpp"
#include "rfgsnn/grad/optimizer.hpp"
#include "rfgsnn/harness/metrics.hpp"
#include "rfgsnn/rng.hpp"

namespace rfgsnn::harness {

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", p.string()));
  out << text;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read {}", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden,
                                std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

opnet::SeparableModel build_model(const ExperimentConfig& cfg, const data::Dataset& ds) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed({cfg.seed, 10}));
  snn::SurrogateConfig sc;
  sc.kind = cfg.combination.surrogate;
  sc.sigma = cfg.sigma;
  sc.wsg_samples = static_cast<int>(cfg.wsg_samples);
  sc.rng_seed = mix_seed({cfg.seed, 11});

  opnet::SeparableModel model;
  const std::size_t trunks = ds.axes.size();
  const std::size_t out = trunks == 0 ? 1 : cfg.features;
  const auto bw = widths(ds.input_size(), cfg.hidden, out);
  model.branch = snn::SpikingMLP::create(bw, cfg.neuron, sc, rng);
  const auto tw = widths(1, cfg.hidden, out);
  for (std::size_t k = 0; k < trunks; ++k)
    model.trunks.push_back(snn::SpikingMLP::create(tw, cfg.neuron, sc, rng));
  if (cfg.combination.local_loss) model.local = opnet::make_local_loss(model, cfg.local_weight, rng);
  model.validate();
  return model;
}

opnet::SeparableData split_data(const data::Dataset& ds, std::span<const std::size_t> records) {
  opnet::SeparableData out;
  for (const auto& axis : ds.axes) {
    std::vector<std::vector<double>> pts;
    for (double v : axis) pts.push_back({v});
    out.axes.push_back(std::move(pts));
  }
  const std::size_t q = ds.grid_size();
  for (std::size_t r : records) {
    if (r >= ds.records()) throw DimensionError("split references a missing record");
    out.inputs.push_back(ds.inputs[r]);
    out.targets.insert(out.targets.end(), ds.targets.begin() + static_cast<std::ptrdiff_t>(r * q),
                       ds.targets.begin() + static_cast<std::ptrdiff_t>((r + 1) * q));
  }
  return out;
}

std::pair<TrainedModel, Metrics> train(const ExperimentConfig& cfg, const data::Dataset& ds,
                                       const TrainOptions& options) {
  cfg.validate();
  ds.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto train_data = split_data(ds, ds.train);
  opnet::SeparableObjective objective(build_model(cfg, ds), train_data, options.threads);

  Metrics metrics;
  metrics.config_hash = config_hash(cfg);
  std::vector<std::size_t> order(train_data.records());
  std::iota(order.begin(), order.end(), 0);
  {
    grad::OpTally ops;
    metrics.initial_loss = objective.loss(order, ops);
  }
  metrics.train_loss_final = metrics.initial_loss;

  grad::Optimizer optimizer(cfg.optimizer);
  std::mt19937_64 shuffle_rng(mix_seed({cfg.seed, 20}));
  std::mt19937_64 direction_rng(mix_seed({cfg.seed, 21}));
  const auto estimator = cfg.combination.estimator();
  std::vector<double> params = objective.parameters();
  const std::size_t per_epoch = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = per_epoch * cfg.epochs;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const grad::Batch batch(order.data() + start, len);
      const std::uint64_t pass_seed = mix_seed({cfg.seed, 22, metrics.iterations});
      grad::GradientEstimate g;
      try {
        switch (estimator) {
          case grad::Estimator::BP: g = grad::bptt_grad(objective, batch, pass_seed); break;
          case grad::Estimator::RFG_G:
            g = grad::rfg_global(objective, batch, direction_rng, pass_seed);
            break;
          case grad::Estimator::RFG_L:
            g = grad::rfg_layerwise(objective, batch, direction_rng, pass_seed);
            break;
        }
        if (!std::isfinite(g.loss)) throw NumericalError("non-finite training loss");
        optimizer.set_learning_rate(
            grad::scheduled_learning_rate(cfg.optimizer, metrics.iterations, total_steps));
        optimizer.step(params, g.values);
        if (!all_finite(params)) throw NumericalError("non-finite parameters after update");
      } catch (const NumericalError& e) {
        throw TrainingDiverged(fmt::format("{}: epoch {}, iteration {}: {}", cfg.name(), epoch,
                                           metrics.iterations, e.what()),
                               epoch, objective.parameters());
      }
      objective.set_parameters(params);
      metrics.op_counts += g.op_count;
      sum += g.loss;
      ++batches;
      ++metrics.iterations;
    }
    const double mean = sum / static_cast<double>(batches);
    metrics.loss_history.push_back(mean);
    metrics.train_loss_final = mean;
    if (options.on_epoch) options.on_epoch(epoch, mean);
  }

  TrainedModel trained{cfg, objective.model()};
  metrics.relative_l2 = evaluate(trained.model, ds, options.threads).relative_l2;
  metrics.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(trained), std::move(metrics)};
}

Evaluation evaluate(const opnet::SeparableModel& model, const data::Dataset& ds, unsigned threads) {
  if (model.branch.input_size() != ds.input_size() || model.trunks.size() != ds.axes.size())
    throw DimensionError(fmt::format(
        "model expects {} inputs and {} query axes, dataset has {} and {}",
        model.branch.input_size(), model.trunks.size(), ds.input_size(), ds.axes.size()));
  const auto test_data = split_data(ds, ds.test);
  test_data.validate(model);
  opnet::SeparableObjective objective(model, test_data, threads);
  std::vector<std::size_t> all(test_data.records());
  std::iota(all.begin(), all.end(), 0);
  Evaluation e;
  e.predictions = objective.predict(all);
  e.truth = test_data.targets;
  e.relative_l2 = relative_l2(e.predictions, e.truth);
  return e;
}

namespace {

std::string loss_history_csv(const Metrics& m) {
  std::string s = "epoch,loss\n";
  for (std::size_t i = 0; i < m.loss_history.size(); ++i)
    s += fmt::format("{},{}\n", i, num(m.loss_history[i]));
  return s;
}

// Coordinates of grid point j for a dataset's query axes.
std::vector<double> coords_of(const data::Dataset& ds, std::size_t j) {
  std::vector<double> c(ds.axes.size());
  for (std::size_t a = ds.axes.size(); a-- > 0;) {
    c[a] = ds.axes[a][j % ds.axes[a].size()];
    j /= ds.axes[a].size();
  }
  return c;
}

std::string predictions_csv(const data::Dataset& ds, const Evaluation& e) {
  const std::size_t q = ds.grid_size();
  std::string s = "sample_id";
  const std::size_t nin = ds.axes.empty() ? ds.input_size() : ds.axes.size();
  for (std::size_t k = 0; k < nin; ++k) s += fmt::format(",coord{}", k);
  s += ",pred,truth\n";
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    const std::size_t rec = ds.test[i];
    for (std::size_t j = 0; j < q; ++j) {
      s += std::to_string(rec);
      const auto c = ds.axes.empty() ? ds.inputs[rec] : coords_of(ds, j);
      for (double v : c) s += "," + num(v);
      s += fmt::format(",{},{}\n", num(e.predictions[i * q + j]), num(e.truth[i * q + j]));
    }
  }
  return s;
}

// Writes a matrix (rows x cols) of values as CSV without a header: regression
// on a square test grid, or the first test function over its query grid.
void write_grids(const std::filesystem::path& dir, const data::Dataset& ds, const Evaluation& e) {
  std::size_t rows = 0, cols = 0;
  if (ds.axes.empty()) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(double(ds.test.size()))));
    if (side * side != ds.test.size()) return;
    rows = cols = side;
  } else {
    cols = ds.axes.back().size();
    rows = ds.grid_size() / cols;
  }
  std::string pred, err;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t k = r * cols + c;
      const char* sep = c + 1 == cols ? "\n" : ",";
      pred += num(e.predictions[k]) + sep;
      err += num(e.predictions[k] - e.truth[k]) + sep;
    }
  }
  spit(dir / "prediction_grid.csv", pred);
  spit(dir / "error_grid.csv", err);
}

}  // namespace

void write_run(const std::filesystem::path& dir, const TrainedModel& trained,
               const Metrics& metrics, const data::Dataset& ds, const Evaluation& eval) {
  std::filesystem::create_directories(dir);
  spit(dir / "config.ini", render_config(trained.config));

  nlohmann::json model;
  model["input_size"] = trained.model.branch.input_size();
  model["trunks"] = trained.model.trunks.size();
  model["parameters"] = trained.model.flatten();
  spit(dir / "model.json", model.dump(1) + "\n");

  nlohmann::json m;
  m["name"] = trained.config.name();
  m["task"] = std::string(data::task_name(trained.config.task));
  m["seed"] = trained.config.seed;
  m["config_hash"] = metrics.config_hash;
  m["test_rel_l2"] = metrics.relative_l2;
  m["initial_loss"] = metrics.initial_loss;
  m["train_loss_final"] = metrics.train_loss_final;
  m["iterations"] = metrics.iterations;
  m["fwd_ops"] = metrics.op_counts.forward;
  m["bwd_ops"] = metrics.op_counts.backward;
  m["tangent_ops"] = metrics.op_counts.tangent;
  m["wall_s"] = metrics.wall_time;
  m["loss_history"] = metrics.loss_history;
  spit(dir / "metrics.json", m.dump(1) + "\n");

  spit(dir / "loss_history.csv", loss_history_csv(metrics));
  spit(dir / "predictions.csv", predictions_csv(ds, eval));
  spit(dir / "summary.csv", summary_header() + summary_row(trained.config, metrics));
  write_grids(dir, ds, eval);
}

TrainedModel load_model(const std::filesystem::path& dir, const data::Dataset& ds) {
  TrainedModel t;
  t.config = load_config(dir / "config.ini");
  if (t.config.task != ds.task)
    throw DimensionError(fmt::format("model was trained on {}, dataset is {}",
                                     data::task_name(t.config.task), data::task_name(ds.task)));
  t.model = build_model(t.config, ds);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("model.json: {}", e.what()));
  }
  const auto params = j.at("parameters").get<std::vector<double>>();
  if (j.at("input_size").get<std::size_t>() != ds.input_size() || params.size() != t.model.param_count())
    throw DimensionError("model.json does not match the dataset dimensions");
  t.model.assign(params);
  return t;
}

std::string summary_header() {
  return "name,task,test_rel_l2,train_loss_final,fwd_ops,bwd_ops,tangent_ops,wall_s,seed\n";
}

std::string summary_row(const ExperimentConfig& cfg, const Metrics& m) {
  return fmt::format("{},{},{},{},{},{},{},{},{}\n", cfg.name(), data::task_name(cfg.task),
                     num(m.relative_l2), num(m.train_loss_final), m.op_counts.forward,
                     m.op_counts.backward, m.op_counts.tangent, num(m.wall_time), cfg.seed);
}

}  // namespace rfgsnn::harness
