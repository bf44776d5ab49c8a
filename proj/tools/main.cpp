// Command-line entry point: dataset generation, training, evaluation and
// method-combination sweeps.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "rfgsnn/data/datasets.hpp"
#include "rfgsnn/harness/config.hpp"
#include "rfgsnn/harness/run_matrix.hpp"
#include "rfgsnn/harness/trainer.hpp"

namespace fs = std::filesystem;
using namespace rfgsnn;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

void write_checkpoint(const fs::path& out, const harness::TrainingDiverged& e) {
  fs::create_directories(out);
  nlohmann::json j;
  j["error"] = e.what();
  j["epoch"] = e.epoch;
  j["parameters"] = e.parameters;
  std::ofstream(out / "checkpoint.json") << j.dump(1) << "\n";
}

int gen_data(const std::string& task, const fs::path& out, std::uint64_t seed) {
  data::DataConfig cfg;
  cfg.seed = seed;
  const auto ds = data::build_dataset(data::parse_task(task), cfg);
  data::write_dataset(ds, out);
  fmt::print("{}: {} records ({} train, {} test) -> {}\n", task, ds.records(), ds.train.size(),
             ds.test.size(), out.string());
  return 0;
}

int train(const fs::path& config, const fs::path& data_dir, const fs::path& out,
          unsigned threads, bool verbose) {
  const auto cfg = harness::load_config(config);
  const auto ds = data::read_dataset(data_dir);
  if (cfg.task != ds.task)
    throw ConfigError(fmt::format("config task {} does not match dataset task {}",
                                  data::task_name(cfg.task), data::task_name(ds.task)));
  harness::TrainOptions opts;
  opts.threads = threads;
  if (verbose)
    opts.on_epoch = [](std::size_t epoch, double loss) {
      fmt::print(stderr, "epoch {} loss {:.6g}\n", epoch, loss);
    };
  try {
    auto [trained, metrics] = harness::train(cfg, ds, opts);
    const auto eval = harness::evaluate(trained.model, ds, threads);
    harness::write_run(out, trained, metrics, ds, eval);
    fmt::print("{} test_rel_l2 {:.6g} train_loss {:.6g} wall {:.1f}s\n", cfg.name(),
               metrics.relative_l2, metrics.train_loss_final, metrics.wall_time);
  } catch (const harness::TrainingDiverged& e) {
    write_checkpoint(out, e);
    throw;
  }
  return 0;
}

int eval(const fs::path& model_dir, const fs::path& data_dir, unsigned threads) {
  const auto ds = data::read_dataset(data_dir);
  const auto trained = harness::load_model(model_dir, ds);
  const auto e = harness::evaluate(trained.model, ds, threads);
  fmt::print("{} test_rel_l2 {:.17g}\n", trained.config.name(), e.relative_l2);
  return 0;
}

int run_matrix(const fs::path& configs, const fs::path& out, unsigned threads) {
  const auto spec = harness::load_matrix(configs);
  data::Dataset ds;
  if (spec.data) {
    ds = data::read_dataset(*spec.data);
  } else {
    data::DataConfig dc;
    dc.seed = spec.data_seed;
    ds = data::build_dataset(spec.runs.front().task, dc);
    data::write_dataset(ds, out / "data");
  }
  const auto rows = harness::run_matrix(spec.runs, ds, out, threads);
  int failed = 0;
  for (const auto& r : rows) {
    if (r.error.empty())
      fmt::print("{:<12} {:.6g}\n", r.config.name(), r.metrics.relative_l2);
    else
      fmt::print("{:<12} failed: {}\n", r.config.name(), r.error), ++failed;
  }
  return failed == 0 ? 0 : kNumericalError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network training with forward-mode and reverse-mode gradients"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads for batch evaluation")
      ->check(CLI::PositiveNumber);

  std::string task;
  fs::path out, config, data_dir, model_dir;
  std::uint64_t seed = 0;
  bool verbose = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a dataset directory");
  gen->add_option("--task", task, "mexican_hat, poisson1d or diffusion_reaction")->required();
  gen->add_option("--out", out)->required();
  gen->add_option("--seed", seed);

  auto* tr = app.add_subcommand("train", "Train one configuration");
  tr->add_option("--config", config)->required()->check(CLI::ExistingFile);
  tr->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out)->required();
  tr->add_flag("-v,--verbose", verbose, "Print the loss after every epoch");

  auto* ev = app.add_subcommand("eval", "Evaluate a trained run on the test split");
  ev->add_option("--model", model_dir)->required()->check(CLI::ExistingDirectory);
  ev->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);

  auto* mx = app.add_subcommand("run-matrix", "Run every combination of a matrix file");
  mx->add_option("--configs", config)->required()->check(CLI::ExistingFile);
  mx->add_option("--out", out)->required();

  for (auto* sub : {gen, tr, ev, mx})
    sub->add_option("--threads", threads)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*gen) return gen_data(task, out, seed);
    if (*tr) return train(config, data_dir, out, threads, verbose);
    if (*ev) return eval(model_dir, data_dir, threads);
    if (*mx) return run_matrix(config, out, threads);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical failure: {}\n", e.what());
    return kNumericalError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
