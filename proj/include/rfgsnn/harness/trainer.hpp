#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rfgsnn/data/datasets.hpp"
#include "rfgsnn/harness/config.hpp"
#include "rfgsnn/opnet/operator_models.hpp"
#include "rfgsnn/opnet/separable_objective.hpp"

namespace rfgsnn::harness {

struct Metrics {
  double relative_l2 = 0.0;   // test split
  double initial_loss = 0.0;  // full training set, before the first update
  double train_loss_final = 0.0;
  std::vector<double> loss_history;  // mean minibatch loss per epoch
  grad::OpTally op_counts;           // summed over every training iteration
  std::size_t iterations = 0;
  double wall_time = 0.0;
  std::string config_hash;
};

struct TrainedModel {
  ExperimentConfig config;
  opnet::SeparableModel model;
};

// Thrown when an estimate or loss goes non-finite. Carries the last finite
// parameters so the caller can leave a checkpoint behind.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, std::size_t epoch, std::vector<double> params)
      : NumericalError(what), epoch(epoch), parameters(std::move(params)) {}
  std::size_t epoch;
  std::vector<double> parameters;
};

// Architecture for the task with freshly initialized parameters.
opnet::SeparableModel build_model(const ExperimentConfig& cfg, const data::Dataset& ds);

// Records of one split as objective data.
opnet::SeparableData split_data(const data::Dataset& ds, std::span<const std::size_t> records);

struct TrainOptions {
  unsigned threads = 1;
  // Called after every epoch with (epoch, mean loss).
  std::function<void(std::size_t, double)> on_epoch;
};

std::pair<TrainedModel, Metrics> train(const ExperimentConfig& cfg, const data::Dataset& ds,
                                       const TrainOptions& options = {});

struct Evaluation {
  double relative_l2 = 0.0;
  std::vector<double> predictions;  // test records in order, each over the full grid
  std::vector<double> truth;
};

Evaluation evaluate(const opnet::SeparableModel& model, const data::Dataset& ds,
                    unsigned threads = 1);

// Run directory layout: config.ini, model.json, metrics.json,
// loss_history.csv, predictions.csv, prediction_grid.csv, error_grid.csv.
void write_run(const std::filesystem::path& dir, const TrainedModel& trained,
               const Metrics& metrics, const data::Dataset& ds, const Evaluation& eval);
TrainedModel load_model(const std::filesystem::path& dir, const data::Dataset& ds);

std::string summary_header();
std::string summary_row(const ExperimentConfig& cfg, const Metrics& metrics);

}  // namespace rfgsnn::harness
