#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rfgsnn/data/generators.hpp"

namespace rfgsnn::data {

enum class Task { MexicanHat, Poisson1d, DiffusionReaction };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);  // ConfigError on unknown names

struct DataConfig {
  std::uint64_t seed = 0;
  std::size_t sensors = 32;

  // mexican_hat
  std::size_t mh_train = 10000;
  std::size_t mh_test_side = 100;  // test set is a side x side grid
  double mh_sigma = 0.8;

  // poisson1d
  std::size_t poisson_functions = 1600;
  std::size_t poisson_train = 800;
  std::size_t poisson_points = 100;
  double poisson_length_scale = 0.2;

  // diffusion_reaction
  std::size_t dr_functions = 200;
  std::size_t dr_train = 100;
  double dr_length_scale = 1.0;
  double dr_diffusion = 0.01;
  double dr_reaction = 0.01;
  PdeGrid dr_grid{};

  void validate() const;
};

// Both regression and operator data live in one record table. A record is a
// branch input (a point for regression, sensor values for operator tasks)
// with targets on the tensor grid spanned by the query axes. Regression
// tasks have no axes and one target per record.
struct Dataset {
  Task task = Task::MexicanHat;
  DataConfig config;
  std::vector<double> sensors;              // sensor positions, operator tasks only
  std::vector<std::vector<double>> axes;    // [axis][point]
  std::vector<std::vector<double>> inputs;  // [record]
  std::vector<double> targets;              // [record][grid point], first axis slowest
  std::vector<std::size_t> train;           // sorted record indices
  std::vector<std::size_t> test;

  std::size_t records() const { return inputs.size(); }
  std::size_t grid_size() const;
  std::size_t input_size() const { return inputs.empty() ? 0 : inputs.front().size(); }
  void validate() const;
};

Dataset build_dataset(Task task, const DataConfig& config);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

// Git blob id ("blob <size>\0" + bytes, SHA-1) in lowercase hex.
std::string content_hash(std::string_view bytes);

}  // namespace rfgsnn::data
