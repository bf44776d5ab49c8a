#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rfgsnn/data/datasets.hpp"
#include "rfgsnn/harness/config.hpp"
#include "rfgsnn/harness/trainer.hpp"

namespace rfgsnn::harness {

struct MatrixRow {
  ExperimentConfig config;
  Metrics metrics;
  std::string error;  // empty when the run succeeded
};

// Trains and evaluates every config in order, writing one run directory per
// config under `out` and `out/summary.csv`. A failing run is recorded in its
// row and the matrix carries on.
std::vector<MatrixRow> run_matrix(const std::vector<ExperimentConfig>& configs,
                                  const data::Dataset& ds, const std::filesystem::path& out,
                                  unsigned threads = 1);

std::string summary_table(const std::vector<MatrixRow>& rows);

}  // namespace rfgsnn::harness
