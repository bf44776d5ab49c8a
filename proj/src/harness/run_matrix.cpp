#include "rfgsnn/harness/run_matrix.hpp"

#include <fstream>
#include <limits>

#include <fmt/format.h>

namespace rfgsnn::harness {

std::vector<MatrixRow> run_matrix(const std::vector<ExperimentConfig>& configs,
                                  const data::Dataset& ds, const std::filesystem::path& out,
                                  unsigned threads) {
  if (configs.empty()) throw ConfigError("run_matrix: no configs");
  std::filesystem::create_directories(out);
  std::vector<MatrixRow> rows;
  for (const auto& cfg : configs) {
    MatrixRow row{cfg, {}, {}};
    try {
      if (cfg.task != ds.task)
        throw ConfigError(fmt::format("config task {} does not match dataset task {}",
                                      data::task_name(cfg.task), data::task_name(ds.task)));
      auto [trained, metrics] = train(cfg, ds, {threads, {}});
      const auto eval = evaluate(trained.model, ds, threads);
      write_run(out / cfg.name(), trained, metrics, ds, eval);
      row.metrics = std::move(metrics);
    } catch (const Error& e) {
      row.error = e.what();
      row.metrics.relative_l2 = std::numeric_limits<double>::quiet_NaN();
      row.metrics.train_loss_final = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  std::ofstream(out / "summary.csv", std::ios::binary) << summary_table(rows);
  return rows;
}

std::string summary_table(const std::vector<MatrixRow>& rows) {
  std::string header = summary_header();
  header.insert(header.size() - 1, ",status");
  std::string s = header;
  for (const auto& r : rows) {
    std::string line = summary_row(r.config, r.metrics);
    std::string status = r.error.empty() ? "ok" : r.error;
    for (char& c : status)
      if (c == ',' || c == '\n' || c == '"') c = ' ';
    line.insert(line.size() - 1, "," + status);
    s += line;
  }
  return s;
}

}  // namespace rfgsnn::harness
