#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rfgsnn/grad/objective.hpp"
#include "rfgsnn/opnet/operator_models.hpp"

namespace rfgsnn::opnet {

// Training records for a SeparableModel. Each record supplies one branch
// input and targets on the full tensor grid spanned by the trunk axes.
struct SeparableData {
  std::vector<std::vector<double>> inputs;             // [record] branch input
  std::vector<std::vector<std::vector<double>>> axes;  // [trunk][point] trunk input
  std::vector<double> targets;                         // [record][grid point], first axis slowest

  std::size_t records() const { return inputs.size(); }
  std::size_t grid_size() const;
  std::vector<std::size_t> axis_sizes() const;
  void validate(const SeparableModel& model) const;
};

// MSE over every (record, grid point) pair of a batch of records, plus the
// optional weighted local losses.
class SeparableObjective final : public grad::Objective {
 public:
  SeparableObjective(SeparableModel model, const SeparableData& data, unsigned threads = 1);

  const grad::ParamLayout& layout() const override { return layout_; }
  std::vector<double> parameters() const override { return model_.flatten(); }
  void set_parameters(std::span<const double> flat) override { model_.assign(flat); }

  double loss(grad::Batch batch, grad::OpTally& ops) const override;
  double loss_and_gradient(grad::Batch batch, std::uint64_t pass_seed, std::span<double> grad,
                           grad::OpTally& ops) const override;
  double loss_and_jvp(grad::Batch batch, std::uint64_t pass_seed,
                      std::span<const std::span<const double>> tangents, std::span<double> jvps,
                      grad::OpTally& ops) const override;

  const SeparableModel& model() const { return model_; }
  const SeparableData& data() const { return *data_; }

  // Grid predictions, record-major, for the given records.
  std::vector<double> predict(std::span<const std::size_t> records) const;

 private:
  struct Eval {
    std::size_t net;  // 0 = branch, k = trunk k-1
    const std::vector<double>* input;
  };

  const snn::SpikingMLP& net(std::size_t k) const {
    return k == 0 ? model_.branch : model_.trunks[k - 1];
  }
  std::vector<Eval> plan(grad::Batch batch) const;

  SeparableModel model_;
  const SeparableData* data_;
  unsigned threads_;
  grad::ParamLayout layout_;
  std::vector<std::size_t> net_offset_;                // [net]
  std::vector<std::vector<std::size_t>> proj_offset_;  // [level][net]
};

}  // namespace rfgsnn::opnet
