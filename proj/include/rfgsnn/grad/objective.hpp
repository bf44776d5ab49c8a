#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfgsnn/grad/network_pass.hpp"

namespace rfgsnn::grad {

struct ParamSlice {
  std::size_t offset = 0;
  std::size_t size = 0;
  std::string name;
};

// Partition of a flat parameter vector into layer blocks.
struct ParamLayout {
  std::vector<ParamSlice> slices;

  std::size_t total() const { return slices.empty() ? 0 : slices.back().offset + slices.back().size; }
  // Slices must be contiguous, non-empty and start at zero.
  void validate() const;
};

// Indices of the records forming one minibatch.
using Batch = std::span<const std::size_t>;

// A scalar training loss over a flat parameter vector that can be
// differentiated in reverse mode and in forward mode with several tangents.
// Both modes substitute the same surrogate for dS/dU; pass_seed selects the
// WSG substreams so the two modes agree within one pass.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual const ParamLayout& layout() const = 0;
  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(std::span<const double> flat) = 0;

  virtual double loss(Batch batch, OpTally& ops) const = 0;

  // Returns the loss; grad (length layout().total()) is overwritten.
  virtual double loss_and_gradient(Batch batch, std::uint64_t pass_seed, std::span<double> grad,
                                   OpTally& ops) const = 0;

  // Returns the loss; jvps[c] = <grad, tangents[c]>.
  virtual double loss_and_jvp(Batch batch, std::uint64_t pass_seed,
                              std::span<const std::span<const double>> tangents,
                              std::span<double> jvps, OpTally& ops) const = 0;
};

}  // namespace rfgsnn::grad
