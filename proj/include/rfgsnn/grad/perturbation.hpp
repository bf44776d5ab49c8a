#pragma once

#include <random>
#include <vector>

#include "rfgsnn/grad/objective.hpp"

namespace rfgsnn::grad {

enum class PerturbationMode { Global, Layerwise };
enum class Distribution { Rademacher };

struct PerturbationVector {
  std::vector<double> values;
  std::vector<ParamSlice> layer_slices;
  Distribution distribution = Distribution::Rademacher;
};

// i.i.d. +-1 entries over all parameters. Both modes draw the same vector;
// layer-wise consumers read it block by block through layer_slices.
PerturbationVector sample_perturbation(const ParamLayout& layout, PerturbationMode mode,
                                       std::mt19937_64& rng);

}  // namespace rfgsnn::grad
