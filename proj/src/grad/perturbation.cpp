#include "rfgsnn/grad/perturbation.hpp"

#include <fmt/format.h>

namespace rfgsnn::grad {

void ParamLayout::validate() const {
  std::size_t expected = 0;
  for (const auto& s : slices) {
    if (s.offset != expected || s.size == 0) {
      throw DimensionError(fmt::format("parameter slice '{}' at {} (+{}) breaks the tiling",
                                       s.name, s.offset, s.size));
    }
    expected += s.size;
  }
}

PerturbationVector sample_perturbation(const ParamLayout& layout, PerturbationMode /*mode*/,
                                       std::mt19937_64& rng) {
  if (layout.slices.empty()) throw ConfigError("cannot perturb an empty parameter layout");
  layout.validate();
  PerturbationVector v;
  v.layer_slices = layout.slices;
  v.values.resize(layout.total());
  std::uint64_t bits = 0;
  int left = 0;
  for (double& x : v.values) {
    if (left == 0) {
      bits = rng();
      left = 64;
    }
    x = (bits & 1U) ? 1.0 : -1.0;
    bits >>= 1U;
    --left;
  }
  return v;
}

}  // namespace rfgsnn::grad
