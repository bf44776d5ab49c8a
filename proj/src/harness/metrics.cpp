#include "rfgsnn/harness/metrics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rfgsnn/errors.hpp"

namespace rfgsnn::harness {

double relative_l2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw DimensionError(fmt::format("relative_l2: {} predictions vs {} targets", pred.size(),
                                     truth.size()));
  if (truth.empty()) throw DimensionError("relative_l2: empty input");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (den == 0.0) throw UndefinedMetricError("relative_l2: truth has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

}  // namespace rfgsnn::harness
