#pragma once

#include <span>

namespace rfgsnn::harness {

// ||pred - truth|| / ||truth||. DimensionError on length mismatch or empty
// input, UndefinedMetricError when truth is all zeros.
double relative_l2(std::span<const double> pred, std::span<const double> truth);

}  // namespace rfgsnn::harness
