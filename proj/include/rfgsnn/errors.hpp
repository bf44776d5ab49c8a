#pragma once

#include <stdexcept>
#include <string>

namespace rfgsnn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values, unknown config keys, missing projections.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shape mismatch between vectors, layers or datasets.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, failed factorizations, solver blow-up.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class EmptyTraceError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace rfgsnn
