#pragma once

#include <stdexcept>
#include <string>

namespace physolver {

/// Invalid user-supplied configuration (bad key, out-of-range value, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an API precondition (shape mismatch, wrong node kind, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed reference data file.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quasi-random sampler ran out of distinct candidates.
class SamplingExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Metric is undefined for the given inputs (e.g. zero reference norm).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimizer could not start (non-finite objective or gradient at the initial point).
class OptimizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace physolver
