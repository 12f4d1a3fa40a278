#ifndef LADDER_ERRORS_HPP_
#define LADDER_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ladder {

// Base class for every error raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or width disagreement between tensors/layers.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid hyperparameter or argument value (negative sigma, p >= 1, ...).
struct ParameterError : Error {
  using Error::Error;
};

// Operation called out of order, e.g. backward without a cached forward.
struct StateError : Error {
  using Error::Error;
};

// Malformed input files, duplicate ids, split violations.
struct DataError : Error {
  using Error::Error;
};

// Metric undefined on the given inputs (constant vectors, |ccc| = 1, ...).
struct MetricError : Error {
  using Error::Error;
};

// Batch statistics requested on a batch too small to have any.
struct DegenerateBatchError : Error {
  using Error::Error;
};

// Non-finite cost or gradient; the offending step is refused.
struct DivergenceError : Error {
  using Error::Error;
};

// Checkpoint version/digest/layout problems.
struct CheckpointError : Error {
  using Error::Error;
};

}  // namespace ladder

#endif  // LADDER_ERRORS_HPP_
