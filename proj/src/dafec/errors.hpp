#pragma once

#include <stdexcept>
#include <string>

namespace dafec {

// Dataset / file problems (bad records, missing artifacts, dimension drift).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A sampler was asked for more classes/instances than the dataset holds.
struct CapacityError : DataError {
  using DataError::DataError;
};

// Non-finite values where finite ones are required (losses, gradients,
// degenerate metric denominators).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Precondition violations use std::invalid_argument directly.

}  // namespace dafec
