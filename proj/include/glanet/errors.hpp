#pragma once

#include <stdexcept>
#include <string>

namespace gla {

// Bad configuration or shape contract; the CLI maps this to a user error.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable or missing input data (image folders, weight files, checkpoints).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or parameter went non-finite during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gla
