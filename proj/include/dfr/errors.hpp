#pragma once

#include <stdexcept>
#include <string>

namespace dfr {

// Error classes map onto the CLI exit codes: IoError -> 2, ValidationError -> 3,
// NumericalError -> 4.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dfr
