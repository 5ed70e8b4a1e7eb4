#pragma once

#include <stdexcept>
#include <string>

namespace disent {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: config/shape -> 2, numeric -> 3, io -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace disent
