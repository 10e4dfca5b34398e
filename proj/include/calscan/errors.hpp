#pragma once

#include <stdexcept>
#include <string>

namespace calscan {

// Error taxonomy shared by the library and the CLI. The CLI maps
// ArgumentError/UsageError to exit code 2 and everything else to 1.

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateGeometryError : std::domain_error {
  using std::domain_error::domain_error;
};

}  // namespace calscan
