#pragma once

#include <stdexcept>

namespace offrl {

// Error taxonomy mirrored by the CLI exit codes: usage/config problems exit
// with 1, malformed or inconsistent data with 2, failures inside a running
// arm with 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace offrl
