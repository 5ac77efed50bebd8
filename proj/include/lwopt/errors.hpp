#pragma once

#include <stdexcept>
#include <string>

namespace lwopt {

/// Invalid configuration or mismatched shapes, detected before any compute.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input file. The message names the offending field.
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operation called on a problem type that cannot support it.
struct unsupported_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Learning rate outside a theorem's admissible range. The message names the
/// violated branch.
struct cap_violation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lwopt
