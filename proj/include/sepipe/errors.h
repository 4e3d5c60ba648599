// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace sepipe {

/// Construction parameters that cannot be satisfied (window design, engine setup).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A caller broke a precondition: wrong buffer length, value out of range.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// File contents that cannot be parsed.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A weight file that parses but does not match the model schema.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sepipe
