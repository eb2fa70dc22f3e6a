#pragma once

#include <stdexcept>
#include <string>

namespace roadreg {

/// Invalid configuration or precondition violation on user-supplied values.
/// The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while running a pipeline on valid configuration (degenerate data,
/// missing files, no correspondences). The CLI maps it to exit code 3.
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace roadreg
