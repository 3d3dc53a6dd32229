#pragma once

#include <stdexcept>

namespace ionent {

// Population reached the part of the Fock ladder the truncated space cannot
// represent faithfully.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ionent
