#pragma once

#include <stdexcept>
#include <string>

namespace nirvis {

// Incompatible tensor/image shapes or sizes.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf escaped a forward evaluation, or a numeric tolerance was blown.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument value (out-of-range weight, empty batch, ...).
struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File system / stream failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  int line;  // 0 when not tied to a specific line
  ConfigError(const std::string& msg, int line_ = 0)
      : std::runtime_error(line_ > 0 ? "line " + std::to_string(line_) + ": " + msg : msg),
        line(line_) {}
};

struct CheckpointError : std::runtime_error {
  enum class Kind { BadHeader, Truncated, DuplicateName, BadData };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

}  // namespace nirvis
