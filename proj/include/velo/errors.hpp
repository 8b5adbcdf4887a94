#pragma once

#include <stdexcept>
#include <string>

namespace velo {

// Malformed file contents (bad magic, truncated payload, bad schema).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem-level failures (missing file, unwritable path).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace velo
