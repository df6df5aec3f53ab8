#pragma once

#include <stdexcept>
#include <string>

namespace reid {

// Error classes map 1:1 to CLI exit codes: config 2, io 3, numeric 4.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  enum class Code {
    kOpenFailed,
    kBadMagic,
    kBadVersion,
    kTruncated,
    kWriteFailed,
    kBadManifest,
  };
  Code code;
  IoError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace reid
