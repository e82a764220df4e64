#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace sdp {

// Invalid configuration or malformed input description. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File / container problems. CLI exit code 3.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures surfaced from solvers or training. CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool deterministic_mode() {
  const char* v = std::getenv("SDP_DETERMINISTIC");
  return v != nullptr && std::string(v) == "1";
}

// Worker cap: SDP_THREADS if set, else all cores; SDP_DETERMINISTIC=1 forces 1.
inline unsigned worker_count() {
  if (deterministic_mode()) return 1;
  if (const char* v = std::getenv("SDP_THREADS")) {
    long n = std::strtol(v, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace sdp
