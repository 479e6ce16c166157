// Shared basics: error types, finiteness checks, small utilities.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmdiff {

// Raised for invalid configuration or arguments (maps to CLI exit code 2).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised for failures during computation or I/O (maps to CLI exit code 3).
struct runtime_fault : std::runtime_error {
  explicit runtime_fault(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw config_error(msg);
}

template <class S>
inline bool all_finite(const std::vector<S>& v) {
  for (S x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

}  // namespace mmdiff
