#pragma once

#include <stdexcept>
#include <string>

namespace spdelab {

// Requested work exceeds a configured budget (memory, step counts).
struct ResourceError : std::runtime_error {
  explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical procedure failed (non-contraction, unreliable estimate, ...).
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spdelab
