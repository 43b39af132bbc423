#pragma once

#include <stdexcept>
#include <string>

namespace qreadout {

// Invalid user input: bad configuration keys, values or violated preconditions.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// A computation could not produce a trustworthy result (fit divergence,
// photon ceiling breach, degenerate data).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// The parameters sit on a pole of the dispersive expansion (Delta = 0 or
// Delta + alpha = 0).
class StraddleError : public NumericalError {
 public:
  explicit StraddleError(const std::string& what) : NumericalError(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qreadout
