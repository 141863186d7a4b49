#pragma once

#include <stdexcept>
#include <string>

namespace satdepth {

/// Base of every exception thrown by the library. `kind()` is a short
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

/// Malformed file, bad magic, missing field, wrong list length.
struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

/// Input violates an operation's precondition.
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

/// Pixel or grid access outside the addressable area.
struct OutOfBoundsError : Error {
  explicit OutOfBoundsError(const std::string& what) : Error("out_of_bounds", what) {}
};

/// RPC denominator close to zero: the point is outside the model's validity.
struct DenominatorError : Error {
  explicit DenominatorError(const std::string& what) : Error("denominator", what) {}
};

/// Iterative solver failed to reach its tolerance.
struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& what) : Error("convergence", what) {}
};

/// Degenerate geometry: rank deficiency, parallel rays, coincident cameras.
struct DegenerateError : Error {
  explicit DegenerateError(const std::string& what) : Error("degenerate", what) {}
};

}  // namespace satdepth
