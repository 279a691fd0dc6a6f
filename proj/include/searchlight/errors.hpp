#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace searchlight {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violates a domain invariant. Carries every violation found.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::string message)
      : Error(message), violations_{std::move(message)} {}
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

/// A numeric search (multiplier bisection, inner inverse) failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace searchlight
