#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace e2c {

// Single exception type with a machine-readable code ("MissingBoundary",
// "BackendUnavailable", ...). Codes are part of the public contract and are
// asserted in tests.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(const std::string& code,
                              const std::string& message) {
  throw Error(code, message);
}

}  // namespace e2c
