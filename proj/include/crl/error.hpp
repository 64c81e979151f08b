#pragma once

#include <stdexcept>
#include <string>

namespace crl {

// Error with a machine-readable category, surfaced verbatim by the CLI as
// "error: <category>: <message>".
class CrlError : public std::runtime_error {
 public:
  CrlError(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

[[noreturn]] inline void fail(const std::string& category, const std::string& message) {
  throw CrlError(category, message);
}

}  // namespace crl
