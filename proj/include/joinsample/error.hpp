#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace joinsample {

// Error taxonomy. Categories map onto CLI exit codes: Spec=2, Data=3,
// Statistical=4, SizeGuard=5. Internal signals a broken invariant (a bug).
enum class ErrorCategory {
  Spec,
  Data,
  Statistical,
  SizeGuard,
  Internal,
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Spec: return "spec";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Statistical: return "statistical";
    case ErrorCategory::SizeGuard: return "size-guard";
    case ErrorCategory::Internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message),
        category_(category),
        code_(std::move(code)) {}

  ErrorCategory category() const { return category_; }
  const std::string& code() const { return code_; }

 private:
  ErrorCategory category_;
  std::string code_;
};

[[noreturn]] inline void raise(ErrorCategory category, std::string code,
                               const std::string& message) {
  throw Error(category, std::move(code), message);
}

}  // namespace joinsample
