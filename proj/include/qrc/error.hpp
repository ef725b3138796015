#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qrc {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  numerical_failure,
  propagation_failure,
  invariant_violation,
  config_error,
  io_error,
  not_found,
};

constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::numerical_failure: return "numerical_failure";
    case ErrorCode::propagation_failure: return "propagation_failure";
    case ErrorCode::invariant_violation: return "invariant_violation";
    case ErrorCode::config_error: return "config_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::not_found: return "not_found";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace qrc
