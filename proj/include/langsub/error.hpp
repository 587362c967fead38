#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace langsub {

enum class ErrorCode {
  malformed_header,
  dimension_mismatch,
  label_count_mismatch,
  unknown_language,
  invariant_violation,
  precondition,
  not_found,
  duplicate,
  io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::malformed_header: return "malformed header";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::label_count_mismatch: return "label count mismatch";
    case ErrorCode::unknown_language: return "unknown language";
    case ErrorCode::invariant_violation: return "invariant violation";
    case ErrorCode::precondition: return "precondition violated";
    case ErrorCode::not_found: return "not found";
    case ErrorCode::duplicate: return "duplicate";
    case ErrorCode::io: return "i/o error";
  }
  return "error";
}

/// Every failure in the library surfaces as this exception; `code()` tells
/// validation problems apart from I/O problems.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  bool is_io() const noexcept { return code_ == ErrorCode::io; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::precondition, what);
}

}  // namespace langsub
