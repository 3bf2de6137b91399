#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mud {

enum class ErrorCode {
  InvalidParameter,
  LengthMismatch,
  DimensionMismatch,
  DegenerateConstellation,
  FactorizationFailure,
  CapExceeded,
  ConfigInvalid,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParameter: return "invalid-parameter";
    case ErrorCode::LengthMismatch: return "length-mismatch";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::DegenerateConstellation: return "degenerate-constellation";
    case ErrorCode::FactorizationFailure: return "factorization-failure";
    case ErrorCode::CapExceeded: return "cap-exceeded";
    case ErrorCode::ConfigInvalid: return "config-invalid";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

/// Every library failure carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

}  // namespace mud
