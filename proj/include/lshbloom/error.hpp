#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lshbloom {

enum class ErrorCode {
  kInvalidArgument,
  kConfiguration,
  kEmptyDocument,
  kDuplicateId,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kChecksumMismatch,
  kCorrupt,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kConfiguration: return "configuration error";
    case ErrorCode::kEmptyDocument: return "empty document";
    case ErrorCode::kDuplicateId: return "id already present";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kChecksumMismatch: return "checksum mismatch";
    case ErrorCode::kCorrupt: return "corrupt encoding";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown error";
}

/// All library failures are reported as this exception; `code()` lets callers
/// distinguish format errors from bad configuration or bad input.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  explicit Error(ErrorCode code)
      : std::runtime_error(std::string(to_string(code))), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace lshbloom
