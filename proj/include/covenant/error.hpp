#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace covenant {

enum class ErrorCode {
  kOutOfRange,
  kNoTokens,
  kParse,
  kIo,
  kEmptySet,
  kEmptyInput,
  kEmptyQuote,
  kNoAlignment,
  kMissingPlaceholder,
  kBackendUnavailable,
  kBackendMalformedResponse,
  kStoreUnavailable,
  kNotFound,
  kDuplicateKey,
  kUnclassifiableScope,
  kKeyMismatch,
  kInvalidCounts,
  kEmptyReference,
  kMissingField,
  kNotFlagged,
  kRevisionConflict,
  kAlreadyDecided,
  kMissingCorrectedSpan,
  kEmptyRange,
  kInvalidArgument,
  kMissingArtifact,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kNoTokens: return "NoTokens";
    case ErrorCode::kParse: return "Parse";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyQuote: return "EmptyQuote";
    case ErrorCode::kNoAlignment: return "NoAlignment";
    case ErrorCode::kMissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kBackendMalformedResponse: return "BackendMalformedResponse";
    case ErrorCode::kStoreUnavailable: return "StoreUnavailable";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kUnclassifiableScope: return "UnclassifiableScope";
    case ErrorCode::kKeyMismatch: return "KeyMismatch";
    case ErrorCode::kInvalidCounts: return "InvalidCounts";
    case ErrorCode::kEmptyReference: return "EmptyReference";
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kNotFlagged: return "NotFlagged";
    case ErrorCode::kRevisionConflict: return "RevisionConflict";
    case ErrorCode::kAlreadyDecided: return "AlreadyDecided";
    case ErrorCode::kMissingCorrectedSpan: return "MissingCorrectedSpan";
    case ErrorCode::kEmptyRange: return "EmptyRange";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

// Every library failure is an Error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Backend and store outages may succeed on retry; nothing else will.
  bool retryable() const noexcept {
    return code_ == ErrorCode::kBackendUnavailable || code_ == ErrorCode::kStoreUnavailable;
  }

 private:
  ErrorCode code_;
};

}  // namespace covenant
