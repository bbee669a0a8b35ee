#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace dxsim {

enum class ErrorCode {
  kMalformedRecord,
  kDuplicateId,
  kEmptyCorpus,
  kUnknownId,
  kEmptyAfterPreprocessing,
  kEmptyText,
  kDegenerateVector,
  kZeroVector,
  kBackendUnavailable,
  kDimensionMismatch,
  kProtocolError,
  kEmptyCandidatePool,
  kCorpusTooSmall,
  kMisalignedOverlaps,
  kInvalidArgument,
  kIo,
};

/// Stable snake_case name, used in JSON error bodies and CLI diagnostics.
inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRecord: return "malformed_record";
    case ErrorCode::kDuplicateId: return "duplicate_id";
    case ErrorCode::kEmptyCorpus: return "empty_corpus";
    case ErrorCode::kUnknownId: return "unknown_id";
    case ErrorCode::kEmptyAfterPreprocessing: return "empty_after_preprocessing";
    case ErrorCode::kEmptyText: return "empty_text";
    case ErrorCode::kDegenerateVector: return "degenerate_vector";
    case ErrorCode::kZeroVector: return "zero_vector";
    case ErrorCode::kBackendUnavailable: return "backend_unavailable";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kProtocolError: return "protocol_error";
    case ErrorCode::kEmptyCandidatePool: return "empty_candidate_pool";
    case ErrorCode::kCorpusTooSmall: return "corpus_too_small";
    case ErrorCode::kMisalignedOverlaps: return "misaligned_overlaps";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

/// The single exception type thrown by the library. `subject()` carries the
/// document id (or other offending value) when one applies; `line()` is the
/// 1-based input line for ingest errors and 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string subject = {},
        std::size_t line = 0)
      : std::runtime_error(message), code_(code), subject_(std::move(subject)), line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::string subject_;
  std::size_t line_;
};

}  // namespace dxsim
