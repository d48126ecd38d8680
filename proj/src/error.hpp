#pragma once

#include <stdexcept>
#include <string>

namespace thumbtruth {

enum class ErrorCode {
  FileNotFound,
  IoError,
  SchemaViolation,
  DuplicateId,
  EmptyId,
  EmptyInput,
  NegativeDuration,
  NonPositiveDuration,
  MissingMedia,
  MissingThumbnail,
  SourceUnavailable,
  EmbedderUnavailable,
  DimensionMismatch,
  ClassExhausted,
  ProviderBlocked,
  ProviderUnavailable,
  IncompleteEntry,
  MismatchedCards,
  ConfigurationError,
  UnmatchedRequest,
  PreparationFailed,
  MissingTruth,
  InconsistentTruth,
  EmptyCounts,
  UnknownBackend,
  UnknownMetric,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

// Every failure inside the core surfaces as this exception; the C API maps
// the code onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// SchemaViolation with location, used by manifest and annotation readers.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, std::string field, const std::string& detail)
      : Error(ErrorCode::SchemaViolation,
              "line " + std::to_string(line) + ", field '" + field + "': " + detail),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace thumbtruth
