#include "error.hpp"

namespace thumbtruth {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyId: return "EmptyId";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NegativeDuration: return "NegativeDuration";
    case ErrorCode::NonPositiveDuration: return "NonPositiveDuration";
    case ErrorCode::MissingMedia: return "MissingMedia";
    case ErrorCode::MissingThumbnail: return "MissingThumbnail";
    case ErrorCode::SourceUnavailable: return "SourceUnavailable";
    case ErrorCode::EmbedderUnavailable: return "EmbedderUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ClassExhausted: return "ClassExhausted";
    case ErrorCode::ProviderBlocked: return "ProviderBlocked";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::IncompleteEntry: return "IncompleteEntry";
    case ErrorCode::MismatchedCards: return "MismatchedCards";
    case ErrorCode::ConfigurationError: return "ConfigurationError";
    case ErrorCode::UnmatchedRequest: return "UnmatchedRequest";
    case ErrorCode::PreparationFailed: return "PreparationFailed";
    case ErrorCode::MissingTruth: return "MissingTruth";
    case ErrorCode::InconsistentTruth: return "InconsistentTruth";
    case ErrorCode::EmptyCounts: return "EmptyCounts";
    case ErrorCode::UnknownBackend: return "UnknownBackend";
    case ErrorCode::UnknownMetric: return "UnknownMetric";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace thumbtruth
