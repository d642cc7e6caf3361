#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gaapo {

enum class ErrorCode {
    MissingPlaceholder,
    InvalidLineage,
    ParseError,
    VocabularyViolation,
    InsufficientSamples,
    BackendUnavailable,
    ReplayMiss,
    AuthError,
    GenerationFailed,
    IdenticalParents,
    EmptyTrainSet,
    NoErrorsFound,
    UnboundVariable,
    UnknownTemplate,
    JudgeUnparseable,
    ConfigError,
    CorruptCheckpoint,
    ConfigMismatch,
    StrategyFailure,
    ManifestInvalid,
    EmptySplit,
    MetricMismatch,
    Io,
    InvariantViolation,
};

/// Stable machine-readable name, e.g. "MANIFEST_INVALID".
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace gaapo
