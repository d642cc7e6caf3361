#include "gaapo/error.hpp"

namespace gaapo {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MissingPlaceholder: return "MISSING_PLACEHOLDER";
        case ErrorCode::InvalidLineage: return "INVALID_LINEAGE";
        case ErrorCode::ParseError: return "PARSE_ERROR";
        case ErrorCode::VocabularyViolation: return "VOCABULARY_VIOLATION";
        case ErrorCode::InsufficientSamples: return "INSUFFICIENT_SAMPLES";
        case ErrorCode::BackendUnavailable: return "BACKEND_UNAVAILABLE";
        case ErrorCode::ReplayMiss: return "REPLAY_MISS";
        case ErrorCode::AuthError: return "AUTH_ERROR";
        case ErrorCode::GenerationFailed: return "GENERATION_FAILED";
        case ErrorCode::IdenticalParents: return "IDENTICAL_PARENTS";
        case ErrorCode::EmptyTrainSet: return "EMPTY_TRAIN_SET";
        case ErrorCode::NoErrorsFound: return "NO_ERRORS_FOUND";
        case ErrorCode::UnboundVariable: return "UNBOUND_VARIABLE";
        case ErrorCode::UnknownTemplate: return "UNKNOWN_TEMPLATE";
        case ErrorCode::JudgeUnparseable: return "JUDGE_UNPARSEABLE";
        case ErrorCode::ConfigError: return "CONFIG_ERROR";
        case ErrorCode::CorruptCheckpoint: return "CORRUPT_CHECKPOINT";
        case ErrorCode::ConfigMismatch: return "CONFIG_MISMATCH";
        case ErrorCode::StrategyFailure: return "STRATEGY_FAILURE";
        case ErrorCode::ManifestInvalid: return "MANIFEST_INVALID";
        case ErrorCode::EmptySplit: return "EMPTY_SPLIT";
        case ErrorCode::MetricMismatch: return "METRIC_MISMATCH";
        case ErrorCode::Io: return "IO_ERROR";
        case ErrorCode::InvariantViolation: return "INVARIANT_VIOLATION";
    }
    return "UNKNOWN";
}

}  // namespace gaapo
