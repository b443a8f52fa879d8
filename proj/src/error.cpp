#include "sif/error.hpp"

namespace sif {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedContainer: return "MalformedContainer";
    case ErrorCode::MissingNarrative: return "MissingNarrative";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::AllReportsFailed: return "AllReportsFailed";
    case ErrorCode::GuardrailViolation: return "GuardrailViolation";
    case ErrorCode::EmptyAbstraction: return "EmptyAbstraction";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::InvalidDecoding: return "InvalidDecoding";
    case ErrorCode::TranscriptMiss: return "TranscriptMiss";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::CycleError: return "CycleError";
    case ErrorCode::MissingNode: return "MissingNode";
    case ErrorCode::ClockRegression: return "ClockRegression";
    case ErrorCode::UnknownCapability: return "UnknownCapability";
    case ErrorCode::InvalidRegistry: return "InvalidRegistry";
    case ErrorCode::InvalidRule: return "InvalidRule";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::ProviderFailure: return "ProviderFailure";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::RaterCountMismatch: return "RaterCountMismatch";
    case ErrorCode::DegenerateMarginals: return "DegenerateMarginals";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::InvalidRatings: return "InvalidRatings";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace sif
