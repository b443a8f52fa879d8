#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sif {

enum class ErrorCode {
  // ingest
  MalformedContainer,
  MissingNarrative,
  IoFailure,
  AllReportsFailed,
  // extraction
  GuardrailViolation,
  EmptyAbstraction,
  PreconditionViolation,
  InvalidDecoding,
  TranscriptMiss,
  BackendFailure,
  // knowledge graph
  CycleError,
  MissingNode,
  ClockRegression,
  // refinement
  UnknownCapability,
  InvalidRegistry,
  InvalidRule,
  // metrics
  EmptyCorpus,
  EmptyText,
  ProviderFailure,
  InsufficientData,
  RaterCountMismatch,
  DegenerateMarginals,
  LengthMismatch,
  ZeroVariance,
  InvalidRatings,
  // pipeline
  ConfigError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sif
