#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sif/clips.hpp"
#include "sif/cti.hpp"
#include "sif/knowledge_graph.hpp"
#include "sif/llm.hpp"
#include "sif/prediction.hpp"
#include "sif/refine.hpp"
#include "sif/semantic.hpp"

namespace sif::pipeline {

enum class BackendKind { ScriptedMock, Http };

struct BackendConfig {
  BackendKind kind = BackendKind::ScriptedMock;
  std::filesystem::path transcript;  // ScriptedMock
  std::string endpoint;              // Http
  std::string model;
  std::string api_key_env;  // name of the environment variable holding the key
  int timeout_seconds = 120;
};

/// Everything a run depends on. Relative paths in a config file are
/// resolved against the file's directory.
struct PipelineConfig {
  std::filesystem::path corpus;
  cti::Schema schema = cti::Schema::DatasetB;
  std::filesystem::path vocabulary;
  std::optional<std::filesystem::path> prompts;  // built-in templates when unset
  semantic::PromptStrategy strategy;
  BackendConfig backend;
  llm::DecodingConfig decoding;
  std::optional<std::filesystem::path> registry;  // built-in registry when unset
  kg::GraphParams graph;
  int memory_depth = 0;  // > 0 adds knowledge-graph context to relation prompts
  std::size_t max_cycles = 1000;
  std::size_t k = 10;
  std::filesystem::path out = "runs";
  bool offline = false;

  /// Throws ConfigError for unknown keys or bad values.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Throws ConfigError: offline without a transcript backend, missing
  /// files, out-of-range values.
  void validate() const;

  /// FNV-1a 64 of the canonical JSON form; key order in the source file
  /// does not matter.
  std::string hash() const;
};

std::string_view to_string(cti::Schema schema);
/// Report id made safe as a single path component.
std::string report_directory(const std::string& id);
std::optional<cti::Schema> schema_from_string(std::string_view text);

/// The only place a backend is constructed. With `offline` set this never
/// builds a network-capable client.
std::unique_ptr<llm::LlmClient> make_client(const PipelineConfig& config);

semantic::PromptTemplates load_templates(const PipelineConfig& config);
refine::CapabilityRegistry load_registry(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Stages

struct StatementRecord {
  std::string id;  // "<report id>#<1-based index>"
  std::string text;
  std::set<std::string> gold;
  semantic::StatementAnalysis analysis;
};

struct ReportExtraction {
  std::string report_id;
  std::vector<StatementRecord> statements;
  std::vector<semantic::SemanticConcept> concepts;  // merged over statements, first mention wins
  std::vector<cti::NetworkArtifact> artifacts;
  std::vector<std::string> warnings;
  bool semantic_stage = false;  // whether the strategy ran stages 1 and 2
};

/// Analyses every statement of the report (the synopsis when there are none).
ReportExtraction extract_report(const cti::CtiReport& report, const cti::Vocabulary& vocabulary,
                                const semantic::PromptStrategy& strategy, llm::LlmClient& client,
                                const semantic::Context& ctx, const semantic::ConceptHook& after_concepts = {});

nlohmann::json to_json(const ReportExtraction& extraction);
/// Reads back what to_json wrote (analysis details are not restored).
ReportExtraction extraction_from_json(const nlohmann::json& j);

std::vector<StatementPrediction> predictions_of(const ReportExtraction& extraction);

/// Output of the symbolic half: parse, validate, execute, refine, verify.
struct RuleBuild {
  std::vector<clips::Diagnostic> diagnostics;
  std::optional<clips::ExecutionTrace> trace;
  refine::RefinementResult refinement;
  std::string rules_text;
  std::vector<std::string> syntax_errors;  // "line N: Code: message"
  std::optional<std::string> failed_stage;  // validate, execute, refine, verify
  std::string error;
  std::vector<std::string> warnings;
};

RuleBuild build_rules(const std::string& report_id, std::string_view clips_source,
                      const refine::CapabilityRegistry& registry, std::size_t max_cycles);

/// One verify_syntax problem per entry; empty when every line is clean.
std::vector<std::string> verify_rules_text(std::string_view rules_text);

/// Records IsA relations of `concepts` at `now`. Cycle-closing links are
/// skipped and reported.
std::vector<std::string> update_graph(kg::KnowledgeGraph& graph, const std::vector<semantic::SemanticConcept>& concepts,
                                      kg::Timestamp now);

// ---------------------------------------------------------------------------
// Full run

struct ReportOutcome {
  std::string report_id;
  std::string directory;  // relative to the run directory; empty for ingest failures
  bool ok = true;
  std::optional<std::string> failed_stage;
  std::string error;
  std::size_t statements = 0;
  std::size_t entities = 0;
  std::size_t concepts = 0;
  std::size_t clips_errors = 0;
  std::size_t clips_warnings = 0;
  std::size_t firings = 0;
  std::size_t capabilities = 0;
  std::size_t rules = 0;
  std::vector<std::string> warnings;
  std::map<std::string, double> stage_ms;
};

struct RunManifest {
  std::string config_hash;
  nlohmann::json config;
  std::filesystem::path run_dir;
  std::vector<ReportOutcome> reports;  // corpus order, then ingest failures
  std::vector<std::string> ingest_warnings;
  double wall_ms = 0.0;

  std::size_t failed() const;
  bool all_failed() const { return !reports.empty() && failed() == reports.size(); }
  /// Timing lives under a single "timing" key so it can be dropped for
  /// comparisons.
  nlohmann::json to_json(bool with_timing = true) const;
};

/// Creates the next free `<out>/run-NNNN` directory; earlier runs are never
/// touched.
std::filesystem::path next_run_dir(const std::filesystem::path& out);

/// Throws ConfigError for an invalid config and AllReportsFailed when no
/// report container parses. Per-report failures are recorded, not thrown.
RunManifest run_pipeline(const PipelineConfig& config);
RunManifest run_pipeline(const PipelineConfig& config, llm::LlmClient& client);

}  // namespace sif::pipeline
