#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sif/cti.hpp"
#include "sif/llm.hpp"
#include "sif/prediction.hpp"

namespace sif::semantic {

struct DomainEntity {
  std::string surface;
  std::size_t start = 0;  // [start, end) into the statement text
  std::size_t end = 0;

  bool operator==(const DomainEntity&) const = default;
};

struct SemanticConcept {
  DomainEntity entity;
  std::set<std::string> hyponyms;
  std::set<std::string> hypernyms;
  double confidence = 0.0;

  bool operator==(const SemanticConcept&) const = default;
};

enum class StrategyKind { ZeroShot, FewShot, ChainOfThought, ThreeStage };
enum class Augmentation { None, Hyponyms, Hypernyms };

struct PromptStrategy {
  StrategyKind kind = StrategyKind::ThreeStage;
  Augmentation augmentation = Augmentation::None;  // ignored by ThreeStage
  int threshold_percent = 50;
};

std::string_view to_string(StrategyKind kind);
std::string_view to_string(Augmentation augmentation);
std::optional<StrategyKind> strategy_kind_from_string(std::string_view text);
std::optional<Augmentation> augmentation_from_string(std::string_view text);

/// Prompt texts with `{name}` placeholders. Known names: statement, entities,
/// entity, hyponyms, hypernyms, vocabulary, threshold, context, artifacts.
struct PromptTemplates {
  std::string entities;
  std::string hyponyms;
  std::string hypernyms;
  std::string classify_zero_shot;
  std::string classify_few_shot;
  std::string classify_cot;
  std::string classify_three_stage;
  std::string clips;

  static PromptTemplates builtin();
  /// Reads `<name>.txt` for every field from `dir`; missing files keep the
  /// built-in text. Throws ConfigError for unknown placeholders.
  static PromptTemplates load(const std::filesystem::path& dir);

  const std::string& classify_for(StrategyKind kind) const;
  bool operator==(const PromptTemplates&) const = default;
};

/// Substitutes placeholders. Throws ConfigError for a placeholder missing
/// from `values`.
std::string render_prompt(std::string_view text, const std::map<std::string, std::string>& values);

/// One `name<TAB>confidence` record from a completion.
struct Record {
  std::string name;
  double confidence = 0.0;
};

struct ParsedRecords {
  std::vector<Record> records;
  std::vector<std::string> warnings;
  bool explicit_none = false;  // completion was the literal NONE
};

/// Lines without a TAB are ignored; leading list bullets are stripped;
/// non-numeric confidences become 0 with a warning; values are clamped to [0,1].
ParsedRecords parse_records(std::string_view completion);

struct Context {
  const llm::DecodingConfig& decoding;
  const PromptTemplates& templates;
  /// Optional memory lookup added to relation prompts; empty string for none.
  std::function<std::string(const std::string& entity)> memory;
};

struct EntityResult {
  std::vector<DomainEntity> entities;
  std::vector<std::string> warnings;
};

/// Throws PreconditionViolation for an empty statement and
/// GuardrailViolation when the completion has no records and is not NONE.
EntityResult stage1_extract_entities(std::string_view statement, llm::LlmClient& client, const Context& ctx);

struct ConceptResult {
  std::vector<SemanticConcept> concepts;  // entity order, entities without hypernyms dropped
  std::vector<std::string> warnings;
};

/// Hyponym prompt, then hypernym prompt, per entity. Throws
/// PreconditionViolation (no entities), GuardrailViolation, EmptyAbstraction.
ConceptResult stage2_abstract_concepts(const std::vector<DomainEntity>& entities, llm::LlmClient& client,
                                       const Context& ctx);

struct ClassifyResult {
  std::vector<LabelPrediction> candidates;   // every in-vocabulary label, ranked
  std::vector<LabelPrediction> predictions;  // candidates surviving the threshold
  std::size_t unknown_labels = 0;
  std::vector<std::string> warnings;
};

/// Keeps candidates with confidence * 100 >= threshold and re-ranks them.
std::vector<LabelPrediction> apply_threshold(std::vector<LabelPrediction> candidates, int threshold_percent);

/// `statement` feeds the `{statement}` placeholder. Throws
/// PreconditionViolation (empty vocabulary) and GuardrailViolation.
ClassifyResult stage3_classify(const std::vector<SemanticConcept>& concepts, std::string_view statement,
                               const cti::Vocabulary& vocabulary, const PromptStrategy& strategy,
                               llm::LlmClient& client, const Context& ctx);

/// Stage 2 output fed straight to threshold filtering: a technique is a
/// candidate when a concept term names it; confidence is the concept's.
ClassifyResult baseline_semantic_only(const std::vector<SemanticConcept>& concepts,
                                      const cti::Vocabulary& vocabulary, int threshold_percent);

/// Raw candidate CLIPS source, markdown fences removed. Throws
/// PreconditionViolation when no concept has a hypernym and
/// GuardrailViolation for an empty completion.
std::string generate_clips_source(const std::vector<SemanticConcept>& concepts,
                                  const std::vector<cti::NetworkArtifact>& artifacts, llm::LlmClient& client,
                                  const Context& ctx);

struct StatementAnalysis {
  std::vector<DomainEntity> entities;
  std::vector<SemanticConcept> concepts;
  ClassifyResult classification;
  std::vector<std::string> warnings;
};

/// Called between abstraction and classification, also when no concepts
/// were produced.
using ConceptHook = std::function<void(const std::vector<SemanticConcept>&)>;

/// Runs the stages the strategy needs. Missing entities or an empty
/// abstraction are recorded as warnings and classification proceeds
/// without concepts.
StatementAnalysis analyze_statement(std::string_view statement, const cti::Vocabulary& vocabulary,
                                    const PromptStrategy& strategy, llm::LlmClient& client, const Context& ctx,
                                    const ConceptHook& after_concepts = {});

bool needs_concepts(const PromptStrategy& strategy);

void to_json(nlohmann::json& j, const DomainEntity& entity);
void from_json(const nlohmann::json& j, DomainEntity& entity);
void to_json(nlohmann::json& j, const SemanticConcept& concept_);
void from_json(const nlohmann::json& j, SemanticConcept& concept_);
void to_json(nlohmann::json& j, const ClassifyResult& result);
void to_json(nlohmann::json& j, const StatementAnalysis& analysis);

}  // namespace sif::semantic
