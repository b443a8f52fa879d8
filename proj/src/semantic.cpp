#include "sif/semantic.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "sif/error.hpp"

namespace sif::semantic {
namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view text) {
  auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(begin, end - begin + 1));
}

std::string strip_bullet(std::string line) {
  if (line.rfind("\xE2\x80\xA2", 0) == 0) return trim(line.substr(3));  // UTF-8 bullet
  if (!line.empty() && (line[0] == '-' || line[0] == '*')) return trim(line.substr(1));
  std::size_t digits = 0;
  while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
  if (digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) {
    return trim(line.substr(digits + 1));
  }
  return line;
}

std::string audit(std::string_view raw) {
  constexpr std::size_t limit = 400;
  std::string text(raw.substr(0, limit));
  if (raw.size() > limit) text += "...";
  return "raw completion: \"" + text + "\"";
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += (out.empty() ? "" : "\n") + l;
  return out.empty() ? "none" : out;
}

std::string join_terms(const std::set<std::string>& terms) {
  std::string out;
  for (const auto& t : terms) out += (out.empty() ? "" : "; ") + t;
  return out;
}

std::string vocabulary_block(const cti::Vocabulary& vocabulary) {
  std::vector<std::string> lines;
  for (const auto& id : vocabulary.ids()) lines.push_back(id.value() + "\t" + vocabulary.name(id));
  return join_lines(lines);
}

struct RelationBlocks {
  std::string entities, hyponyms, hypernyms;
};

RelationBlocks relation_blocks(const std::vector<SemanticConcept>& concepts, bool with_hyponyms, bool with_hypernyms) {
  std::vector<std::string> entities, hypo, hyper;
  for (const auto& c : concepts) {
    entities.push_back(c.entity.surface);
    if (with_hyponyms && !c.hyponyms.empty()) hypo.push_back(c.entity.surface + ": " + join_terms(c.hyponyms));
    if (with_hypernyms && !c.hypernyms.empty()) hyper.push_back(c.entity.surface + ": " + join_terms(c.hypernyms));
  }
  return {join_lines(entities), join_lines(hypo), join_lines(hyper)};
}

std::string memory_for(const Context& ctx, const std::string& entity) {
  if (!ctx.memory) return "";
  auto text = ctx.memory(entity);
  return text.empty() ? "" : "<memory>\n" + text + "\n</memory>\n";
}

std::set<std::string> names_of(const std::vector<Record>& records) {
  std::set<std::string> out;
  for (const auto& r : records) out.insert(r.name);
  return out;
}

// word-boundary containment, case-insensitive
bool mentions(const std::string& haystack, const std::string& needle) {
  if (needle.size() < 3) return haystack == needle;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) {
    bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(haystack[pos - 1]));
    auto after = pos + needle.size();
    bool right = after == haystack.size() || !std::isalnum(static_cast<unsigned char>(haystack[after]));
    if (left && right) return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::ZeroShot: return "zero-shot";
    case StrategyKind::FewShot: return "few-shot";
    case StrategyKind::ChainOfThought: return "cot";
    case StrategyKind::ThreeStage: return "three-stage";
  }
  return "three-stage";
}

std::string_view to_string(Augmentation augmentation) {
  switch (augmentation) {
    case Augmentation::None: return "none";
    case Augmentation::Hyponyms: return "hyponyms";
    case Augmentation::Hypernyms: return "hypernyms";
  }
  return "none";
}

std::optional<StrategyKind> strategy_kind_from_string(std::string_view text) {
  for (auto k : {StrategyKind::ZeroShot, StrategyKind::FewShot, StrategyKind::ChainOfThought, StrategyKind::ThreeStage})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

std::optional<Augmentation> augmentation_from_string(std::string_view text) {
  for (auto a : {Augmentation::None, Augmentation::Hyponyms, Augmentation::Hypernyms})
    if (to_string(a) == text) return a;
  return std::nullopt;
}

ParsedRecords parse_records(std::string_view completion) {
  ParsedRecords out;
  auto whole = trim(completion);
  if (lower(whole) == "none") {
    out.explicit_none = true;
    return out;
  }
  std::istringstream in{std::string(completion)};
  for (std::string line; std::getline(in, line);) {
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) continue;
    auto name = cti::normalize_whitespace(strip_bullet(trim(line.substr(0, tab))));
    auto field = trim(line.substr(tab + 1));
    if (name.empty()) continue;
    double confidence = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), confidence);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(confidence)) {
      out.warnings.push_back("non-numeric confidence '" + field + "' for '" + name + "' read as 0");
      confidence = 0.0;
    }
    out.records.push_back({name, std::clamp(confidence, 0.0, 1.0)});
  }
  return out;
}

EntityResult stage1_extract_entities(std::string_view statement, llm::LlmClient& client, const Context& ctx) {
  if (cti::normalize_whitespace(statement).empty()) {
    throw Error(ErrorCode::PreconditionViolation, "statement text is empty");
  }
  auto raw = client.complete(render_prompt(ctx.templates.entities, {{"statement", std::string(statement)}}), ctx.decoding);
  auto parsed = parse_records(raw);
  if (parsed.records.empty() && !parsed.explicit_none) {
    throw Error(ErrorCode::GuardrailViolation, "entity extraction returned no records; " + audit(raw));
  }
  EntityResult result{{}, parsed.warnings};
  const auto haystack = lower(statement);
  for (const auto& record : parsed.records) {
    auto pos = haystack.find(lower(record.name));
    if (pos == std::string::npos) {
      result.warnings.push_back("entity '" + record.name + "' does not occur in the statement; dropped");
      continue;
    }
    DomainEntity entity{std::string(statement.substr(pos, record.name.size())), pos, pos + record.name.size()};
    if (std::find(result.entities.begin(), result.entities.end(), entity) == result.entities.end()) {
      result.entities.push_back(std::move(entity));
    }
  }
  return result;
}

ConceptResult stage2_abstract_concepts(const std::vector<DomainEntity>& entities, llm::LlmClient& client,
                                       const Context& ctx) {
  if (entities.empty()) throw Error(ErrorCode::PreconditionViolation, "no entities to abstract");
  ConceptResult result;
  for (const auto& entity : entities) {
    const auto memory = memory_for(ctx, entity.surface);
    auto hypo_raw = client.complete(
        render_prompt(ctx.templates.hyponyms, {{"entity", entity.surface}, {"context", memory}}), ctx.decoding);
    auto hypo = parse_records(hypo_raw);
    if (hypo.records.empty() && !hypo.explicit_none) {
      throw Error(ErrorCode::GuardrailViolation, "hyponym prompt for '" + entity.surface + "' returned no records; " +
                                                     audit(hypo_raw));
    }
    auto hyponyms = names_of(hypo.records);

    std::vector<std::string> listed(hyponyms.begin(), hyponyms.end());
    auto hyper_raw = client.complete(render_prompt(ctx.templates.hypernyms, {{"entity", entity.surface},
                                                                            {"context", memory},
                                                                            {"hyponyms", join_lines(listed)}}),
                                     ctx.decoding);
    auto hyper = parse_records(hyper_raw);
    if (hyper.records.empty() && !hyper.explicit_none) {
      throw Error(ErrorCode::GuardrailViolation, "hypernym prompt for '" + entity.surface + "' returned no records; " +
                                                     audit(hyper_raw));
    }
    result.warnings.insert(result.warnings.end(), hypo.warnings.begin(), hypo.warnings.end());
    result.warnings.insert(result.warnings.end(), hyper.warnings.begin(), hyper.warnings.end());

    SemanticConcept concept_{entity, {}, names_of(hyper.records), 0.0};
    for (const auto& term : hyponyms) {
      if (concept_.hypernyms.count(term)) {
        result.warnings.push_back("'" + term + "' listed as both hyponym and hypernym of '" + entity.surface +
                                  "'; kept as hypernym");
      } else {
        concept_.hyponyms.insert(term);
      }
    }
    for (const auto& r : hyper.records) concept_.confidence = std::max(concept_.confidence, r.confidence);
    if (concept_.hypernyms.empty()) {
      result.warnings.push_back("entity '" + entity.surface + "' has no hypernym; dropped");
      continue;
    }
    result.concepts.push_back(std::move(concept_));
  }
  if (result.concepts.empty()) throw Error(ErrorCode::EmptyAbstraction, "no entity yielded a hypernym");
  return result;
}

std::vector<LabelPrediction> apply_threshold(std::vector<LabelPrediction> candidates, int threshold_percent) {
  // the epsilon keeps 0.5 * 100 from falling under 50 through rounding
  std::erase_if(candidates,
                [&](const LabelPrediction& p) { return p.confidence * 100.0 + 1e-9 < static_cast<double>(threshold_percent); });
  rank_predictions(candidates);
  return candidates;
}

namespace {

ClassifyResult finish(std::map<std::string, double> best, std::size_t unknown, std::vector<std::string> warnings,
                      int threshold_percent) {
  ClassifyResult result;
  for (const auto& [label, confidence] : best) result.candidates.push_back({label, confidence, 0});
  rank_predictions(result.candidates);
  result.predictions = apply_threshold(result.candidates, threshold_percent);
  result.unknown_labels = unknown;
  result.warnings = std::move(warnings);
  return result;
}

}  // namespace

ClassifyResult stage3_classify(const std::vector<SemanticConcept>& concepts, std::string_view statement,
                               const cti::Vocabulary& vocabulary, const PromptStrategy& strategy,
                               llm::LlmClient& client, const Context& ctx) {
  if (vocabulary.empty()) throw Error(ErrorCode::PreconditionViolation, "empty technique vocabulary");
  if (strategy.threshold_percent < 0 || strategy.threshold_percent > 100) {
    throw Error(ErrorCode::PreconditionViolation, "threshold must be within 0..100");
  }
  const bool three_stage = strategy.kind == StrategyKind::ThreeStage;
  auto blocks = relation_blocks(concepts, three_stage || strategy.augmentation == Augmentation::Hyponyms,
                                three_stage || strategy.augmentation == Augmentation::Hypernyms);
  auto prompt = render_prompt(ctx.templates.classify_for(strategy.kind),
                              {{"statement", std::string(statement)},
                               {"entities", blocks.entities},
                               {"hyponyms", blocks.hyponyms},
                               {"hypernyms", blocks.hypernyms},
                               {"vocabulary", vocabulary_block(vocabulary)},
                               {"threshold", std::to_string(strategy.threshold_percent)}});
  auto raw = client.complete(prompt, ctx.decoding);
  auto parsed = parse_records(raw);
  if (parsed.records.empty() && !parsed.explicit_none) {
    throw Error(ErrorCode::GuardrailViolation, "classification returned no records; " + audit(raw));
  }
  std::map<std::string, double> best;
  std::size_t unknown = 0;
  for (const auto& r : parsed.records) {
    auto id = cti::TechniqueId::parse(r.name);
    if (!id || !vocabulary.contains(*id)) {
      ++unknown;
      parsed.warnings.push_back("UnknownLabel: '" + r.name + "' dropped");
      continue;
    }
    auto [it, inserted] = best.emplace(id->value(), r.confidence);
    if (!inserted) it->second = std::max(it->second, r.confidence);
  }
  return finish(std::move(best), unknown, std::move(parsed.warnings), strategy.threshold_percent);
}

ClassifyResult baseline_semantic_only(const std::vector<SemanticConcept>& concepts, const cti::Vocabulary& vocabulary,
                                      int threshold_percent) {
  if (vocabulary.empty()) throw Error(ErrorCode::PreconditionViolation, "empty technique vocabulary");
  std::map<std::string, double> best;
  for (const auto& id : vocabulary.ids()) {
    const auto name = lower(vocabulary.name(id));
    for (const auto& c : concepts) {
      std::set<std::string> terms = c.hypernyms;
      terms.insert(c.hyponyms.begin(), c.hyponyms.end());
      bool hit = std::any_of(terms.begin(), terms.end(), [&](const std::string& t) {
        auto term = lower(t);
        return mentions(name, term) || mentions(term, name);
      });
      if (!hit) continue;
      auto [it, inserted] = best.emplace(id.value(), c.confidence);
      if (!inserted) it->second = std::max(it->second, c.confidence);
    }
  }
  return finish(std::move(best), 0, {}, threshold_percent);
}

std::string generate_clips_source(const std::vector<SemanticConcept>& concepts,
                                  const std::vector<cti::NetworkArtifact>& artifacts, llm::LlmClient& client,
                                  const Context& ctx) {
  if (std::none_of(concepts.begin(), concepts.end(), [](const SemanticConcept& c) { return !c.hypernyms.empty(); })) {
    throw Error(ErrorCode::PreconditionViolation, "CLIPS generation needs at least one hypernym");
  }
  std::vector<std::string> artifact_lines;
  for (const auto& a : artifacts) artifact_lines.push_back(std::string(cti::to_string(a.kind)) + "\t" + a.value);
  auto blocks = relation_blocks(concepts, false, true);
  auto raw = client.complete(render_prompt(ctx.templates.clips, {{"entities", blocks.entities},
                                                                  {"hypernyms", blocks.hypernyms},
                                                                  {"artifacts", join_lines(artifact_lines)}}),
                             ctx.decoding);
  std::string source;
  std::istringstream in(raw);
  for (std::string line; std::getline(in, line);) {
    if (trim(line).rfind("```", 0) == 0) continue;
    source += line + "\n";
  }
  if (trim(source).empty()) throw Error(ErrorCode::GuardrailViolation, "CLIPS generation returned no source");
  return source;
}

bool needs_concepts(const PromptStrategy& strategy) {
  return strategy.kind == StrategyKind::ThreeStage || strategy.augmentation != Augmentation::None;
}

StatementAnalysis analyze_statement(std::string_view statement, const cti::Vocabulary& vocabulary,
                                    const PromptStrategy& strategy, llm::LlmClient& client, const Context& ctx,
                                    const ConceptHook& after_concepts) {
  StatementAnalysis analysis;
  auto note = [&](const std::vector<std::string>& ws) {
    analysis.warnings.insert(analysis.warnings.end(), ws.begin(), ws.end());
  };
  if (needs_concepts(strategy)) {
    auto entities = stage1_extract_entities(statement, client, ctx);
    note(entities.warnings);
    analysis.entities = entities.entities;
    if (analysis.entities.empty()) {
      analysis.warnings.push_back("no entities; classifying without concepts");
    } else {
      try {
        auto concepts = stage2_abstract_concepts(analysis.entities, client, ctx);
        note(concepts.warnings);
        analysis.concepts = std::move(concepts.concepts);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyAbstraction) throw;
        analysis.warnings.push_back(e.what());
      }
    }
  }
  if (after_concepts) after_concepts(analysis.concepts);
  analysis.classification = stage3_classify(analysis.concepts, statement, vocabulary, strategy, client, ctx);
  note(analysis.classification.warnings);
  return analysis;
}

}  // namespace sif::semantic
