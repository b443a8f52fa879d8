#include "sif/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "sif/error.hpp"

namespace sif::pipeline {
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string lower(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  return text;
}

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::ConfigError, message); }

void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      config_error("unknown key '" + key + "' in " + where);
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(text);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

template <class T>
T get(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error(where + "." + key + " has the wrong type");
  }
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string describe(const clips::Diagnostic& d) {
  return std::string(clips::to_string(d.code)) + " at " + std::to_string(d.line) + ":" + std::to_string(d.column) +
         ": " + d.message;
}

}  // namespace

std::string report_directory(const std::string& id) {
  std::string out;
  for (unsigned char c : id) out += (std::isalnum(c) || c == '.' || c == '_' || c == '-') ? static_cast<char>(c) : '_';
  if (out.empty() || out == "." || out == "..") out = "report";
  return out;
}

std::string_view to_string(cti::Schema schema) { return schema == cti::Schema::DatasetA ? "a" : "b"; }

std::optional<cti::Schema> schema_from_string(std::string_view text) {
  if (text == "a") return cti::Schema::DatasetA;
  if (text == "b") return cti::Schema::DatasetB;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Config

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  check_keys(j, "config",
             {"corpus", "schema", "vocabulary", "prompts", "registry", "strategy", "backend", "decoding", "graph",
              "max_cycles", "k", "out", "offline"});
  PipelineConfig c;
  if (j.contains("corpus")) c.corpus = resolve(base_dir, get<std::string>(j, "corpus", "config"));
  if (j.contains("schema")) {
    auto schema = schema_from_string(get<std::string>(j, "schema", "config"));
    if (!schema) config_error("schema must be 'a' or 'b'");
    c.schema = *schema;
  }
  if (j.contains("vocabulary")) c.vocabulary = resolve(base_dir, get<std::string>(j, "vocabulary", "config"));
  if (j.contains("prompts")) c.prompts = resolve(base_dir, get<std::string>(j, "prompts", "config"));
  if (j.contains("registry")) c.registry = resolve(base_dir, get<std::string>(j, "registry", "config"));
  if (j.contains("out")) c.out = resolve(base_dir, get<std::string>(j, "out", "config"));
  if (j.contains("max_cycles")) c.max_cycles = get<std::size_t>(j, "max_cycles", "config");
  if (j.contains("k")) c.k = get<std::size_t>(j, "k", "config");
  if (j.contains("offline")) c.offline = get<bool>(j, "offline", "config");

  if (j.contains("strategy")) {
    const auto& s = j["strategy"];
    check_keys(s, "strategy", {"kind", "augment", "threshold"});
    if (s.contains("kind")) {
      auto kind = semantic::strategy_kind_from_string(get<std::string>(s, "kind", "strategy"));
      if (!kind) config_error("strategy.kind must be zero-shot, few-shot, cot or three-stage");
      c.strategy.kind = *kind;
    }
    if (s.contains("augment")) {
      auto augment = semantic::augmentation_from_string(get<std::string>(s, "augment", "strategy"));
      if (!augment) config_error("strategy.augment must be none, hyponyms or hypernyms");
      c.strategy.augmentation = *augment;
    }
    if (s.contains("threshold")) c.strategy.threshold_percent = get<int>(s, "threshold", "strategy");
  }

  if (j.contains("backend")) {
    const auto& b = j["backend"];
    check_keys(b, "backend", {"type", "transcript", "endpoint", "model", "api_key_env", "timeout_seconds"});
    auto type = b.contains("type") ? get<std::string>(b, "type", "backend") : "mock";
    if (type == "mock") {
      c.backend.kind = BackendKind::ScriptedMock;
    } else if (type == "http") {
      c.backend.kind = BackendKind::Http;
    } else {
      config_error("backend.type must be 'mock' or 'http'");
    }
    if (b.contains("transcript")) c.backend.transcript = resolve(base_dir, get<std::string>(b, "transcript", "backend"));
    if (b.contains("endpoint")) c.backend.endpoint = get<std::string>(b, "endpoint", "backend");
    if (b.contains("model")) c.backend.model = get<std::string>(b, "model", "backend");
    if (b.contains("api_key_env")) c.backend.api_key_env = get<std::string>(b, "api_key_env", "backend");
    if (b.contains("timeout_seconds")) c.backend.timeout_seconds = get<int>(b, "timeout_seconds", "backend");
  }

  if (j.contains("decoding")) {
    const auto& d = j["decoding"];
    check_keys(d, "decoding", {"seed", "greedy", "max_tokens", "temperature"});
    if (d.contains("seed")) c.decoding.seed = get<std::uint64_t>(d, "seed", "decoding");
    if (d.contains("greedy")) c.decoding.greedy = get<bool>(d, "greedy", "decoding");
    if (d.contains("max_tokens")) c.decoding.max_tokens = get<int>(d, "max_tokens", "decoding");
    if (d.contains("temperature") && !d["temperature"].is_null()) {
      c.decoding.temperature = get<double>(d, "temperature", "decoding");
    }
  }

  if (j.contains("graph")) {
    const auto& g = j["graph"];
    check_keys(g, "graph", {"stability", "retention_floor", "memory_depth"});
    if (g.contains("stability")) c.graph.default_stability = get<double>(g, "stability", "graph");
    if (g.contains("retention_floor")) c.graph.retention_floor = get<double>(g, "retention_floor", "graph");
    if (g.contains("memory_depth")) c.memory_depth = get<int>(g, "memory_depth", "graph");
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json backend_json;
  if (backend.kind == BackendKind::ScriptedMock) {
    backend_json = {{"type", "mock"}, {"transcript", backend.transcript.generic_string()}};
  } else {
    backend_json = {{"type", "http"},
                    {"endpoint", backend.endpoint},
                    {"model", backend.model},
                    {"api_key_env", backend.api_key_env},
                    {"timeout_seconds", backend.timeout_seconds}};
  }
  nlohmann::json j = {
      {"corpus", corpus.generic_string()},
      {"schema", to_string(schema)},
      {"vocabulary", vocabulary.generic_string()},
      {"strategy",
       {{"kind", semantic::to_string(strategy.kind)},
        {"augment", semantic::to_string(strategy.augmentation)},
        {"threshold", strategy.threshold_percent}}},
      {"backend", backend_json},
      {"decoding",
       {{"seed", decoding.seed},
        {"greedy", decoding.greedy},
        {"max_tokens", decoding.max_tokens},
        {"temperature", decoding.temperature ? nlohmann::json(*decoding.temperature) : nlohmann::json()}}},
      {"graph",
       {{"stability", graph.default_stability},
        {"retention_floor", graph.retention_floor},
        {"memory_depth", memory_depth}}},
      {"max_cycles", max_cycles},
      {"k", k},
      {"out", out.generic_string()},
      {"offline", offline},
  };
  if (prompts) j["prompts"] = prompts->generic_string();
  if (registry) j["registry"] = registry->generic_string();
  return j;
}

void PipelineConfig::validate() const {
  auto need = [](const fs::path& p, const char* what) {
    if (p.empty()) config_error(std::string(what) + " is not set");
    if (!fs::exists(p)) config_error(std::string(what) + " not found: " + p.string());
  };
  need(corpus, "corpus");
  need(vocabulary, "vocabulary");
  if (prompts) need(*prompts, "prompts directory");
  if (registry) need(*registry, "registry");
  if (offline && backend.kind != BackendKind::ScriptedMock) config_error("--offline requires the mock backend");
  if (backend.kind == BackendKind::ScriptedMock) need(backend.transcript, "mock transcript");
  if (backend.kind == BackendKind::Http && (backend.endpoint.empty() || backend.model.empty())) {
    config_error("http backend needs endpoint and model");
  }
  if (strategy.threshold_percent < 0 || strategy.threshold_percent > 100) config_error("threshold must be 0-100");
  if (k < 1) config_error("k must be at least 1");
  if (max_cycles < 1) config_error("max_cycles must be at least 1");
  if (!(graph.default_stability > 0.0)) config_error("graph.stability must be positive");
  if (!(graph.retention_floor >= 0.0 && graph.retention_floor < 1.0)) config_error("graph.retention_floor must be in [0,1)");
  if (memory_depth < 0) config_error("graph.memory_depth must be >= 0");
  try {
    decoding.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
}

std::string PipelineConfig::hash() const { return llm::prompt_hash(to_json().dump()); }

std::unique_ptr<llm::LlmClient> make_client(const PipelineConfig& config) {
  if (config.backend.kind == BackendKind::ScriptedMock) {
    return std::make_unique<llm::ScriptedMock>(llm::ScriptedMock::load(config.backend.transcript));
  }
  if (config.offline) config_error("--offline requires the mock backend");
  std::string key;
  if (!config.backend.api_key_env.empty()) {
    if (const char* value = std::getenv(config.backend.api_key_env.c_str())) key = value;
  }
  return std::make_unique<llm::HttpClient>(config.backend.endpoint, config.backend.model, key,
                                           config.backend.timeout_seconds);
}

semantic::PromptTemplates load_templates(const PipelineConfig& config) {
  return config.prompts ? semantic::PromptTemplates::load(*config.prompts) : semantic::PromptTemplates::builtin();
}

refine::CapabilityRegistry load_registry(const PipelineConfig& config) {
  return config.registry ? refine::CapabilityRegistry::load(*config.registry) : refine::CapabilityRegistry::builtin();
}

// ---------------------------------------------------------------------------
// Stages

ReportExtraction extract_report(const cti::CtiReport& report, const cti::Vocabulary& vocabulary,
                                const semantic::PromptStrategy& strategy, llm::LlmClient& client,
                                const semantic::Context& ctx, const semantic::ConceptHook& after_concepts) {
  ReportExtraction out;
  out.report_id = report.id;
  out.artifacts = report.artifacts;
  out.semantic_stage = semantic::needs_concepts(strategy);

  std::vector<cti::Statement> units = report.statements;
  if (units.empty() && report.synopsis) units.push_back({*report.synopsis, {}});

  std::set<std::string> seen;
  for (std::size_t i = 0; i < units.size(); ++i) {
    StatementRecord record;
    record.id = report.id + "#" + std::to_string(i + 1);
    record.text = units[i].text;
    for (const auto& label : units[i].gold_labels) record.gold.insert(label.value());
    record.analysis = semantic::analyze_statement(record.text, vocabulary, strategy, client, ctx, after_concepts);
    for (const auto& c : record.analysis.concepts) {
      if (seen.insert(lower(c.entity.surface)).second) out.concepts.push_back(c);
    }
    for (const auto& w : record.analysis.warnings) out.warnings.push_back(record.id + ": " + w);
    out.statements.push_back(std::move(record));
  }
  return out;
}

nlohmann::json to_json(const ReportExtraction& extraction) {
  auto statements = nlohmann::json::array();
  for (const auto& s : extraction.statements) {
    statements.push_back({{"id", s.id}, {"text", s.text}, {"gold", s.gold}, {"analysis", s.analysis}});
  }
  return {{"report_id", extraction.report_id},
          {"semantic_stage", extraction.semantic_stage},
          {"artifacts", extraction.artifacts},
          {"concepts", extraction.concepts},
          {"statements", statements},
          {"warnings", extraction.warnings}};
}

ReportExtraction extraction_from_json(const nlohmann::json& j) {
  ReportExtraction out;
  auto ranked = [](const nlohmann::json& list) {
    std::vector<LabelPrediction> predictions;
    for (const auto& p : list) {
      predictions.push_back({p.at("label").get<std::string>(), p.at("confidence").get<double>(), 0});
    }
    rank_predictions(predictions);
    return predictions;
  };
  try {
    out.report_id = j.at("report_id").get<std::string>();
    out.semantic_stage = j.value("semantic_stage", false);
    for (const auto& a : j.at("artifacts")) {
      auto kind = cti::artifact_kind_from_string(a.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::MalformedContainer, "unknown artifact kind " + a.at("kind").dump());
      cti::NetworkArtifact artifact{*kind, a.at("value").get<std::string>(), std::nullopt};
      if (a.contains("defanged_original")) artifact.defanged_original = a["defanged_original"].get<std::string>();
      out.artifacts.push_back(std::move(artifact));
    }
    out.concepts = j.at("concepts").get<std::vector<semantic::SemanticConcept>>();
    for (const auto& s : j.at("statements")) {
      StatementRecord record;
      record.id = s.at("id").get<std::string>();
      record.text = s.at("text").get<std::string>();
      record.gold = s.at("gold").get<std::set<std::string>>();
      const auto& analysis = s.at("analysis");
      record.analysis.entities = analysis.at("entities").get<std::vector<semantic::DomainEntity>>();
      record.analysis.concepts = analysis.at("concepts").get<std::vector<semantic::SemanticConcept>>();
      record.analysis.classification.candidates = ranked(analysis.at("classification").at("candidates"));
      record.analysis.classification.predictions = ranked(analysis.at("classification").at("predictions"));
      out.statements.push_back(std::move(record));
    }
    if (j.contains("warnings")) out.warnings = j["warnings"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedContainer, std::string("extraction: ") + e.what());
  }
  return out;
}

std::vector<StatementPrediction> predictions_of(const ReportExtraction& extraction) {
  std::vector<StatementPrediction> out;
  for (const auto& s : extraction.statements) out.push_back({s.id, s.gold, s.analysis.classification.predictions});
  return out;
}

std::vector<std::string> verify_rules_text(std::string_view rules_text) {
  std::vector<std::string> problems;
  std::istringstream in{std::string(rules_text)};
  int number = 0;
  for (std::string line; std::getline(in, line);) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    for (const auto& e : refine::verify_syntax(line)) {
      problems.push_back("line " + std::to_string(number) + ": " + std::string(refine::to_string(e.code)) + ": " +
                         e.message);
    }
  }
  return problems;
}

RuleBuild build_rules(const std::string& report_id, std::string_view clips_source,
                      const refine::CapabilityRegistry& registry, std::size_t max_cycles) {
  RuleBuild build;
  auto parsed = clips::parse(clips_source);
  build.diagnostics = parsed.diagnostics;
  if (parsed.program) {
    auto more = clips::validate(*parsed.program);
    build.diagnostics.insert(build.diagnostics.end(), more.begin(), more.end());
  }
  if (clips::has_errors(build.diagnostics)) {
    std::size_t errors = std::count_if(build.diagnostics.begin(), build.diagnostics.end(),
                                       [](const clips::Diagnostic& d) { return d.severity == clips::Severity::Error; });
    auto first = std::find_if(build.diagnostics.begin(), build.diagnostics.end(),
                              [](const clips::Diagnostic& d) { return d.severity == clips::Severity::Error; });
    build.failed_stage = "validate";
    build.error = std::to_string(errors) + " error diagnostic(s); first: " + describe(*first);
    return build;
  }
  for (const auto& d : build.diagnostics) build.warnings.push_back(describe(d));

  try {
    build.trace = clips::run(*parsed.program, {}, max_cycles);
  } catch (const Error& e) {
    build.failed_stage = "execute";
    build.error = e.what();
    return build;
  }
  for (const auto& d : build.trace->diagnostics) build.warnings.push_back(describe(d));
  if (build.trace->cycle_limit_exceeded) {
    build.warnings.push_back("cycle limit of " + std::to_string(max_cycles) + " reached");
  }

  std::vector<refine::SecurityCapability> capabilities;
  for (const auto& c : build.trace->capabilities) {
    refine::SecurityCapability capability{c.name, {}, {report_id, c.rule}};
    for (const auto& [name, value] : c.params) capability.parameters[name] = clips::value_text(value);
    capabilities.push_back(std::move(capability));
  }
  try {
    build.refinement = refine::refine(capabilities, registry);
  } catch (const Error& e) {
    build.failed_stage = "refine";
    build.error = e.what();
    return build;
  }
  for (const auto& w : build.refinement.warnings) {
    build.warnings.push_back(w.code + ": " + w.capability + ": " + w.message);
  }
  build.rules_text = refine::rules_text(build.refinement);
  build.syntax_errors = verify_rules_text(build.rules_text);
  if (!build.syntax_errors.empty()) {
    build.failed_stage = "verify";
    build.error = build.syntax_errors.front();
  }
  return build;
}

std::vector<std::string> update_graph(kg::KnowledgeGraph& graph, const std::vector<semantic::SemanticConcept>& concepts,
                                      kg::Timestamp now) {
  std::vector<std::string> warnings;
  auto link = [&](const std::string& child, const std::string& parent) {
    if (child == parent) return;
    try {
      graph.link(child, parent);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CycleError) throw;
      warnings.push_back(std::string(e.what()) + " (link skipped)");
    }
  };
  for (const auto& c : concepts) {
    auto entity = lower(c.entity.surface);
    graph.insert_concept(entity, now);
    for (const auto& h : c.hypernyms) {
      graph.insert_concept(lower(h), now);
      link(entity, lower(h));
    }
    for (const auto& h : c.hyponyms) {
      graph.insert_concept(lower(h), now);
      link(lower(h), entity);
    }
  }
  return warnings;
}

// ---------------------------------------------------------------------------
// Full run

std::size_t RunManifest::failed() const {
  return static_cast<std::size_t>(std::count_if(reports.begin(), reports.end(), [](const auto& r) { return !r.ok; }));
}

nlohmann::json RunManifest::to_json(bool with_timing) const {
  auto list = nlohmann::json::array();
  nlohmann::json stage_ms = nlohmann::json::object();
  for (const auto& r : reports) {
    list.push_back({{"report_id", r.report_id},
                    {"directory", r.directory},
                    {"status", r.ok ? "ok" : "failed"},
                    {"failed_stage", r.failed_stage ? nlohmann::json(*r.failed_stage) : nlohmann::json()},
                    {"error", r.error},
                    {"statements", r.statements},
                    {"entities", r.entities},
                    {"concepts", r.concepts},
                    {"clips_diagnostics", {{"errors", r.clips_errors}, {"warnings", r.clips_warnings}}},
                    {"firings", r.firings},
                    {"capabilities", r.capabilities},
                    {"rules_emitted", r.rules},
                    {"warnings", r.warnings}});
    stage_ms[r.report_id] = r.stage_ms;
  }
  nlohmann::json j = {{"config_hash", config_hash},
                      {"config", config},
                      {"reports", list},
                      {"ingest_warnings", ingest_warnings},
                      {"summary", {{"reports", reports.size()}, {"failed", failed()}}}};
  if (with_timing) j["timing"] = {{"wall_ms", wall_ms}, {"stage_ms", stage_ms}};
  return j;
}

fs::path next_run_dir(const fs::path& out) {
  fs::create_directories(out);
  int highest = 0;
  for (const auto& entry : fs::directory_iterator(out)) {
    auto name = entry.path().filename().string();
    if (name.size() == 8 && name.rfind("run-", 0) == 0 &&
        std::all_of(name.begin() + 4, name.end(), [](unsigned char c) { return std::isdigit(c); })) {
      highest = std::max(highest, std::stoi(name.substr(4)));
    }
  }
  for (int n = highest + 1;; ++n) {
    char name[16];
    std::snprintf(name, sizeof name, "run-%04d", n);
    if (fs::create_directory(out / name)) return out / name;
  }
}

RunManifest run_pipeline(const PipelineConfig& config) {
  config.validate();
  auto client = make_client(config);
  return run_pipeline(config, *client);
}

RunManifest run_pipeline(const PipelineConfig& config, llm::LlmClient& client) {
  auto started = Clock::now();
  config.validate();
  auto vocabulary = cti::Vocabulary::load(config.vocabulary);
  auto templates = load_templates(config);
  auto registry = load_registry(config);
  auto corpus = cti::load_corpus(config.corpus, config.schema, vocabulary);

  RunManifest manifest;
  manifest.config = config.to_json();
  manifest.config_hash = config.hash();
  manifest.ingest_warnings = corpus.warnings;
  manifest.run_dir = next_run_dir(config.out);
  fs::create_directories(manifest.run_dir / "reports");

  kg::KnowledgeGraph graph(config.graph);
  semantic::Context ctx{config.decoding, templates, {}};
  if (config.memory_depth > 0) {
    ctx.memory = [&graph, depth = config.memory_depth](const std::string& entity) {
      auto label = lower(entity);
      if (!graph.contains(label)) return std::string();
      std::string text;
      for (const auto& r : graph.retrieve(label, depth)) {
        if (r.label == label) continue;
        text += (text.empty() ? "" : "\n") + r.label + "\t" + std::to_string(r.semantic_distance);
      }
      return text;
    };
  }

  std::vector<StatementPrediction> predictions;
  std::set<std::string> used_dirs;
  for (std::size_t i = 0; i < corpus.reports.size(); ++i) {
    const auto& report = corpus.reports[i];
    const kg::Timestamp tick = static_cast<double>(i + 1);
    ReportOutcome outcome;
    outcome.report_id = report.id;
    auto dir_name = report_directory(report.id);
    for (int n = 2; !used_dirs.insert(dir_name).second; ++n) dir_name = report_directory(report.id) + "-" + std::to_string(n);
    outcome.directory = "reports/" + dir_name;
    const auto dir = manifest.run_dir / outcome.directory;
    fs::create_directories(dir);
    nlohmann::json report_json = report;
    write_json(dir / "report.json", report_json);

    auto fail = [&](const std::string& stage, const std::string& error) {
      outcome.ok = false;
      outcome.failed_stage = stage;
      outcome.error = error;
    };

    // stage timings: everything before the concept hook is semantic, the
    // rest of each statement is classification
    auto mark = Clock::now();
    auto hook = [&](const std::vector<semantic::SemanticConcept>& concepts) {
      outcome.stage_ms["semantic"] += ms_since(mark);
      auto t = Clock::now();
      auto ws = update_graph(graph, concepts, tick);
      outcome.warnings.insert(outcome.warnings.end(), ws.begin(), ws.end());
      outcome.stage_ms["knowledge-graph"] += ms_since(t);
      mark = Clock::now();
    };

    std::optional<ReportExtraction> extraction;
    try {
      extraction = extract_report(report, vocabulary, config.strategy, client, ctx, [&](const auto& concepts) {
        hook(concepts);
      });
      outcome.stage_ms["classify"] += ms_since(mark);
    } catch (const Error& e) {
      fail("extract", e.what());
    }

    if (extraction) {
      write_json(dir / "analysis.json", to_json(*extraction));
      auto own = predictions_of(*extraction);
      predictions.insert(predictions.end(), own.begin(), own.end());
      outcome.statements = extraction->statements.size();
      for (const auto& s : extraction->statements) outcome.entities += s.analysis.entities.size();
      outcome.concepts = extraction->concepts.size();
      outcome.warnings.insert(outcome.warnings.end(), extraction->warnings.begin(), extraction->warnings.end());

      if (!extraction->semantic_stage) {
        outcome.warnings.push_back("rule generation skipped: strategy runs no semantic stage");
      } else {
        std::optional<std::string> source;
        auto t = Clock::now();
        try {
          source = semantic::generate_clips_source(extraction->concepts, extraction->artifacts, client, ctx);
          write_text(dir / "program.clp", *source);
        } catch (const Error& e) {
          fail("generate", e.what());
        }
        outcome.stage_ms["generate"] = ms_since(t);

        if (source) {
          t = Clock::now();
          auto build = build_rules(report.id, *source, registry, config.max_cycles);
          outcome.stage_ms["rules"] = ms_since(t);
          write_json(dir / "diagnostics.json", clips::to_json(build.diagnostics));
          for (const auto& d : build.diagnostics) {
            (d.severity == clips::Severity::Error ? outcome.clips_errors : outcome.clips_warnings)++;
          }
          if (build.trace) {
            write_json(dir / "trace.json", clips::to_json(*build.trace));
            outcome.firings = build.trace->firings.size();
            outcome.capabilities = build.trace->capabilities.size();
          }
          if (!build.failed_stage || *build.failed_stage == "verify") {
            write_text(dir / "rules.txt", build.rules_text);
            write_json(dir / "rules.provenance.json", refine::provenance_json(build.refinement));
            outcome.rules = build.refinement.rules.size();
          }
          outcome.warnings.insert(outcome.warnings.end(), build.warnings.begin(), build.warnings.end());
          if (build.failed_stage) fail(*build.failed_stage, build.error);
        }
      }
    }
    graph.decay(tick);
    manifest.reports.push_back(std::move(outcome));
  }

  for (const auto& e : corpus.errors) {
    ReportOutcome outcome;
    outcome.report_id = e.file;
    outcome.ok = false;
    outcome.failed_stage = "ingest";
    outcome.error = e.message;
    manifest.reports.push_back(std::move(outcome));
  }

  write_json(manifest.run_dir / "knowledge_graph.json", graph.to_json());
  std::ostringstream jsonl;
  write_predictions(jsonl, predictions);
  write_text(manifest.run_dir / "predictions.jsonl", jsonl.str());
  manifest.wall_ms = ms_since(started);
  write_json(manifest.run_dir / "manifest.json", manifest.to_json());
  return manifest;
}

}  // namespace sif::pipeline
