// sif: command-line front end. Every stage reads the previous stage's files,
// so a failing step can be rerun on its own.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sif/error.hpp"
#include "sif/evaluation.hpp"
#include "sif/pipeline.hpp"

using namespace sif;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kConfigError = 2;

struct Options {
  std::string config;
  bool offline = false;
  std::string schema;
  std::string strategy;
  std::string augment;
  std::optional<int> threshold;
  std::optional<std::size_t> k;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string corpus;
  std::string vocabulary;
  std::string prompts;
  std::string registry;
  std::string transcript;
  std::string endpoint;
  std::string model;
};

void add_options(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "JSON config; flags override it");
  app->add_flag("--offline", o.offline, "replay a mock transcript, never touch the network");
  app->add_option("--schema", o.schema, "corpus container schema")->check(CLI::IsMember({"a", "b"}));
  app->add_option("--strategy", o.strategy)->check(CLI::IsMember({"zero-shot", "few-shot", "cot", "three-stage"}));
  app->add_option("--augment", o.augment)->check(CLI::IsMember({"none", "hyponyms", "hypernyms"}));
  app->add_option("--threshold", o.threshold, "confidence threshold in percent")->check(CLI::Range(0, 100));
  app->add_option("--k", o.k, "top-k cut-off");
  app->add_option("--out", o.out);
  app->add_option("--seed", o.seed);
  app->add_option("--corpus", o.corpus);
  app->add_option("--vocabulary", o.vocabulary, "technique catalogue (id<TAB>name)");
  app->add_option("--prompts", o.prompts, "directory of prompt templates");
  app->add_option("--registry", o.registry, "capability registry JSON");
  app->add_option("--transcript", o.transcript, "mock transcript JSON");
  app->add_option("--endpoint", o.endpoint, "http://host:port of a completions server");
  app->add_option("--model", o.model);
}

pipeline::PipelineConfig make_config(const Options& o) {
  auto c = o.config.empty() ? pipeline::PipelineConfig{} : pipeline::PipelineConfig::load(o.config);
  if (!o.corpus.empty()) c.corpus = o.corpus;
  if (!o.schema.empty()) c.schema = *pipeline::schema_from_string(o.schema);
  if (!o.vocabulary.empty()) c.vocabulary = o.vocabulary;
  if (c.vocabulary.empty()) c.vocabulary = fs::path(SIF_DEFAULT_DATA_DIR) / "attack_vocabulary.tsv";
  if (!o.prompts.empty()) c.prompts = fs::path(o.prompts);
  if (!o.registry.empty()) c.registry = fs::path(o.registry);
  if (!o.strategy.empty()) c.strategy.kind = *semantic::strategy_kind_from_string(o.strategy);
  if (!o.augment.empty()) c.strategy.augmentation = *semantic::augmentation_from_string(o.augment);
  if (o.threshold) c.strategy.threshold_percent = *o.threshold;
  if (o.k) c.k = *o.k;
  if (o.seed) c.decoding.seed = *o.seed;
  if (!o.out.empty()) c.out = o.out;
  if (!o.transcript.empty()) {
    c.backend.kind = pipeline::BackendKind::ScriptedMock;
    c.backend.transcript = o.transcript;
  }
  if (!o.endpoint.empty()) {
    c.backend.kind = pipeline::BackendKind::Http;
    c.backend.endpoint = o.endpoint;
  }
  if (!o.model.empty()) c.backend.model = o.model;
  if (o.offline) c.offline = true;
  return c;
}

std::unique_ptr<llm::LlmClient> client_for(const pipeline::PipelineConfig& c) {
  if (c.offline && c.backend.kind != pipeline::BackendKind::ScriptedMock) {
    throw Error(ErrorCode::ConfigError, "--offline requires a mock transcript");
  }
  if (c.backend.kind == pipeline::BackendKind::ScriptedMock && !fs::exists(c.backend.transcript)) {
    throw Error(ErrorCode::ConfigError, "mock transcript not found: " + c.backend.transcript.string());
  }
  return pipeline::make_client(c);
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream file(out, std::ios::binary);
  if (!file) throw Error(ErrorCode::IoFailure, "cannot write " + out);
  file << text;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  file << text;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedContainer, path.string() + ": " + e.what());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path required_dir(const std::string& out, const char* command) {
  if (out.empty()) throw Error(ErrorCode::ConfigError, std::string(command) + " needs --out <dir>");
  fs::create_directories(out);
  return out;
}

// Either an ingest dump ({"reports": [...]}) or a corpus path.
std::vector<cti::CtiReport> load_reports(const fs::path& input, const pipeline::PipelineConfig& c,
                                         const cti::Vocabulary& vocab) {
  if (fs::is_regular_file(input)) {
    auto j = read_json(input);
    if (j.is_object() && j.contains("reports") && j["reports"].is_array()) {
      std::vector<cti::CtiReport> reports;
      for (const auto& r : j["reports"]) reports.push_back(cti::report_from_json(r));
      return reports;
    }
  }
  auto corpus = cti::load_corpus(input, c.schema, vocab);
  for (const auto& e : corpus.errors) std::cerr << "ingest: " << e.file << ": " << e.message << "\n";
  return corpus.reports;
}

int cmd_ingest(const Options& o, const std::string& input) {
  auto c = make_config(o);
  fs::path path = input.empty() ? c.corpus : fs::path(input);
  if (path.empty()) throw Error(ErrorCode::ConfigError, "no corpus given");
  auto vocab = cti::Vocabulary::load(c.vocabulary);
  auto corpus = cti::load_corpus(path, c.schema, vocab);
  auto errors = nlohmann::json::array();
  for (const auto& e : corpus.errors) errors.push_back({{"file", e.file}, {"message", e.message}});
  nlohmann::json j = {{"reports", corpus.reports}, {"errors", errors}, {"warnings", corpus.warnings}};
  emit(o.out, j.dump(2) + "\n");
  return corpus.errors.empty() ? kOk : kPartial;
}

int cmd_extract(const Options& o, const std::string& input) {
  auto c = make_config(o);
  auto dir = required_dir(o.out, "extract");
  auto vocab = cti::Vocabulary::load(c.vocabulary);
  auto reports = load_reports(input.empty() ? c.corpus : fs::path(input), c, vocab);
  auto templates = pipeline::load_templates(c);
  auto client = client_for(c);
  semantic::Context ctx{c.decoding, templates, {}};
  kg::KnowledgeGraph graph(c.graph);

  auto list = nlohmann::json::array();
  auto failures = nlohmann::json::array();
  std::vector<StatementPrediction> predictions;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const double tick = static_cast<double>(i + 1);
    try {
      auto extraction = pipeline::extract_report(reports[i], vocab, c.strategy, *client, ctx, [&](const auto& concepts) {
        pipeline::update_graph(graph, concepts, tick);
      });
      auto own = pipeline::predictions_of(extraction);
      predictions.insert(predictions.end(), own.begin(), own.end());
      list.push_back(pipeline::to_json(extraction));
    } catch (const Error& e) {
      failures.push_back({{"report_id", reports[i].id}, {"error", e.what()}});
      std::cerr << reports[i].id << ": " << e.what() << "\n";
    }
    graph.decay(tick);
  }
  write_file(dir / "extraction.json",
             nlohmann::json{{"config_hash", c.hash()}, {"reports", list}, {"failures", failures}}.dump(2) + "\n");
  std::ostringstream jsonl;
  write_predictions(jsonl, predictions);
  write_file(dir / "predictions.jsonl", jsonl.str());
  write_file(dir / "knowledge_graph.json", graph.to_json().dump(2) + "\n");
  return failures.empty() ? kOk : kPartial;
}

int cmd_generate(const Options& o, const std::string& input) {
  auto c = make_config(o);
  auto dir = required_dir(o.out, "generate");
  auto j = read_json(input);
  auto templates = pipeline::load_templates(c);
  auto client = client_for(c);
  semantic::Context ctx{c.decoding, templates, {}};
  int failed = 0;
  for (const auto& r : j.at("reports")) {
    auto extraction = pipeline::extraction_from_json(r);
    if (!extraction.semantic_stage) {
      std::cerr << extraction.report_id << ": skipped, strategy runs no semantic stage\n";
      continue;
    }
    try {
      auto source = semantic::generate_clips_source(extraction.concepts, extraction.artifacts, *client, ctx);
      auto report_dir = dir / pipeline::report_directory(extraction.report_id);
      fs::create_directories(report_dir);
      write_file(report_dir / "program.clp", source);
      std::cout << (report_dir / "program.clp").string() << "\n";
    } catch (const Error& e) {
      ++failed;
      std::cerr << extraction.report_id << ": " << e.what() << "\n";
    }
  }
  return failed == 0 ? kOk : kPartial;
}

int cmd_verify(const std::vector<std::string>& files) {
  int problems = 0;
  for (const auto& file : files) {
    auto text = read_text(file);
    if (fs::path(file).extension() == ".clp") {
      auto parsed = clips::parse(text);
      auto diagnostics = parsed.diagnostics;
      if (parsed.program) {
        auto more = clips::validate(*parsed.program);
        diagnostics.insert(diagnostics.end(), more.begin(), more.end());
      }
      for (const auto& d : diagnostics) {
        if (d.severity == clips::Severity::Error) ++problems;
        std::cout << file << ":" << d.line << ":" << d.column << ": "
                  << (d.severity == clips::Severity::Error ? "error" : "warning") << ": " << clips::to_string(d.code)
                  << ": " << d.message << "\n";
      }
    } else {
      for (const auto& p : pipeline::verify_rules_text(text)) {
        ++problems;
        std::cout << file << ": " << p << "\n";
      }
    }
  }
  return problems == 0 ? kOk : kPartial;
}

int cmd_refine(const Options& o, const std::string& input, std::string report_id) {
  auto c = make_config(o);
  auto dir = required_dir(o.out, "refine");
  if (report_id.empty()) report_id = fs::path(input).parent_path().filename().string();
  if (report_id.empty()) report_id = fs::path(input).stem().string();
  auto build = pipeline::build_rules(report_id, read_text(input), pipeline::load_registry(c), c.max_cycles);
  write_file(dir / "diagnostics.json", clips::to_json(build.diagnostics).dump(2) + "\n");
  if (build.trace) write_file(dir / "trace.json", clips::to_json(*build.trace).dump(2) + "\n");
  if (!build.failed_stage || *build.failed_stage == "verify") {
    write_file(dir / "rules.txt", build.rules_text);
    write_file(dir / "rules.provenance.json", refine::provenance_json(build.refinement).dump(2) + "\n");
  }
  for (const auto& w : build.warnings) std::cerr << "warning: " << w << "\n";
  if (build.failed_stage) {
    std::cerr << "failed at " << *build.failed_stage << ": " << build.error << "\n";
    return kPartial;
  }
  std::cout << build.refinement.rules.size() << " rule(s) written to " << (dir / "rules.txt").string() << "\n";
  return kOk;
}

int cmd_evaluate(const Options& o, const std::string& input, const std::string& gold, const std::string& method,
                 const std::string& embeddings) {
  auto c = make_config(o);
  auto vocab = cti::Vocabulary::load(c.vocabulary);
  std::ifstream in(input);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + input);
  auto predictions = read_predictions(in);
  if (!gold.empty()) {
    auto schema = o.schema.empty() ? cti::Schema::DatasetA : c.schema;
    evaluation::attach_gold(predictions, cti::load_corpus(gold, schema, vocab).reports);
  }
  std::unique_ptr<metrics::EmbeddingProvider> provider;
  if (embeddings.empty()) {
    provider = std::make_unique<metrics::HashEmbeddingProvider>();
  } else {
    provider = std::make_unique<metrics::TableEmbeddingProvider>(
        read_json(embeddings).get<std::map<std::string, std::vector<double>>>());
  }
  auto report = evaluation::evaluation_report(predictions, vocab, c.k, method, *provider);
  report["embedding_provider"] = embeddings.empty() ? "hash" : "table";
  emit(o.out, report.dump(2) + "\n");
  return kOk;
}

int cmd_rate(const Options& o, const std::string& input, const std::vector<std::string>& dimensions, int scale_max,
             const std::string& level) {
  std::ifstream in(input);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + input);
  auto all = evaluation::read_ratings_csv(in, scale_max);
  std::vector<evaluation::DimensionRatings> chosen;
  if (dimensions.empty()) {
    chosen = all;
  } else {
    for (const auto& name : dimensions) {
      auto it = std::find_if(all.begin(), all.end(), [&](const auto& d) { return d.dimension == name; });
      if (it == all.end()) throw Error(ErrorCode::InvalidRatings, "no ratings for dimension '" + name + "'");
      chosen.push_back(*it);
    }
  }
  auto alpha = level == "nominal"  ? metrics::AlphaLevel::Nominal
               : level == "interval" ? metrics::AlphaLevel::Interval
                                     : metrics::AlphaLevel::Ordinal;
  emit(o.out, evaluation::rating_report(chosen, alpha).dump(2) + "\n");
  return kOk;
}

int cmd_run(const Options& o) {
  auto c = make_config(o);
  c.validate();
  auto client = client_for(c);
  auto manifest = pipeline::run_pipeline(c, *client);
  for (const auto& r : manifest.reports) {
    std::cout << (r.ok ? "ok     " : "FAILED ") << r.report_id;
    if (r.ok) {
      std::cout << "  " << r.rules << " rule(s)";
    } else {
      std::cout << "  [" << r.failed_stage.value_or("?") << "] " << r.error;
    }
    std::cout << "\n";
  }
  std::cout << manifest.run_dir.string() << "\n";
  return manifest.failed() == 0 ? kOk : kPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic information flow: CTI reports to firewall rules"};
  app.require_subcommand(1);
  Options o;

  std::string input, gold, method = "SIF", embeddings, report_id, level = "ordinal";
  std::vector<std::string> files, dimensions;
  int scale_max = 5;

  auto* ingest = app.add_subcommand("ingest", "parse and normalise a corpus into one JSON dump");
  ingest->add_option("input", input, "corpus directory or container file");
  auto* extract = app.add_subcommand("extract", "entity, concept and technique extraction");
  extract->add_option("input", input, "ingest dump or corpus path");
  auto* generate = app.add_subcommand("generate", "CLIPS programs from an extraction.json");
  generate->add_option("input", input)->required();
  auto* verify = app.add_subcommand("verify", "check .clp programs or iptables rule files");
  verify->add_option("files", files)->required();
  auto* refine_cmd = app.add_subcommand("refine", "run a CLIPS program and refine its capabilities");
  refine_cmd->add_option("input", input)->required();
  refine_cmd->add_option("--report-id", report_id, "provenance id (default: parent directory name)");
  auto* evaluate = app.add_subcommand("evaluate", "classification and text metrics for predictions.jsonl");
  evaluate->add_option("input", input)->required();
  evaluate->add_option("--gold", gold, "corpus whose statement labels replace the gold sets");
  evaluate->add_option("--method", method, "row label");
  evaluate->add_option("--embeddings", embeddings, "JSON token->vector table for the embedding score");
  auto* rate = app.add_subcommand("rate", "inter-rater reliability per dimension");
  rate->add_option("input", input, "CSV: dimension,item,rater,score")->required();
  rate->add_option("--dimensions", dimensions, "dimensions to report, in order")->delimiter(',');
  rate->add_option("--scale-max", scale_max, "largest score on the rating scale");
  rate->add_option("--alpha-level", level)->check(CLI::IsMember({"nominal", "ordinal", "interval"}));
  auto* run = app.add_subcommand("run", "full pipeline into <out>/run-NNNN");
  for (auto* sub : {ingest, extract, generate, verify, refine_cmd, evaluate, rate, run}) add_options(sub, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*ingest) return cmd_ingest(o, input);
    if (*extract) return cmd_extract(o, input);
    if (*generate) return cmd_generate(o, input);
    if (*verify) return cmd_verify(files);
    if (*refine_cmd) return cmd_refine(o, input, report_id);
    if (*evaluate) return cmd_evaluate(o, input, gold, method, embeddings);
    if (*rate) return cmd_rate(o, input, dimensions, scale_max, level);
    if (*run) return cmd_run(o);
  } catch (const Error& e) {
    std::cerr << "sif: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? kConfigError : kPartial;
  } catch (const std::exception& e) {
    std::cerr << "sif: " << e.what() << "\n";
    return kPartial;
  }
  return kOk;
}
