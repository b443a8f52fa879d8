// Records the mock transcript for a fixture corpus by running the semantic
// stages against FixtureResponder. Run by hand when fixtures change; the
// resulting transcript is committed next to the corpus.
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fixture_responder.hpp"
#include "sif/error.hpp"
#include "sif/pipeline.hpp"

using namespace sif;

namespace {

semantic::PromptStrategy parse_variant(const std::string& text) {
  // kind/augment/threshold, e.g. three-stage/none/50
  auto a = text.find('/');
  auto b = text.find('/', a + 1);
  if (a == std::string::npos || b == std::string::npos) throw CLI::ValidationError("variant", text);
  auto kind = semantic::strategy_kind_from_string(text.substr(0, a));
  auto augment = semantic::augmentation_from_string(text.substr(a + 1, b - a - 1));
  if (!kind || !augment) throw CLI::ValidationError("variant", text);
  return {*kind, *augment, std::stoi(text.substr(b + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Record a fixture transcript"};
  std::string corpus, schema = "b", vocabulary, prompts, out, break_marker;
  std::vector<std::string> variants = {"three-stage/none/50"};
  bool with_prompts = false;
  std::uint64_t seed = 42;
  app.add_option("--corpus", corpus)->required();
  app.add_option("--schema", schema)->check(CLI::IsMember({"a", "b"}));
  app.add_option("--vocabulary", vocabulary)->required();
  app.add_option("--prompts", prompts);
  app.add_option("--variant", variants, "kind/augment/threshold");
  app.add_option("--break-clips", break_marker, "truncate CLIPS for reports listing this artifact");
  app.add_option("--seed", seed);
  app.add_flag("--with-prompts", with_prompts, "store prompt text for auditing");
  app.add_option("--out", out)->required();
  CLI11_PARSE(app, argc, argv);

  try {
    auto vocab = cti::Vocabulary::load(vocabulary);
    auto templates = prompts.empty() ? semantic::PromptTemplates::builtin() : semantic::PromptTemplates::load(prompts);
    auto loaded = cti::load_corpus(corpus, *pipeline::schema_from_string(schema), vocab);
    llm::DecodingConfig decoding{seed, true, 512, std::nullopt};
    semantic::Context ctx{decoding, templates, {}};

    tools::FixtureResponder responder;
    responder.break_clips_on(break_marker);
    llm::RecordingClient recorder(responder);
    for (const auto& v : variants) {
      auto strategy = parse_variant(v);
      for (const auto& report : loaded.reports) {
        auto extraction = pipeline::extract_report(report, vocab, strategy, recorder, ctx);
        if (!extraction.semantic_stage) continue;
        try {
          semantic::generate_clips_source(extraction.concepts, extraction.artifacts, recorder, ctx);
        } catch (const Error& e) {
          std::cerr << report.id << ": " << e.what() << "\n";
        }
      }
    }

    std::vector<llm::TranscriptEntry> unique;
    std::map<std::string, bool> seen;
    for (auto entry : recorder.entries()) {
      if (seen[entry.prompt_hash]) continue;
      seen[entry.prompt_hash] = true;
      if (!with_prompts) entry.prompt.reset();
      unique.push_back(std::move(entry));
    }
    std::ofstream(out) << llm::transcript_to_json(unique).dump(2) << "\n";
    std::cout << unique.size() << " transcript entries written to " << out << "\n";
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
