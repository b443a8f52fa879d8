#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

#include "sif/error.hpp"
#include "sif/semantic.hpp"

using namespace sif;
using namespace sif::semantic;

namespace {

std::string between(const std::string& text, const std::string& open, const std::string& close) {
  auto a = text.find(open);
  if (a == std::string::npos) return {};
  a += open.size();
  return text.substr(a, text.find(close, a) - a);
}

// Answers by prompt kind; counts calls so ordering can be checked.
class FakeClient : public llm::LlmClient {
 public:
  std::map<std::string, std::string> entities;   // statement -> completion
  std::map<std::string, std::string> hyponyms;   // entity -> completion
  std::map<std::string, std::string> hypernyms;  // entity -> completion
  std::string classify = "NONE";
  std::string clips = "(deftemplate t (slot a))";
  std::vector<std::string> log;
  std::vector<std::string> prompts;

 private:
  std::string do_complete(const std::string& prompt, const llm::DecodingConfig&) override {
    prompts.push_back(prompt);
    auto entity = between(prompt, "<entity>", "</entity>");
    if (prompt.find("List hyponyms") != std::string::npos) {
      log.push_back("hypo:" + entity);
      return hyponyms.count(entity) ? hyponyms[entity] : "NONE";
    }
    if (prompt.find("List hypernyms") != std::string::npos) {
      log.push_back("hyper:" + entity);
      return hypernyms.count(entity) ? hypernyms[entity] : "NONE";
    }
    if (prompt.find("List the domain entities") != std::string::npos) {
      log.push_back("entities");
      auto statement = between(prompt, "<statement>\n", "\n</statement>");
      return entities.count(statement) ? entities[statement] : "NONE";
    }
    if (prompt.find("Write a CLIPS program") != std::string::npos) return clips;
    log.push_back("classify");
    return classify;
  }
};

const llm::DecodingConfig kGreedy{42, true, 256, std::nullopt};
const PromptTemplates kTemplates = PromptTemplates::builtin();
const Context kCtx{kGreedy, kTemplates, {}};

cti::Vocabulary vocab() {
  return cti::Vocabulary::from_tsv("T1041\tExfiltration Over C2 Channel\nT1059\tCommand and Scripting Interpreter\n"
                                   "T1105\tIngress Tool Transfer\nT1071\tApplication Layer Protocol\n");
}

template <class F>
ErrorCode code_of(F f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ConfigError;
}

const std::string kStatement = "malware exfiltrates credentials via FTP";

}  // namespace

TEST_CASE("decoding config guards greedy mode") {
  CHECK_NOTHROW(kGreedy.validate());
  llm::DecodingConfig hot{1, true, 10, 0.7};
  CHECK(code_of([&] { hot.validate(); }) == ErrorCode::InvalidDecoding);
  llm::DecodingConfig sampled{1, false, 10, 0.7};
  CHECK_NOTHROW(sampled.validate());
  FakeClient client;
  CHECK(code_of([&] { client.complete("x", hot); }) == ErrorCode::InvalidDecoding);
}

TEST_CASE("stage 1 extracts entities with spans") {
  FakeClient client;
  client.entities[kStatement] = "malware\t0.9\ncredentials\t0.8\nFTP\t0.95\n";
  auto result = stage1_extract_entities(kStatement, client, kCtx);
  REQUIRE(result.entities.size() == 3);
  CHECK(result.entities[0].surface == "malware");
  CHECK(result.entities[1].surface == "credentials");
  CHECK(result.entities[2].surface == "FTP");
  for (const auto& e : result.entities) CHECK(kStatement.substr(e.start, e.end - e.start) == e.surface);
}

TEST_CASE("stage 1 guardrails") {
  FakeClient client;
  client.entities[kStatement] = "Sure! The statement talks about malware and FTP.";
  CHECK(code_of([&] { stage1_extract_entities(kStatement, client, kCtx); }) == ErrorCode::GuardrailViolation);

  client.entities[kStatement] = "SSH\t0.9\n- FTP\t0.7\n";
  auto result = stage1_extract_entities(kStatement, client, kCtx);
  REQUIRE(result.entities.size() == 1);
  CHECK(result.entities[0].surface == "FTP");
  CHECK(result.warnings.size() == 1);

  client.entities[kStatement] = "NONE";
  CHECK(stage1_extract_entities(kStatement, client, kCtx).entities.empty());
  CHECK(code_of([&] { stage1_extract_entities("   ", client, kCtx); }) == ErrorCode::PreconditionViolation);
}

TEST_CASE("stage 2 asks for hyponyms before hypernyms") {
  FakeClient client;
  client.hyponyms["FTP"] = "anonymous FTP\t0.7\n";
  client.hypernyms["FTP"] = "network service\t0.9\nfile transfer protocol\t0.8\n";
  client.hypernyms["malware"] = "malicious software\t0.6\n";
  std::vector<DomainEntity> entities = {{"FTP", 36, 39}, {"malware", 0, 7}};
  auto result = stage2_abstract_concepts(entities, client, kCtx);
  REQUIRE(result.concepts.size() == 2);
  CHECK(result.concepts[0].entity.surface == "FTP");
  CHECK(result.concepts[0].hypernyms == std::set<std::string>{"network service", "file transfer protocol"});
  CHECK(result.concepts[0].hyponyms == std::set<std::string>{"anonymous FTP"});
  CHECK(result.concepts[0].confidence == 0.9);
  CHECK(result.concepts[1].entity.surface == "malware");
  CHECK(client.log == std::vector<std::string>{"hypo:FTP", "hyper:FTP", "hypo:malware", "hyper:malware"});
  // hyponyms found first are shown to the hypernym prompt
  CHECK(client.prompts[1].find("anonymous FTP") != std::string::npos);
}

TEST_CASE("stage 2 restores disjointness and reports empty abstraction") {
  FakeClient client;
  client.hyponyms["FTP"] = "FTP\t0.5\nFTPS\t0.4\n";
  client.hypernyms["FTP"] = "FTP\t0.6\nprotocol\t0.9\n";
  auto result = stage2_abstract_concepts({{"FTP", 0, 3}}, client, kCtx);
  CHECK(result.concepts[0].hyponyms == std::set<std::string>{"FTPS"});
  CHECK(result.concepts[0].hypernyms == std::set<std::string>{"FTP", "protocol"});
  CHECK(result.warnings.size() == 1);

  FakeClient empty;
  CHECK(code_of([&] { stage2_abstract_concepts({{"x", 0, 1}}, empty, kCtx); }) == ErrorCode::EmptyAbstraction);
  CHECK(code_of([&] { stage2_abstract_concepts({}, empty, kCtx); }) == ErrorCode::PreconditionViolation);
  empty.hyponyms["x"] = "I cannot help with that.";
  CHECK(code_of([&] { stage2_abstract_concepts({{"x", 0, 1}}, empty, kCtx); }) == ErrorCode::GuardrailViolation);
}

TEST_CASE("stage 3 thresholds and ranks") {
  FakeClient client;
  PromptStrategy strategy{StrategyKind::ThreeStage, Augmentation::None, 50};
  client.classify = "T1041\t0.62\nT1059\t0.38\n";
  auto result = stage3_classify({}, kStatement, vocab(), strategy, client, kCtx);
  REQUIRE(result.predictions.size() == 1);
  CHECK(result.predictions[0] == LabelPrediction{"T1041", 0.62, 1});
  CHECK(result.candidates.size() == 2);

  client.classify = "T1105\t0.5\nT1059\t0.5\nT9999\t0.9\nnot-a-label\t0.4\nT1071\thigh\n";
  strategy.threshold_percent = 0;
  result = stage3_classify({}, kStatement, vocab(), strategy, client, kCtx);
  REQUIRE(result.predictions.size() == 3);
  CHECK(result.predictions[0].label == "T1059");
  CHECK(result.predictions[1].label == "T1105");
  CHECK(result.predictions[2] == LabelPrediction{"T1071", 0.0, 3});
  CHECK(result.unknown_labels == 2);

  strategy.threshold_percent = 50;
  CHECK(stage3_classify({}, kStatement, vocab(), strategy, client, kCtx).predictions.size() == 2);

  CHECK(code_of([&] { stage3_classify({}, kStatement, cti::Vocabulary{}, strategy, client, kCtx); }) ==
        ErrorCode::PreconditionViolation);
  client.classify = "T1041 is likely.";
  CHECK(code_of([&] { stage3_classify({}, kStatement, vocab(), strategy, client, kCtx); }) ==
        ErrorCode::GuardrailViolation);
}

TEST_CASE("threshold filtering is monotone") {
  std::vector<LabelPrediction> candidates;
  for (int i = 0; i <= 20; ++i) candidates.push_back({"T1" + std::to_string(100 + i), i / 20.0, 0});
  for (int low = 0; low <= 100; low += 5) {
    auto a = apply_threshold(candidates, low);
    for (int high = low; high <= 100; high += 5) {
      auto b = apply_threshold(candidates, high);
      for (const auto& p : b) {
        CHECK(std::any_of(a.begin(), a.end(), [&](const LabelPrediction& q) { return q.label == p.label; }));
      }
    }
  }
  CHECK(apply_threshold({{"T1000", 0.6, 0}}, 60).size() == 1);
  CHECK(apply_threshold({{"T1000", 0.59, 0}}, 60).empty());
}

TEST_CASE("augmentation decides which relations reach the prompt") {
  FakeClient client;
  SemanticConcept c{{"FTP", 0, 3}, {"anonymous FTP"}, {"network service"}, 0.9};
  stage3_classify({c}, "FTP", vocab(), {StrategyKind::ZeroShot, Augmentation::Hyponyms, 50}, client, kCtx);
  CHECK(client.prompts.back().find("anonymous FTP") != std::string::npos);
  CHECK(client.prompts.back().find("network service") == std::string::npos);
  stage3_classify({c}, "FTP", vocab(), {StrategyKind::FewShot, Augmentation::Hypernyms, 50}, client, kCtx);
  CHECK(client.prompts.back().find("anonymous FTP") == std::string::npos);
  CHECK(client.prompts.back().find("network service") != std::string::npos);
  stage3_classify({c}, "FTP", vocab(), {StrategyKind::ThreeStage, Augmentation::None, 50}, client, kCtx);
  CHECK(client.prompts.back().find("anonymous FTP") != std::string::npos);
  CHECK(client.prompts.back().find("network service") != std::string::npos);
}

TEST_CASE("semantic-only baseline matches concept terms to technique names") {
  SemanticConcept c{{"shell", 0, 5}, {"command and scripting interpreter"}, {"application layer protocol"}, 0.7};
  auto result = baseline_semantic_only({c}, vocab(), 50);
  REQUIRE(result.predictions.size() == 2);
  CHECK(result.predictions[0].label == "T1059");
  CHECK(result.predictions[1].label == "T1071");
  CHECK(baseline_semantic_only({c}, vocab(), 80).predictions.empty());
}

TEST_CASE("CLIPS generation") {
  FakeClient client;
  client.clips = "```clips\n(deftemplate indicator (slot kind) (slot value))\n```\n";
  SemanticConcept c{{"FTP", 0, 3}, {}, {"network service"}, 0.9};
  cti::NetworkArtifact a{cti::ArtifactKind::IPv4, "203.0.113.7", std::nullopt};
  auto source = generate_clips_source({c}, {a}, client, kCtx);
  CHECK(source == "(deftemplate indicator (slot kind) (slot value))\n");
  CHECK(client.prompts.back().find("network service") != std::string::npos);
  CHECK(client.prompts.back().find("203.0.113.7") != std::string::npos);
  CHECK(generate_clips_source({c}, {a}, client, kCtx) == source);

  SemanticConcept bare{{"FTP", 0, 3}, {}, {}, 0.0};
  CHECK(code_of([&] { generate_clips_source({bare}, {a}, client, kCtx); }) == ErrorCode::PreconditionViolation);
  client.clips = "```\n```";
  CHECK(code_of([&] { generate_clips_source({c}, {a}, client, kCtx); }) == ErrorCode::GuardrailViolation);
}

TEST_CASE("scripted mock replays a recorded chain byte for byte") {
  FakeClient live;
  live.entities[kStatement] = "malware\t0.9\nFTP\t0.95\n";
  live.hyponyms["FTP"] = "anonymous FTP\t0.7\n";
  live.hypernyms["FTP"] = "network service\t0.9\n";
  live.hypernyms["malware"] = "malicious software\t0.8\n";
  live.classify = "T1041\t0.7\nT1071\t0.55\n";
  PromptStrategy strategy{StrategyKind::ThreeStage, Augmentation::None, 50};

  llm::RecordingClient recorder(live);
  auto first = analyze_statement(kStatement, vocab(), strategy, recorder, kCtx);
  auto transcript = recorder.transcript_json();
  CHECK(transcript["entries"].size() == 6);

  auto mock = llm::ScriptedMock::from_json(nlohmann::json::parse(transcript.dump()));
  auto second = analyze_statement(kStatement, vocab(), strategy, mock, kCtx);
  auto third = analyze_statement(kStatement, vocab(), strategy, mock, kCtx);
  CHECK(second.concepts == first.concepts);
  CHECK(second.classification.predictions == first.classification.predictions);
  CHECK(third.classification.predictions == first.classification.predictions);
  REQUIRE(first.classification.predictions.size() == 2);

  CHECK(code_of([&] { mock.complete("unseen prompt", kGreedy); }) == ErrorCode::TranscriptMiss);
  CHECK(llm::prompt_hash("") == "cbf29ce484222325");
  CHECK(llm::prompt_hash("a") == "af63dc4c8601ec8c");
}

TEST_CASE("analysis without entities still classifies") {
  FakeClient client;
  client.classify = "T1059\t0.8\n";
  auto analysis = analyze_statement(kStatement, vocab(), {StrategyKind::ThreeStage, Augmentation::None, 50}, client, kCtx);
  CHECK(analysis.entities.empty());
  CHECK(analysis.classification.predictions.size() == 1);
  CHECK(!analysis.warnings.empty());
  FakeClient zero;
  zero.classify = "T1059\t0.8\n";
  analyze_statement(kStatement, vocab(), {StrategyKind::ZeroShot, Augmentation::None, 50}, zero, kCtx);
  CHECK(zero.log == std::vector<std::string>{"classify"});
}

TEST_CASE("memory context reaches relation prompts") {
  FakeClient client;
  client.hypernyms["FTP"] = "network service\t0.9\n";
  Context ctx{kGreedy, kTemplates, [](const std::string& e) { return e == "FTP" ? "FTP IsA protocol" : ""; }};
  stage2_abstract_concepts({{"FTP", 0, 3}}, client, ctx);
  CHECK(client.prompts[0].find("<memory>\nFTP IsA protocol\n</memory>") != std::string::npos);
}

TEST_CASE("prompt templates") {
  CHECK(PromptTemplates::load(std::filesystem::path(SIF_DATA_DIR) / "prompts") == PromptTemplates::builtin());
  CHECK(render_prompt("a {statement} b", {{"statement", "x"}}) == "a x b");
  CHECK(code_of([] { render_prompt("{statement}", {}); }) == ErrorCode::ConfigError);

  auto dir = std::filesystem::temp_directory_path() / "sif_prompt_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "entities.txt") << "bad {nonsense}";
  }
  CHECK(code_of([&] { PromptTemplates::load(dir); }) == ErrorCode::ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("record parsing") {
  auto parsed = parse_records("reasoning first\n1. FTP\t0.9\n* SMB\t1.5\n\xE2\x80\xA2 RDP\tmaybe\n\t0.3\n");
  REQUIRE(parsed.records.size() == 3);
  CHECK(parsed.records[0].name == "FTP");
  CHECK(parsed.records[1].confidence == 1.0);
  CHECK(parsed.records[2].name == "RDP");
  CHECK(parsed.records[2].confidence == 0.0);
  CHECK(parsed.warnings.size() == 1);
  CHECK(parse_records(" none \n").explicit_none);
}
