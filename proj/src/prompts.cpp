#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "sif/error.hpp"
#include "sif/semantic.hpp"

namespace sif::semantic {
namespace {

const char* const kEntities = R"(You read cyber threat intelligence.
List the domain entities (tools, protocols, assets, data, actors, behaviours) that appear in the statement.
Write one entity per line: the entity exactly as it is written in the statement, a TAB, then a confidence between 0 and 1.
Write NONE if the statement has no such entity. Write nothing else.

<statement>
{statement}
</statement>
)";

const char* const kHyponyms = R"(You build a security taxonomy.
List hyponyms of the entity: narrower terms, variants or concrete instances of it.
Write one term per line: the term, a TAB, then a confidence between 0 and 1.
Write NONE if you know of no hyponym. Write nothing else.
{context}
<entity>{entity}</entity>
)";

const char* const kHypernyms = R"(You build a security taxonomy.
List hypernyms of the entity: broader categories it belongs to.
Known hyponyms of the entity are given for reference; do not repeat them.
Write one term per line: the term, a TAB, then a confidence between 0 and 1. Write nothing else.
{context}
<entity>{entity}</entity>
<hyponyms>
{hyponyms}
</hyponyms>
)";

const char* const kZeroShot = R"(Map the statement to MITRE ATT&CK techniques from the list.
Write one technique per line: the technique id, a TAB, then a confidence between 0 and 1.
Only techniques with confidence of at least {threshold} percent are kept.

<techniques>
{vocabulary}
</techniques>
<hyponyms>
{hyponyms}
</hyponyms>
<hypernyms>
{hypernyms}
</hypernyms>
<statement>
{statement}
</statement>
)";

const char* const kFewShot = R"(Map the statement to MITRE ATT&CK techniques from the list.
Write one technique per line: the technique id, a TAB, then a confidence between 0 and 1.
Only techniques with confidence of at least {threshold} percent are kept.

Example statement: The implant runs PowerShell commands received from the operator.
Example answer:
T1059	0.9

Example statement: Collected archives are sent back over the existing C2 channel.
Example answer:
T1041	0.85

<techniques>
{vocabulary}
</techniques>
<hyponyms>
{hyponyms}
</hyponyms>
<hypernyms>
{hypernyms}
</hypernyms>
<statement>
{statement}
</statement>
)";

const char* const kChainOfThought = R"(Map the statement to MITRE ATT&CK techniques from the list.
First reason step by step in plain sentences without TAB characters.
Then write one technique per line: the technique id, a TAB, then a confidence between 0 and 1.
Only techniques with confidence of at least {threshold} percent are kept.

<techniques>
{vocabulary}
</techniques>
<hyponyms>
{hyponyms}
</hyponyms>
<hypernyms>
{hypernyms}
</hypernyms>
<statement>
{statement}
</statement>
)";

const char* const kThreeStage = R"(Map the statement to MITRE ATT&CK techniques from the list.
Use the extracted entities and their semantic relations: hypernyms name the general behaviour, hyponyms the concrete instances.
Write one technique per line: the technique id, a TAB, then a confidence between 0 and 1.
Only techniques with confidence of at least {threshold} percent are kept.

<techniques>
{vocabulary}
</techniques>
<entities>
{entities}
</entities>
<hyponyms>
{hyponyms}
</hyponyms>
<hypernyms>
{hypernyms}
</hypernyms>
<statement>
{statement}
</statement>
)";

const char* const kClips = R"(Write a CLIPS program for a packet-filtering expert system.
Use the hypernyms as the vocabulary for template and rule names.
Define templates first, then facts for the network artifacts, then production rules.
Rules may only use (assert ...) and (emit-capability <name> (<param> <value>)...) on the right-hand side.
Available capabilities: filter-by-source-address (ip), filter-by-destination-address (ip),
filter-by-destination-port (port, proto), filter-by-protocol (proto).
Answer with CLIPS source only.

<entities>
{entities}
</entities>
<hypernyms>
{hypernyms}
</hypernyms>
<artifacts>
{artifacts}
</artifacts>
)";

const std::set<std::string>& known_placeholders() {
  static const std::set<std::string> names = {"statement", "entities", "entity",  "hyponyms", "hypernyms",
                                              "vocabulary", "threshold", "context", "artifacts"};
  return names;
}

const std::regex& placeholder() {
  static const std::regex re(R"(\{([a-z_]+)\})");
  return re;
}

void check_placeholders(const std::string& name, const std::string& text) {
  for (std::sregex_iterator it(text.begin(), text.end(), placeholder()), end; it != end; ++it) {
    if (known_placeholders().count((*it)[1].str()) == 0) {
      throw Error(ErrorCode::ConfigError, "prompt " + name + " uses unknown placeholder {" + (*it)[1].str() + "}");
    }
  }
}

}  // namespace

PromptTemplates PromptTemplates::builtin() {
  return {kEntities, kHyponyms, kHypernyms, kZeroShot, kFewShot, kChainOfThought, kThreeStage, kClips};
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::ConfigError, "no prompt directory " + dir.string());
  PromptTemplates t = builtin();
  std::pair<const char*, std::string*> fields[] = {
      {"entities", &t.entities},
      {"hyponyms", &t.hyponyms},
      {"hypernyms", &t.hypernyms},
      {"classify_zero_shot", &t.classify_zero_shot},
      {"classify_few_shot", &t.classify_few_shot},
      {"classify_cot", &t.classify_cot},
      {"classify_three_stage", &t.classify_three_stage},
      {"clips", &t.clips},
  };
  for (auto& [name, field] : fields) {
    auto path = dir / (std::string(name) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    *field = buffer.str();
    check_placeholders(name, *field);
  }
  return t;
}

const std::string& PromptTemplates::classify_for(StrategyKind kind) const {
  switch (kind) {
    case StrategyKind::ZeroShot: return classify_zero_shot;
    case StrategyKind::FewShot: return classify_few_shot;
    case StrategyKind::ChainOfThought: return classify_cot;
    case StrategyKind::ThreeStage: return classify_three_stage;
  }
  return classify_three_stage;
}

std::string render_prompt(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string source(text), out;
  std::size_t last = 0;
  for (std::sregex_iterator it(source.begin(), source.end(), placeholder()), end; it != end; ++it) {
    auto name = (*it)[1].str();
    auto value = values.find(name);
    if (value == values.end()) throw Error(ErrorCode::ConfigError, "no value for placeholder {" + name + "}");
    out.append(source, last, static_cast<std::size_t>(it->position()) - last);
    out += value->second;
    last = static_cast<std::size_t>(it->position() + it->length());
  }
  out.append(source, last, std::string::npos);
  return out;
}

}  // namespace sif::semantic
