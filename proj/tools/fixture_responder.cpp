#include "fixture_responder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace sif::tools {
namespace {

struct Lexeme {
  const char* term;
  std::vector<const char*> hyponyms;
  std::vector<const char*> hypernyms;
  std::vector<std::pair<const char*, double>> techniques;
};

const std::vector<Lexeme>& lexicon() {
  static const std::vector<Lexeme> entries = {
      {"malware", {"trojan", "loader"}, {"malicious software"}, {{"T1204.002", 0.45}}},
      {"implant", {"backdoor"}, {"malicious software"}, {{"T1105", 0.40}}},
      {"credentials", {"password hashes", "session tokens"}, {"authentication material", "sensitive data"},
       {{"T1003", 0.70}, {"T1555", 0.52}}},
      {"browser store", {"saved passwords"}, {"credential store"}, {{"T1555", 0.80}}},
      {"ftp", {"anonymous ftp", "ftps"}, {"file transfer protocol", "network service"},
       {{"T1048.003", 0.80}, {"T1048", 0.62}}},
      {"powershell", {"encoded command"}, {"command interpreter", "scripting language"},
       {{"T1059.001", 0.90}, {"T1059", 0.70}}},
      {"command shell", {"cmd.exe"}, {"command interpreter"}, {{"T1059.003", 0.85}, {"T1059", 0.60}}},
      {"scheduled task", {"daily trigger"}, {"persistence mechanism"}, {{"T1053.005", 0.86}}},
      {"run key", {"hkcu run key"}, {"persistence mechanism", "registry modification"},
       {{"T1547.001", 0.86}, {"T1112", 0.50}}},
      {"c2 server", {"beacon endpoint"}, {"command and control infrastructure"}, {{"T1071", 0.62}, {"T1041", 0.44}}},
      {"c2 channel", {"beacon session"}, {"command and control infrastructure"}, {{"T1041", 0.78}}},
      {"https", {"tls session"}, {"web protocol", "encrypted channel"}, {{"T1071.001", 0.70}, {"T1573", 0.56}}},
      {"http", {"http post"}, {"web protocol"}, {{"T1071.001", 0.74}}},
      {"dns", {"dns tunneling", "txt records"}, {"application layer protocol", "name resolution"},
       {{"T1071.004", 0.82}}},
      {"phishing email", {"spearphishing message"}, {"social engineering", "initial access vector"},
       {{"T1566", 0.80}, {"T1566.001", 0.58}}},
      {"attachment", {"macro document"}, {"malicious file"}, {{"T1566.001", 0.72}, {"T1204.002", 0.61}}},
      {"link", {"shortened url"}, {"malicious link"}, {{"T1566.002", 0.66}}},
      {"payload", {"second-stage payload"}, {"malicious software"}, {{"T1105", 0.72}}},
      {"archive", {"rar archive", "zip archive"}, {"collected data container"}, {{"T1560", 0.80}}},
      {"ransomware", {"file encryptor"}, {"malicious software", "extortion tool"}, {{"T1486", 0.91}, {"T1490", 0.46}}},
      {"shadow copies", {"volume snapshots"}, {"recovery data"}, {{"T1490", 0.86}}},
      {"lsass", {"lsass memory dump"}, {"credential store", "system process"}, {{"T1003.001", 0.91}, {"T1003", 0.64}}},
      {"rdp", {"remote desktop session"}, {"remote access protocol", "external remote service"},
       {{"T1021.001", 0.85}, {"T1133", 0.47}}},
      {"vpn", {"ssl vpn"}, {"external remote service"}, {{"T1133", 0.76}}},
      {"web shell", {"china chopper"}, {"persistence mechanism", "server-side backdoor"}, {{"T1505.003", 0.90}}},
      {"web server", {"iis server"}, {"public-facing application"}, {{"T1190", 0.68}}},
      {"vulnerability", {"remote code execution flaw"}, {"attack surface"}, {{"T1190", 0.57}}},
      {"keylogger", {"keystroke hook"}, {"input capture tool", "spyware"}, {{"T1056.001", 0.90}}},
      {"screenshots", {"desktop captures"}, {"captured data"}, {{"T1113", 0.86}}},
      {"proxy", {"socks proxy"}, {"traffic relay"}, {{"T1090", 0.80}}},
      {"service", {"windows service"}, {"persistence mechanism"}, {{"T1543.003", 0.69}}},
      {"rundll32", {"rundll32 export call"}, {"signed binary proxy"}, {{"T1218.011", 0.90}}},
      {"accounts", {"domain accounts"}, {"identity"}, {{"T1078", 0.71}}},
      {"password spraying", {"credential stuffing"}, {"credential attack"}, {{"T1110", 0.87}}},
      {"files", {"documents"}, {"local data"}, {{"T1005", 0.55}, {"T1083", 0.42}}},
      {"process injection", {"dll injection"}, {"defense evasion technique"}, {{"T1055", 0.86}}},
      {"base64", {"base64 blob"}, {"obfuscation", "encoding scheme"}, {{"T1027", 0.70}, {"T1140", 0.51}}},
      {"dga", {"algorithmic domains"}, {"c2 resilience technique"}, {{"T1568.002", 0.90}}},
      {"pastebin", {"paste page"}, {"web service"}, {{"T1102", 0.76}}},
      {"anydesk", {"unattended access"}, {"remote access software"}, {{"T1219", 0.86}}},
      {"icmp", {"icmp echo"}, {"non-application layer protocol"}, {{"T1095", 0.80}}},
      {"ssh", {"ssh tunnel"}, {"remote access protocol", "encrypted channel"}, {{"T1573", 0.52}, {"T1133", 0.50}}},
      {"system information", {"os version"}, {"discovery data"}, {{"T1082", 0.80}}},
      {"network configuration", {"ipconfig output"}, {"discovery data"}, {{"T1016", 0.80}}},
      {"running processes", {"process list"}, {"discovery data"}, {{"T1057", 0.76}}},
      {"non-standard port", {"high port"}, {"network endpoint"}, {{"T1571", 0.78}}},
  };
  return entries;
}

std::string lower(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  return text;
}

std::string between(const std::string& text, const std::string& open, const std::string& close) {
  auto a = text.find(open);
  if (a == std::string::npos) return {};
  a += open.size();
  auto b = text.find(close, a);
  return b == std::string::npos ? std::string() : text.substr(a, b - a);
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; }

// Positions where `term` occurs in `text` (both lower case) on word boundaries.
std::vector<std::size_t> occurrences(const std::string& text, const std::string& term) {
  std::vector<std::size_t> out;
  for (auto at = text.find(term); at != std::string::npos; at = text.find(term, at + 1)) {
    bool left = at == 0 || !word_char(text[at - 1]);
    bool right = at + term.size() >= text.size() || !word_char(text[at + term.size()]);
    if (left && right) out.push_back(at);
  }
  return out;
}

const Lexeme* find(const std::string& entity) {
  auto key = lower(entity);
  for (const auto& l : lexicon()) {
    if (key == l.term) return &l;
  }
  return nullptr;
}

struct Hit {
  std::size_t start;
  std::string surface;
  const Lexeme* lexeme;
};

// Longest terms claim their span first; returned in text order.
std::vector<Hit> scan(const std::string& statement) {
  auto text = lower(statement);
  std::vector<const Lexeme*> order;
  for (const auto& l : lexicon()) order.push_back(&l);
  std::stable_sort(order.begin(), order.end(),
                   [](const Lexeme* a, const Lexeme* b) { return std::string(a->term).size() > std::string(b->term).size(); });
  std::vector<bool> taken(text.size(), false);
  std::vector<Hit> hits;
  std::set<std::string> seen;
  for (const auto* l : order) {
    std::string term = l->term;
    for (auto at : occurrences(text, term)) {
      if (std::any_of(taken.begin() + at, taken.begin() + at + term.size(), [](bool t) { return t; })) continue;
      std::fill(taken.begin() + at, taken.begin() + at + term.size(), true);
      if (seen.insert(term).second) hits.push_back({at, statement.substr(at, term.size()), l});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.start < b.start; });
  return hits;
}

std::string confidence(double value) {
  value = std::clamp(value, 0.05, 0.99);
  char buffer[16];
  std::snprintf(buffer, sizeof buffer, "%.2f", value);
  return buffer;
}

std::uint64_t fnv(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string slug(const std::string& text) {
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      out += static_cast<char>(std::tolower(c));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "indicator" : out;
}

}  // namespace

std::string FixtureResponder::do_complete(const std::string& prompt, const llm::DecodingConfig&) {
  if (prompt.find("List the domain entities") != std::string::npos) {
    return entities(between(prompt, "<statement>\n", "\n</statement>"));
  }
  if (prompt.find("List hyponyms") != std::string::npos) return hyponyms(between(prompt, "<entity>", "</entity>"));
  if (prompt.find("List hypernyms") != std::string::npos) return hypernyms(between(prompt, "<entity>", "</entity>"));
  if (prompt.find("Write a CLIPS program") != std::string::npos) return clips(prompt);
  return classify(prompt);
}

std::string FixtureResponder::entities(const std::string& statement) const {
  auto hits = scan(statement);
  if (hits.empty()) return "NONE\n";
  std::string out;
  for (const auto& h : hits) out += h.surface + "\t" + confidence(0.7 + (fnv(h.surface) % 25) / 100.0) + "\n";
  return out;
}

std::string FixtureResponder::hyponyms(const std::string& entity) const {
  const auto* l = find(entity);
  if (!l || l->hyponyms.empty()) return "NONE\n";
  std::string out;
  double c = 0.74;
  for (const auto* h : l->hyponyms) {
    out += std::string(h) + "\t" + confidence(c) + "\n";
    c -= 0.08;
  }
  return out;
}

std::string FixtureResponder::hypernyms(const std::string& entity) const {
  const auto* l = find(entity);
  if (!l) return "security concept\t0.40\n";
  std::string out;
  double c = 0.92;
  for (const auto* h : l->hypernyms) {
    out += std::string(h) + "\t" + confidence(c) + "\n";
    c -= 0.09;
  }
  return out;
}

std::string FixtureResponder::classify(const std::string& prompt) const {
  auto statement = between(prompt, "<statement>\n", "\n</statement>");
  auto vocabulary_block = between(prompt, "<techniques>\n", "\n</techniques>");
  std::vector<std::string> vocabulary;
  {
    std::istringstream in(vocabulary_block);
    for (std::string line; std::getline(in, line);) {
      auto tab = line.find('\t');
      if (tab != std::string::npos) vocabulary.push_back(line.substr(0, tab));
    }
  }

  const bool three_stage = prompt.find("Use the extracted entities") != std::string::npos;
  const bool cot = prompt.find("First reason step by step") != std::string::npos;
  const bool few_shot = prompt.find("Example statement:") != std::string::npos;
  const bool with_hyponyms = prompt.find("<hyponyms>\nnone\n</hyponyms>") == std::string::npos;
  const bool with_hypernyms = prompt.find("<hypernyms>\nnone\n</hypernyms>") == std::string::npos;
  double shift = three_stage ? 0.05 : cot ? -0.03 : few_shot ? -0.02 : -0.08;
  if (!three_stage && with_hyponyms) shift += 0.04;
  if (!three_stage && with_hypernyms) shift += 0.02;

  std::map<std::string, double> scores;
  for (const auto& hit : scan(statement)) {
    for (const auto& [id, weight] : hit.lexeme->techniques) {
      double& s = scores[id];
      s = std::max(s, weight + shift);
    }
  }
  if (!vocabulary.empty()) {
    // one plausible but wrong guess per statement, near the thresholds
    auto h = fnv(statement);
    const auto& id = vocabulary[h % vocabulary.size()];
    if (!scores.count(id)) scores[id] = 0.40 + static_cast<double>((h >> 16) % 20) / 100.0;
  }

  std::string out;
  if (cot) out += "The statement describes attacker behaviour; matching it against the technique list.\n";
  std::vector<std::pair<std::string, double>> ranked(scores.begin(), scores.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [id, score] : ranked) out += id + "\t" + confidence(score) + "\n";
  return ranked.empty() ? "NONE\n" : out;
}

std::string FixtureResponder::clips(const std::string& prompt) const {
  auto artifacts_block = between(prompt, "<artifacts>\n", "\n</artifacts>");
  auto hypernym_block = between(prompt, "<hypernyms>\n", "\n</hypernyms>");

  std::string theme = "indicator";
  {
    auto colon = hypernym_block.find(": ");
    if (colon != std::string::npos) {
      auto rest = hypernym_block.substr(colon + 2);
      theme = slug(rest.substr(0, rest.find_first_of(";\n")));
    }
  }

  std::vector<std::pair<std::string, std::string>> facts;
  std::set<std::string> kinds;
  std::istringstream in(artifacts_block);
  for (std::string line; std::getline(in, line);) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    auto kind = line.substr(0, tab);
    if (kind != "ipv4" && kind != "ipv4-cidr" && kind != "port" && kind != "domain") continue;
    facts.emplace_back(kind, line.substr(tab + 1));
    kinds.insert(kind);
  }

  std::ostringstream out;
  out << "```clips\n";
  out << "(deftemplate indicator\n  (slot kind (type SYMBOL))\n  (slot value (type STRING)))\n\n";
  if (!facts.empty()) {
    out << "(deffacts observed-indicators\n";
    for (const auto& [kind, value] : facts) out << "  (indicator (kind " << kind << ") (value \"" << value << "\"))\n";
    out.seekp(-1, std::ios::cur);
    out << ")\n";
  }
  auto address_rule = [&](const std::string& kind, const std::string& suffix) {
    out << "\n(defrule contain-" << theme << "-" << suffix << "\n"
        << "  (indicator (kind " << kind << ") (value ?address))\n  =>\n"
        << "  (emit-capability filter-by-source-address (ip ?address))\n"
        << "  (emit-capability filter-by-destination-address (ip ?address)))\n";
  };
  if (kinds.count("ipv4")) address_rule("ipv4", "host");
  if (kinds.count("ipv4-cidr")) address_rule("ipv4-cidr", "network");
  if (kinds.count("port")) {
    out << "\n(defrule contain-" << theme << "-port\n"
        << "  (indicator (kind port) (value ?port))\n  =>\n"
        << "  (emit-capability filter-by-destination-port (port ?port) (proto tcp)))\n";
  }
  if (kinds.count("domain")) {
    out << "\n(defrule contain-" << theme << "-domain\n"
        << "  (indicator (kind domain) (value ?name))\n  =>\n"
        << "  (emit-capability filter-by-destination-address (ip ?name)))\n";
  }
  out << "```\n";

  auto program = out.str();
  if (!break_marker_.empty() && artifacts_block.find(break_marker_) != std::string::npos) {
    // drop the final closing parenthesis of the last construct
    auto last = program.rfind(')');
    program.erase(last, 1);
  }
  return program;
}

}  // namespace sif::tools
