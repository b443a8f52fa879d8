#include "sif/cti.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sif/error.hpp"

namespace sif::cti {
namespace {

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool all_digits(std::string_view text) {
  return !text.empty() &&
         std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::optional<int> parse_port(std::string_view text) {
  if (!all_digits(text) || text.size() > 5) return std::nullopt;
  int value = 0;
  std::from_chars(text.data(), text.data() + text.size(), value);
  if (value < 1 || value > 65535) return std::nullopt;
  return value;
}

// Extensions that look like a TLD but name files in report prose.
const std::set<std::string>& file_extensions() {
  static const std::set<std::string> kExtensions = {
      "exe", "dll", "sys", "bat", "cmd", "ps1", "vbs", "js",  "jar", "hta", "scr", "lnk",
      "doc", "docx", "docm", "xls", "xlsx", "xlsm", "ppt", "pptx", "pdf", "rtf", "txt", "log",
      "zip", "rar", "7z",  "gz",  "tar", "iso", "img", "bin", "dat", "tmp", "ini", "cfg",
      "py",  "sh",  "php", "asp", "aspx", "jsp", "html", "htm", "xml", "json", "csv", "db"};
  return kExtensions;
}

const std::regex& url_regex() {
  static const std::regex kUrl(R"(^(https?|ftp)://([A-Za-z0-9.\-]+)(:[0-9]{1,5})?([/?#][^\s]*)?$)",
                               std::regex::icase);
  return kUrl;
}

const std::regex& domain_regex() {
  static const std::regex kDomain(R"(^(([a-z0-9]([a-z0-9\-]{0,61}[a-z0-9])?)\.)+([a-z]{2,24})$)");
  return kDomain;
}

bool is_domain(const std::string& lowered) {
  std::smatch match;
  if (!std::regex_match(lowered, match, domain_regex())) return false;
  return file_extensions().count(match[4].str()) == 0;
}

const char* kLeadingJunk = "\"'(<{`";
const char* kTrailingJunk = ".,;:!?)\"'>}`";

std::string_view strip_token(std::string_view token) {
  while (!token.empty() && std::strchr(kLeadingJunk, token.front()) != nullptr) token.remove_prefix(1);
  // a leading '[' is junk unless it opens a defang bracket such as "[.]"
  while (!token.empty() && token.front() == '[' && token.size() > 1 && token[1] != '.' &&
         token[1] != ':') {
    token.remove_prefix(1);
  }
  while (!token.empty() && std::strchr(kTrailingJunk, token.back()) != nullptr) token.remove_suffix(1);
  while (!token.empty() && token.back() == ']' && token.size() > 1 &&
         token[token.size() - 2] != '.' && token[token.size() - 2] != ':' &&
         token[token.size() - 2] != 't') {
    token.remove_suffix(1);
  }
  return token;
}

struct Collector {
  std::vector<NetworkArtifact> out;
  std::set<std::pair<ArtifactKind, std::string>> seen;

  void add(ArtifactKind kind, std::string value, const std::optional<std::string>& original) {
    if (!seen.emplace(kind, value).second) return;
    out.push_back({kind, std::move(value), original});
  }
};

// Classifies one refanged token; returns true if anything was recorded.
bool classify(const std::string& token, const std::optional<std::string>& original, Collector& sink) {
  std::smatch match;
  if (std::regex_match(token, match, url_regex())) {
    std::string canonical = to_lower(match[1].str()) + "://" + to_lower(match[2].str()) +
                            match[3].str() + match[4].str();
    sink.add(ArtifactKind::Url, std::move(canonical), original);
    return true;
  }

  std::string_view view(token);
  std::optional<int> port;
  if (auto colon = view.rfind(':'); colon != std::string_view::npos) {
    port = parse_port(view.substr(colon + 1));
    if (port) view = view.substr(0, colon);
  }

  if (auto slash = view.find('/'); slash != std::string_view::npos && !port) {
    auto address = parse_ipv4(view.substr(0, slash));
    auto prefix = view.substr(slash + 1);
    if (address && all_digits(prefix) && prefix.size() <= 2) {
      int bits = std::stoi(std::string(prefix));
      if (bits <= 32) {
        sink.add(ArtifactKind::IPv4Cidr, format_ipv4(*address) + "/" + std::to_string(bits), original);
        return true;
      }
    }
    return false;
  }

  if (auto address = parse_ipv4(view)) {
    sink.add(ArtifactKind::IPv4, format_ipv4(*address), original);
    if (port) sink.add(ArtifactKind::Port, std::to_string(*port), std::nullopt);
    return true;
  }

  std::string lowered = to_lower(view);
  static const std::regex kHex(R"(^[0-9a-f]+$)");
  if ((lowered.size() == 32 || lowered.size() == 64) && !port && std::regex_match(lowered, kHex)) {
    sink.add(lowered.size() == 32 ? ArtifactKind::HashMd5 : ArtifactKind::HashSha256, lowered, original);
    return true;
  }

  if (is_domain(lowered)) {
    sink.add(ArtifactKind::Domain, lowered, original);
    if (port) sink.add(ArtifactKind::Port, std::to_string(*port), std::nullopt);
    return true;
  }
  return false;
}

std::optional<std::string> json_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(ErrorCode::MalformedContainer, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

void merge_artifacts(std::vector<NetworkArtifact>& into, const std::vector<NetworkArtifact>& extra) {
  for (const auto& artifact : extra) {
    bool present = std::any_of(into.begin(), into.end(), [&](const NetworkArtifact& a) {
      return a.kind == artifact.kind && a.value == artifact.value;
    });
    if (!present) into.push_back(artifact);
  }
}

}  // namespace

std::string_view to_string(Source source) {
  switch (source) {
    case Source::DatasetA: return "DatasetA";
    case Source::DatasetB: return "DatasetB";
    case Source::Custom: return "Custom";
  }
  return "Custom";
}

std::optional<TechniqueId> TechniqueId::parse(std::string_view text) {
  static const std::regex kPattern(R"(^T[0-9]{4}(\.[0-9]{3})?$)");
  std::string value(text);
  if (!std::regex_match(value, kPattern)) return std::nullopt;
  return TechniqueId(std::move(value));
}

Vocabulary Vocabulary::from_tsv(std::string_view text) {
  Vocabulary vocabulary;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    auto id = TechniqueId::parse(line.substr(0, tab));
    if (!id) {
      throw Error(ErrorCode::MalformedContainer,
                  "vocabulary line " + std::to_string(line_number) + ": bad technique id");
    }
    std::string name = tab == std::string::npos ? std::string() : line.substr(tab + 1);
    vocabulary.add(*id, normalize_whitespace(name));
  }
  return vocabulary;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return from_tsv(read_file(path)); }

bool Vocabulary::contains(std::string_view id) const {
  auto parsed = TechniqueId::parse(id);
  return parsed && contains(*parsed);
}

const std::string& Vocabulary::name(const TechniqueId& id) const {
  auto it = names_.find(id);
  if (it == names_.end()) throw Error(ErrorCode::MalformedContainer, "unknown technique " + id.value());
  return it->second;
}

std::vector<TechniqueId> Vocabulary::ids() const {
  std::vector<TechniqueId> out;
  out.reserve(names_.size());
  for (const auto& [id, name] : names_) out.push_back(id);
  return out;
}

void Vocabulary::add(TechniqueId id, std::string name) { names_[std::move(id)] = std::move(name); }

std::string_view to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::IPv4: return "ipv4";
    case ArtifactKind::IPv4Cidr: return "ipv4-cidr";
    case ArtifactKind::Domain: return "domain";
    case ArtifactKind::Url: return "url";
    case ArtifactKind::Port: return "port";
    case ArtifactKind::HashMd5: return "md5";
    case ArtifactKind::HashSha256: return "sha256";
  }
  return "unknown";
}

std::optional<ArtifactKind> artifact_kind_from_string(std::string_view text) {
  for (auto kind : {ArtifactKind::IPv4, ArtifactKind::IPv4Cidr, ArtifactKind::Domain, ArtifactKind::Url,
                    ArtifactKind::Port, ArtifactKind::HashMd5, ArtifactKind::HashSha256}) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

std::optional<std::array<std::uint8_t, 4>> parse_ipv4(std::string_view text) {
  std::array<std::uint8_t, 4> octets{};
  std::size_t index = 0;
  while (true) {
    auto dot = text.find('.');
    auto part = text.substr(0, dot);
    if (index >= 4 || !all_digits(part) || part.size() > 3) return std::nullopt;
    if (part.size() > 1 && part.front() == '0') return std::nullopt;
    int value = 0;
    std::from_chars(part.data(), part.data() + part.size(), value);
    if (value > 255) return std::nullopt;
    octets[index++] = static_cast<std::uint8_t>(value);
    if (dot == std::string_view::npos) break;
    text.remove_prefix(dot + 1);
  }
  if (index != 4) return std::nullopt;
  return octets;
}

std::string format_ipv4(const std::array<std::uint8_t, 4>& octets) {
  return std::to_string(octets[0]) + "." + std::to_string(octets[1]) + "." + std::to_string(octets[2]) +
         "." + std::to_string(octets[3]);
}

std::string refang(std::string_view text) {
  static const std::vector<std::pair<std::regex, std::string>> kRules = {
      {std::regex(R"(\bhxxps)", std::regex::icase), "https"},
      {std::regex(R"(\bhxxp)", std::regex::icase), "http"},
      {std::regex(R"(\bfxp://)", std::regex::icase), "ftp://"},
      {std::regex(R"(\[://\])"), "://"},
      {std::regex(R"(\[:\])"), ":"},
      {std::regex(R"(\[\.\]|\(\.\)|\{\.\}|\[dot\]|\(dot\))", std::regex::icase), "."},
  };
  std::string out(text);
  for (const auto& [pattern, replacement] : kRules) out = std::regex_replace(out, pattern, replacement);
  return out;
}

std::vector<NetworkArtifact> extract_iocs(std::string_view text) {
  Collector sink;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::string previous;
  while (in >> raw) {
    std::string_view stripped = strip_token(raw);
    std::string token(stripped);
    std::string canonical = refang(token);
    std::optional<std::string> original;
    if (canonical != token) original = token;
    canonical = std::string(strip_token(canonical));

    bool classified = !canonical.empty() && classify(canonical, original, sink);
    if (!classified) {
      std::string lowered = to_lower(canonical);
      // "port 8443", "ports 80", "tcp 443"; also "tcp/443"
      bool port_context = previous == "port" || previous == "ports" || previous == "tcp" ||
                          previous == "udp";
      std::optional<int> port;
      if (port_context) port = parse_port(lowered);
      if (!port) {
        for (const char* prefix : {"tcp/", "udp/", "port:"}) {
          if (lowered.rfind(prefix, 0) == 0) port = parse_port(std::string_view(lowered).substr(std::strlen(prefix)));
          if (port) break;
        }
      }
      if (port) sink.add(ArtifactKind::Port, std::to_string(*port), std::nullopt);
    }
    previous = to_lower(canonical);
  }
  return std::move(sink.out);
}

ParsedReport parse_report(std::string_view raw, Schema schema, const Vocabulary& vocabulary) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedContainer, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::MalformedContainer, "report container must be a JSON object");

  ParsedReport parsed;
  CtiReport& report = parsed.report;
  auto id = json_string(j, "id");
  if (!id || normalize_whitespace(*id).empty()) {
    throw Error(ErrorCode::MalformedContainer, "report id missing or empty");
  }
  report.id = normalize_whitespace(*id);
  report.source = schema == Schema::DatasetA ? Source::DatasetA : Source::DatasetB;

  if (auto synopsis = json_string(j, "synopsis")) {
    std::string normalized = normalize_whitespace(*synopsis);
    if (!normalized.empty()) report.synopsis = std::move(normalized);
  }

  if (auto it = j.find("statements"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(ErrorCode::MalformedContainer, "'statements' must be an array");
    for (const auto& entry : *it) {
      if (!entry.is_object()) throw Error(ErrorCode::MalformedContainer, "statement must be an object");
      Statement statement;
      statement.text = normalize_whitespace(json_string(entry, "text").value_or(""));
      if (statement.text.empty()) {
        throw Error(ErrorCode::MalformedContainer, "statement text empty in report " + report.id);
      }
      if (auto labels = entry.find("labels"); labels != entry.end() && !labels->is_null()) {
        if (!labels->is_array()) throw Error(ErrorCode::MalformedContainer, "'labels' must be an array");
        for (const auto& label : *labels) {
          std::string text = label.is_string() ? label.get<std::string>() : label.dump();
          auto technique = TechniqueId::parse(text);
          if (!technique || !vocabulary.contains(*technique)) {
            parsed.warnings.push_back("UnknownLabel: " + text + " dropped from report " + report.id);
            continue;
          }
          statement.gold_labels.insert(*technique);
        }
      }
      report.statements.push_back(std::move(statement));
    }
  }

  if (schema == Schema::DatasetB && !report.synopsis) {
    throw Error(ErrorCode::MissingNarrative, "DatasetB report " + report.id + " has no synopsis");
  }
  if (schema == Schema::DatasetA && report.statements.empty()) {
    throw Error(ErrorCode::MissingNarrative, "DatasetA report " + report.id + " has no statements");
  }

  if (auto it = j.find("artifacts"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(ErrorCode::MalformedContainer, "'artifacts' must be an array");
    for (const auto& entry : *it) {
      std::string text;
      if (entry.is_string()) {
        text = entry.get<std::string>();
      } else if (entry.is_object() && entry.contains("value") && entry["value"].is_string()) {
        text = entry["value"].get<std::string>();
      } else if (entry.is_number_integer()) {
        text = "port " + entry.dump();
      } else {
        throw Error(ErrorCode::MalformedContainer, "artifact entries must be strings or {value} objects");
      }
      auto found = extract_iocs(text);
      if (found.empty()) found = extract_iocs("port " + text);
      if (found.empty()) {
        parsed.warnings.push_back("unrecognised artifact '" + text + "' in report " + report.id);
      }
      merge_artifacts(report.artifacts, found);
    }
  }

  if (report.synopsis) merge_artifacts(report.artifacts, extract_iocs(*report.synopsis));
  for (const auto& statement : report.statements) {
    merge_artifacts(report.artifacts, extract_iocs(statement.text));
  }
  return parsed;
}

Corpus load_corpus(const std::filesystem::path& path, Schema schema, const Vocabulary& vocabulary) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(ErrorCode::IoFailure, "no such path: " + path.string());

  std::vector<fs::path> files;
  if (fs::is_directory(path, ec)) {
    for (const auto& entry : fs::directory_iterator(path, ec)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + path.string() + ": " + ec.message());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  } else {
    files.push_back(path);
  }

  Corpus corpus;
  std::set<std::string> ids;
  for (const auto& file : files) {
    try {
      ParsedReport parsed = parse_report(read_file(file), schema, vocabulary);
      if (!ids.insert(parsed.report.id).second) {
        corpus.errors.push_back({file.filename().string(), "duplicate report id " + parsed.report.id});
        continue;
      }
      for (auto& warning : parsed.warnings) corpus.warnings.push_back(std::move(warning));
      corpus.reports.push_back(std::move(parsed.report));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::IoFailure && files.size() == 1) throw;
      corpus.errors.push_back({file.filename().string(), e.what()});
    }
  }
  if (!files.empty() && corpus.reports.empty()) {
    throw Error(ErrorCode::AllReportsFailed,
                "all " + std::to_string(files.size()) + " report file(s) failed to parse; first: " +
                    corpus.errors.front().message);
  }
  return corpus;
}

void to_json(nlohmann::json& j, const NetworkArtifact& artifact) {
  j = nlohmann::json{{"kind", to_string(artifact.kind)}, {"value", artifact.value}};
  if (artifact.defanged_original) j["defanged_original"] = *artifact.defanged_original;
}

void to_json(nlohmann::json& j, const CtiReport& report) {
  j = nlohmann::json::object();
  j["id"] = report.id;
  j["source"] = to_string(report.source);
  if (report.synopsis) j["synopsis"] = *report.synopsis;
  auto statements = nlohmann::json::array();
  for (const auto& statement : report.statements) {
    auto labels = nlohmann::json::array();
    for (const auto& label : statement.gold_labels) labels.push_back(label.value());
    statements.push_back({{"text", statement.text}, {"labels", labels}});
  }
  j["statements"] = statements;
  j["artifacts"] = report.artifacts;
}

CtiReport report_from_json(const nlohmann::json& j) {
  try {
    CtiReport report;
    report.id = j.at("id").get<std::string>();
    auto source = j.value("source", std::string("Custom"));
    report.source = source == "DatasetA" ? Source::DatasetA : source == "DatasetB" ? Source::DatasetB : Source::Custom;
    if (j.contains("synopsis")) report.synopsis = j["synopsis"].get<std::string>();
    for (const auto& s : j.value("statements", nlohmann::json::array())) {
      Statement statement{s.at("text").get<std::string>(), {}};
      for (const auto& label : s.value("labels", nlohmann::json::array())) {
        if (auto id = TechniqueId::parse(label.get<std::string>())) statement.gold_labels.insert(*id);
      }
      report.statements.push_back(std::move(statement));
    }
    for (const auto& a : j.value("artifacts", nlohmann::json::array())) {
      auto kind = artifact_kind_from_string(a.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::MalformedContainer, "unknown artifact kind");
      NetworkArtifact artifact{*kind, a.at("value").get<std::string>(), std::nullopt};
      if (a.contains("defanged_original")) artifact.defanged_original = a["defanged_original"].get<std::string>();
      report.artifacts.push_back(std::move(artifact));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedContainer, e.what());
  }
}

}  // namespace sif::cti
