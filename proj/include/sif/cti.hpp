#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sif::cti {

enum class Schema { DatasetA, DatasetB };
enum class Source { DatasetA, DatasetB, Custom };

std::string_view to_string(Source source);

/// MITRE ATT&CK technique identifier, `T` + 4 digits with an optional
/// `.` + 3 digit sub-technique suffix.
class TechniqueId {
 public:
  static std::optional<TechniqueId> parse(std::string_view text);

  const std::string& value() const noexcept { return value_; }

  auto operator<=>(const TechniqueId&) const = default;

 private:
  explicit TechniqueId(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

/// Technique catalogue loaded from a tab-separated `id<TAB>name` file.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary from_tsv(std::string_view text);
  static Vocabulary load(const std::filesystem::path& path);

  bool contains(const TechniqueId& id) const { return names_.count(id) != 0; }
  bool contains(std::string_view id) const;
  const std::string& name(const TechniqueId& id) const;
  std::vector<TechniqueId> ids() const;
  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }

  void add(TechniqueId id, std::string name);

 private:
  std::map<TechniqueId, std::string> names_;
};

enum class ArtifactKind { IPv4, IPv4Cidr, Domain, Url, Port, HashMd5, HashSha256 };

std::string_view to_string(ArtifactKind kind);
std::optional<ArtifactKind> artifact_kind_from_string(std::string_view text);

struct NetworkArtifact {
  ArtifactKind kind;
  std::string value;  // canonical (refanged) form
  std::optional<std::string> defanged_original;

  bool operator==(const NetworkArtifact&) const = default;
};

struct Statement {
  std::string text;
  std::set<TechniqueId> gold_labels;
};

struct CtiReport {
  std::string id;
  Source source = Source::Custom;
  std::vector<Statement> statements;
  std::vector<NetworkArtifact> artifacts;
  std::optional<std::string> synopsis;
};

struct ParsedReport {
  CtiReport report;
  std::vector<std::string> warnings;  // dropped labels, unrecognised artifacts
};

/// Parses one JSON report container. Throws sif::Error with
/// MalformedContainer or MissingNarrative.
ParsedReport parse_report(std::string_view raw, Schema schema, const Vocabulary& vocabulary);

std::string refang(std::string_view text);

/// Pattern-based indicator extraction. Results are deduplicated on
/// (kind, value), first occurrence wins.
std::vector<NetworkArtifact> extract_iocs(std::string_view text);

std::optional<std::array<std::uint8_t, 4>> parse_ipv4(std::string_view text);
std::string format_ipv4(const std::array<std::uint8_t, 4>& octets);

/// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

struct CorpusError {
  std::string file;
  std::string message;
};

struct Corpus {
  std::vector<CtiReport> reports;
  std::vector<CorpusError> errors;
  std::vector<std::string> warnings;
};

/// Loads a directory of `*.json` containers (lexicographic filename order) or
/// a single container file. Per-file failures are collected; throws IoFailure
/// for an unreadable path and AllReportsFailed when no file parses.
Corpus load_corpus(const std::filesystem::path& path, Schema schema, const Vocabulary& vocabulary);

void to_json(nlohmann::json& j, const NetworkArtifact& artifact);
void to_json(nlohmann::json& j, const CtiReport& report);
CtiReport report_from_json(const nlohmann::json& j);

}  // namespace sif::cti
