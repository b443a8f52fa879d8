#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sif::refine {

enum class Chain { Input, Output, Forward };
enum class Protocol { Tcp, Udp, Icmp };
enum class Target { Drop, Reject };
/// Rule field a capability parameter fills.
enum class Field { Src, Dst, Sport, Dport, Protocol };

std::string_view to_string(Chain chain);
std::string_view to_string(Protocol protocol);
std::string_view to_string(Target target);
std::string_view to_string(Field field);
std::optional<Chain> chain_from_string(std::string_view text);
std::optional<Protocol> protocol_from_string(std::string_view text);  // case-insensitive
std::optional<Target> target_from_string(std::string_view text);
std::optional<Field> field_from_string(std::string_view text);

struct Cidr {
  std::array<std::uint8_t, 4> address{};
  int prefix = 32;

  auto operator<=>(const Cidr&) const = default;
};

/// Dotted quad with optional `/prefix`; a bare address becomes /32.
std::optional<Cidr> parse_cidr(std::string_view text);
std::string format_cidr(const Cidr& cidr);

struct FilterRule {
  Chain chain = Chain::Input;
  std::optional<Protocol> protocol;
  std::optional<Cidr> src;
  std::optional<Cidr> dst;
  std::optional<std::uint16_t> sport;
  std::optional<std::uint16_t> dport;
  Target target = Target::Drop;

  auto operator<=>(const FilterRule&) const = default;
};

/// Empty string when the rule can be rendered, otherwise the reason.
std::string rule_problem(const FilterRule& rule);

/// `iptables -A <CHAIN> [-p] [-s] [-d] [--sport] [--dport] -j <TARGET>`.
/// Throws InvalidRule when rule_problem() is non-empty.
std::string render_iptables(const FilterRule& rule);

struct Provenance {
  std::string report_id;
  std::string rule;  // CLIPS rule that emitted the capability

  auto operator<=>(const Provenance&) const = default;
};

struct SecurityCapability {
  std::string name;
  std::map<std::string, std::string> parameters;
  Provenance provenance;
};

struct RegistryEntry {
  std::vector<std::string> required_params;
  std::map<std::string, Field> params;
  Chain chain = Chain::Input;
  Target target = Target::Drop;
};

class CapabilityRegistry {
 public:
  /// filter-by-source-address, filter-by-destination-address,
  /// filter-by-destination-port, filter-by-protocol.
  static CapabilityRegistry builtin();
  /// Throws InvalidRegistry.
  static CapabilityRegistry from_json(const nlohmann::json& j);
  static CapabilityRegistry load(const std::filesystem::path& path);

  const RegistryEntry* find(std::string_view name) const;
  const std::map<std::string, RegistryEntry, std::less<>>& entries() const { return entries_; }
  nlohmann::json to_json() const;

 private:
  std::map<std::string, RegistryEntry, std::less<>> entries_;
};

struct RefinementWarning {
  std::string code;  // NonEnforceableArtifact, MissingParameter, InvalidParameter, UnexpectedParameter
  std::string capability;
  std::string message;
  Provenance provenance;
};

struct RefinedRule {
  FilterRule rule;
  std::vector<Provenance> provenance;  // sorted, unique
  std::map<std::string, std::string> parameters;  // of the first capability producing the rule
  std::string capability;
};

struct RefinementResult {
  std::vector<RefinedRule> rules;  // first-occurrence order, duplicates merged
  std::vector<RefinementWarning> warnings;
};

/// Throws UnknownCapability for names absent from the registry.
RefinementResult refine(const std::vector<SecurityCapability>& capabilities, const CapabilityRegistry& registry);

/// Inverse of refine for rules a registry entry can express.
std::vector<SecurityCapability> capabilities_from_rules(const std::vector<FilterRule>& rules,
                                                        const CapabilityRegistry& registry);

enum class SyntaxErrorCode {
  MissingCommand,
  MissingChain,
  InvalidChain,
  UnknownFlag,
  MissingValue,
  DuplicateFlag,
  FlagOrderViolation,
  InvalidProtocol,
  InvalidAddress,
  PortOutOfRange,
  PortWithoutProtocol,
  NoMatchCriterion,
  MissingTarget,
  InvalidTarget,
  UnexpectedToken,
};

std::string_view to_string(SyntaxErrorCode code);

struct SyntaxError {
  SyntaxErrorCode code;
  std::string message;
  std::size_t token = 0;  // index into the whitespace-split command
};

/// Re-parses a command against the supported iptables subset. Empty = ok.
std::vector<SyntaxError> verify_syntax(std::string_view command);

/// One command per line.
std::string rules_text(const RefinementResult& result);
/// Sidecar: per rule its command, capability, parameters and origins.
nlohmann::json provenance_json(const RefinementResult& result);

}  // namespace sif::refine
