#include "sif/refine.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sif/cti.hpp"
#include "sif/error.hpp"

namespace sif::refine {
namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::optional<std::uint16_t> parse_port(std::string_view text) {
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 1 || value > 65535) return std::nullopt;
  return static_cast<std::uint16_t>(value);
}

bool names_host(std::string_view value) {
  for (const auto& artifact : cti::extract_iocs(value)) {
    if (artifact.kind == cti::ArtifactKind::Domain || artifact.kind == cti::ArtifactKind::Url) return true;
  }
  return false;
}

bool host_parameter(const std::string& name) {
  static const std::set<std::string> names = {"domain", "url", "hostname", "host", "fqdn"};
  return names.count(lower(name)) != 0;
}

}  // namespace

std::string_view to_string(Chain chain) {
  switch (chain) {
    case Chain::Input: return "INPUT";
    case Chain::Output: return "OUTPUT";
    case Chain::Forward: return "FORWARD";
  }
  return "INPUT";
}

std::string_view to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::Tcp: return "tcp";
    case Protocol::Udp: return "udp";
    case Protocol::Icmp: return "icmp";
  }
  return "tcp";
}

std::string_view to_string(Target target) { return target == Target::Drop ? "DROP" : "REJECT"; }

std::string_view to_string(Field field) {
  switch (field) {
    case Field::Src: return "src";
    case Field::Dst: return "dst";
    case Field::Sport: return "sport";
    case Field::Dport: return "dport";
    case Field::Protocol: return "protocol";
  }
  return "src";
}

std::optional<Chain> chain_from_string(std::string_view text) {
  for (auto c : {Chain::Input, Chain::Output, Chain::Forward})
    if (to_string(c) == text) return c;
  return std::nullopt;
}

std::optional<Protocol> protocol_from_string(std::string_view text) {
  auto l = lower(text);
  for (auto p : {Protocol::Tcp, Protocol::Udp, Protocol::Icmp})
    if (to_string(p) == l) return p;
  return std::nullopt;
}

std::optional<Target> target_from_string(std::string_view text) {
  if (text == "DROP") return Target::Drop;
  if (text == "REJECT") return Target::Reject;
  return std::nullopt;
}

std::optional<Field> field_from_string(std::string_view text) {
  for (auto f : {Field::Src, Field::Dst, Field::Sport, Field::Dport, Field::Protocol})
    if (to_string(f) == text) return f;
  return std::nullopt;
}

std::optional<Cidr> parse_cidr(std::string_view text) {
  Cidr cidr;
  auto slash = text.find('/');
  auto address = cti::parse_ipv4(text.substr(0, slash));
  if (!address) return std::nullopt;
  cidr.address = *address;
  if (slash != std::string_view::npos) {
    auto digits = text.substr(slash + 1);
    if (digits.empty() || digits.size() > 2 || (digits.size() == 2 && digits[0] == '0')) return std::nullopt;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cidr.prefix);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || cidr.prefix < 0 || cidr.prefix > 32) {
      return std::nullopt;
    }
  }
  return cidr;
}

std::string format_cidr(const Cidr& cidr) { return cti::format_ipv4(cidr.address) + "/" + std::to_string(cidr.prefix); }

std::string rule_problem(const FilterRule& rule) {
  if (!rule.protocol && !rule.src && !rule.dst && !rule.sport && !rule.dport) return "rule has no match criterion";
  if ((rule.sport || rule.dport) && rule.protocol != Protocol::Tcp && rule.protocol != Protocol::Udp) {
    return "port match requires protocol tcp or udp";
  }
  if ((rule.sport && *rule.sport == 0) || (rule.dport && *rule.dport == 0)) return "port 0 is not filterable";
  if ((rule.src && rule.src->prefix > 32) || (rule.dst && rule.dst->prefix > 32) || (rule.src && rule.src->prefix < 0) ||
      (rule.dst && rule.dst->prefix < 0)) {
    return "prefix length outside [0,32]";
  }
  return {};
}

std::string render_iptables(const FilterRule& rule) {
  if (auto problem = rule_problem(rule); !problem.empty()) throw Error(ErrorCode::InvalidRule, problem);
  std::string out = "iptables -A ";
  out += to_string(rule.chain);
  if (rule.protocol) out += " -p " + std::string(to_string(*rule.protocol));
  if (rule.src) out += " -s " + format_cidr(*rule.src);
  if (rule.dst) out += " -d " + format_cidr(*rule.dst);
  if (rule.sport) out += " --sport " + std::to_string(*rule.sport);
  if (rule.dport) out += " --dport " + std::to_string(*rule.dport);
  out += " -j ";
  out += to_string(rule.target);
  return out;
}

// ---------------------------------------------------------------------------
// registry

CapabilityRegistry CapabilityRegistry::builtin() {
  CapabilityRegistry registry;
  registry.entries_["filter-by-source-address"] = {{"ip"}, {{"ip", Field::Src}}, Chain::Input, Target::Drop};
  registry.entries_["filter-by-destination-address"] = {{"ip"}, {{"ip", Field::Dst}}, Chain::Output, Target::Drop};
  registry.entries_["filter-by-destination-port"] = {
      {"port", "proto"}, {{"port", Field::Dport}, {"proto", Field::Protocol}}, Chain::Output, Target::Drop};
  registry.entries_["filter-by-protocol"] = {{"proto"}, {{"proto", Field::Protocol}}, Chain::Input, Target::Drop};
  return registry;
}

CapabilityRegistry CapabilityRegistry::from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidRegistry, why); };
  if (!j.is_object() || j.empty()) fail("registry must be a non-empty object");
  CapabilityRegistry registry;
  for (const auto& [name, spec] : j.items()) {
    if (!spec.is_object()) fail(name + ": entry must be an object");
    RegistryEntry entry;
    auto chain = chain_from_string(spec.value("chain", ""));
    auto target = target_from_string(spec.value("target", "DROP"));
    if (!chain) fail(name + ": chain must be INPUT, OUTPUT or FORWARD");
    if (!target) fail(name + ": target must be DROP or REJECT");
    entry.chain = *chain;
    entry.target = *target;
    if (!spec.contains("params") || !spec["params"].is_object() || spec["params"].empty()) {
      fail(name + ": params must map each parameter to a rule field");
    }
    std::set<Field> used;
    for (const auto& [param, field_name] : spec["params"].items()) {
      auto field = field_name.is_string() ? field_from_string(field_name.get<std::string>()) : std::nullopt;
      if (!field) fail(name + "." + param + ": unknown field");
      if (!used.insert(*field).second) fail(name + ": field " + std::string(to_string(*field)) + " mapped twice");
      entry.params[param] = *field;
    }
    if (!spec.contains("required_params") || !spec["required_params"].is_array()) {
      fail(name + ": required_params must be an array");
    }
    for (const auto& p : spec["required_params"]) {
      if (!p.is_string() || entry.params.count(p.get<std::string>()) == 0) {
        fail(name + ": required parameter " + p.dump() + " has no field");
      }
      entry.required_params.push_back(p.get<std::string>());
    }
    registry.entries_[name] = std::move(entry);
  }
  return registry;
}

CapabilityRegistry CapabilityRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidRegistry, path.string() + ": " + e.what());
  }
  return from_json(j);
}

const RegistryEntry* CapabilityRegistry::find(std::string_view name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

nlohmann::json CapabilityRegistry::to_json() const {
  auto out = nlohmann::json::object();
  for (const auto& [name, entry] : entries_) {
    auto params = nlohmann::json::object();
    for (const auto& [param, field] : entry.params) params[param] = to_string(field);
    out[name] = {{"required_params", entry.required_params},
                 {"params", params},
                 {"chain", to_string(entry.chain)},
                 {"target", to_string(entry.target)}};
  }
  return out;
}

// ---------------------------------------------------------------------------
// refinement

RefinementResult refine(const std::vector<SecurityCapability>& capabilities, const CapabilityRegistry& registry) {
  RefinementResult result;
  auto warn = [&](const SecurityCapability& c, std::string code, std::string message) {
    result.warnings.push_back({std::move(code), c.name, std::move(message), c.provenance});
  };

  for (const auto& capability : capabilities) {
    const RegistryEntry* entry = registry.find(capability.name);
    if (entry == nullptr) throw Error(ErrorCode::UnknownCapability, capability.name);

    bool blocked = false;
    for (const auto& [param, value] : capability.parameters) {
      if (host_parameter(param) || (entry->params.count(param) && names_host(value) && !parse_cidr(cti::refang(value)))) {
        warn(capability, "NonEnforceableArtifact",
             param + "=" + value + " names a host; packet filters match addresses only");
        blocked = true;
      }
    }
    if (blocked) continue;

    for (const auto& required : entry->required_params) {
      if (capability.parameters.count(required) == 0) {
        warn(capability, "MissingParameter", "missing required parameter '" + required + "'");
        blocked = true;
      }
    }
    if (blocked) continue;

    FilterRule rule;
    rule.chain = entry->chain;
    rule.target = entry->target;
    for (const auto& [param, value] : capability.parameters) {
      auto it = entry->params.find(param);
      if (it == entry->params.end()) {
        warn(capability, "UnexpectedParameter", "parameter '" + param + "' is not used by this capability");
        continue;
      }
      bool ok = true;
      switch (it->second) {
        case Field::Src:
        case Field::Dst: {
          auto cidr = parse_cidr(cti::refang(value));
          ok = cidr.has_value();
          if (ok) (it->second == Field::Src ? rule.src : rule.dst) = cidr;
          break;
        }
        case Field::Sport:
        case Field::Dport: {
          auto port = parse_port(value);
          ok = port.has_value();
          if (ok) (it->second == Field::Sport ? rule.sport : rule.dport) = port;
          break;
        }
        case Field::Protocol: {
          rule.protocol = protocol_from_string(value);
          ok = rule.protocol.has_value();
          break;
        }
      }
      if (!ok) {
        warn(capability, "InvalidParameter", param + "=" + value + " is not a valid " + std::string(to_string(it->second)));
        blocked = true;
      }
    }
    if (blocked) continue;
    if (auto problem = rule_problem(rule); !problem.empty()) {
      warn(capability, "InvalidParameter", problem);
      continue;
    }

    auto existing = std::find_if(result.rules.begin(), result.rules.end(),
                                 [&](const RefinedRule& r) { return r.rule == rule; });
    if (existing == result.rules.end()) {
      result.rules.push_back({rule, {capability.provenance}, capability.parameters, capability.name});
    } else if (std::find(existing->provenance.begin(), existing->provenance.end(), capability.provenance) ==
               existing->provenance.end()) {
      existing->provenance.push_back(capability.provenance);
      std::sort(existing->provenance.begin(), existing->provenance.end());
    }
  }
  return result;
}

std::vector<SecurityCapability> capabilities_from_rules(const std::vector<FilterRule>& rules,
                                                        const CapabilityRegistry& registry) {
  std::vector<SecurityCapability> out;
  for (const auto& rule : rules) {
    std::set<Field> present;
    if (rule.src) present.insert(Field::Src);
    if (rule.dst) present.insert(Field::Dst);
    if (rule.sport) present.insert(Field::Sport);
    if (rule.dport) present.insert(Field::Dport);
    if (rule.protocol) present.insert(Field::Protocol);
    for (const auto& [name, entry] : registry.entries()) {
      if (entry.chain != rule.chain || entry.target != rule.target) continue;
      std::set<Field> fields;
      for (const auto& [param, field] : entry.params) fields.insert(field);
      if (fields != present) continue;
      SecurityCapability capability{name, {}, {"", "derived"}};
      for (const auto& [param, field] : entry.params) {
        switch (field) {
          case Field::Src: capability.parameters[param] = format_cidr(*rule.src); break;
          case Field::Dst: capability.parameters[param] = format_cidr(*rule.dst); break;
          case Field::Sport: capability.parameters[param] = std::to_string(*rule.sport); break;
          case Field::Dport: capability.parameters[param] = std::to_string(*rule.dport); break;
          case Field::Protocol: capability.parameters[param] = to_string(*rule.protocol); break;
        }
      }
      out.push_back(std::move(capability));
      break;
    }
  }
  return out;
}

std::string rules_text(const RefinementResult& result) {
  std::string out;
  for (const auto& r : result.rules) out += render_iptables(r.rule) + "\n";
  return out;
}

nlohmann::json provenance_json(const RefinementResult& result) {
  auto rules = nlohmann::json::array();
  for (const auto& r : result.rules) {
    auto origins = nlohmann::json::array();
    for (const auto& p : r.provenance) origins.push_back({{"report", p.report_id}, {"rule", p.rule}});
    rules.push_back({{"command", render_iptables(r.rule)},
                     {"capability", r.capability},
                     {"parameters", r.parameters},
                     {"origins", origins}});
  }
  auto warnings = nlohmann::json::array();
  for (const auto& w : result.warnings) {
    warnings.push_back({{"code", w.code},
                        {"capability", w.capability},
                        {"message", w.message},
                        {"report", w.provenance.report_id},
                        {"rule", w.provenance.rule}});
  }
  return {{"rules", rules}, {"warnings", warnings}};
}

}  // namespace sif::refine
