// Grammar check for rendered commands. Deliberately shares nothing with the
// renderer in refine.cpp so a rendering bug cannot hide itself.

#include <map>
#include <sstream>

#include "sif/refine.hpp"

namespace sif::refine {
namespace {

struct FlagSpec {
  int rank;
  enum { Chain, Proto, Addr, Port, Target } kind;
};

const std::map<std::string, FlagSpec>& flags() {
  static const std::map<std::string, FlagSpec> table = {
      {"-A", {0, FlagSpec::Chain}},  {"-p", {1, FlagSpec::Proto}},     {"-s", {2, FlagSpec::Addr}},
      {"-d", {3, FlagSpec::Addr}},   {"--sport", {4, FlagSpec::Port}}, {"--dport", {5, FlagSpec::Port}},
      {"-j", {6, FlagSpec::Target}},
  };
  return table;
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

// 0..max without leading zeros; long digit runs are rejected before overflow.
bool small_number(const std::string& s, long max) {
  if (!all_digits(s) || s.size() > 5 || (s.size() > 1 && s[0] == '0')) return false;
  return std::stol(s) <= max;
}

bool valid_address(const std::string& text) {
  std::string address = text;
  auto slash = text.find('/');
  if (slash != std::string::npos) {
    if (!small_number(text.substr(slash + 1), 32)) return false;
    address = text.substr(0, slash);
  }
  int parts = 0;
  std::size_t start = 0;
  while (true) {
    auto dot = address.find('.', start);
    auto octet = address.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!small_number(octet, 255)) return false;
    ++parts;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return parts == 4;
}

}  // namespace

std::string_view to_string(SyntaxErrorCode code) {
  switch (code) {
    case SyntaxErrorCode::MissingCommand: return "MissingCommand";
    case SyntaxErrorCode::MissingChain: return "MissingChain";
    case SyntaxErrorCode::InvalidChain: return "InvalidChain";
    case SyntaxErrorCode::UnknownFlag: return "UnknownFlag";
    case SyntaxErrorCode::MissingValue: return "MissingValue";
    case SyntaxErrorCode::DuplicateFlag: return "DuplicateFlag";
    case SyntaxErrorCode::FlagOrderViolation: return "FlagOrderViolation";
    case SyntaxErrorCode::InvalidProtocol: return "InvalidProtocol";
    case SyntaxErrorCode::InvalidAddress: return "InvalidAddress";
    case SyntaxErrorCode::PortOutOfRange: return "PortOutOfRange";
    case SyntaxErrorCode::PortWithoutProtocol: return "PortWithoutProtocol";
    case SyntaxErrorCode::NoMatchCriterion: return "NoMatchCriterion";
    case SyntaxErrorCode::MissingTarget: return "MissingTarget";
    case SyntaxErrorCode::InvalidTarget: return "InvalidTarget";
    case SyntaxErrorCode::UnexpectedToken: return "UnexpectedToken";
  }
  return "Unknown";
}

std::vector<SyntaxError> verify_syntax(std::string_view command) {
  std::vector<std::string> tokens;
  {
    std::istringstream in{std::string(command)};
    for (std::string t; in >> t;) tokens.push_back(t);
  }
  std::vector<SyntaxError> errors;
  auto fail = [&](SyntaxErrorCode code, std::size_t at, std::string message) {
    errors.push_back({code, std::move(message), at});
  };
  if (tokens.empty() || tokens[0] != "iptables") {
    fail(SyntaxErrorCode::MissingCommand, 0, "command must start with 'iptables'");
    return errors;
  }

  std::map<std::string, std::string> seen;
  int last_rank = -1;
  std::string protocol;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const std::string& token = tokens[i];
    auto it = flags().find(token);
    if (it == flags().end()) {
      if (!token.empty() && token[0] == '-') {
        fail(SyntaxErrorCode::UnknownFlag, i, "unsupported option '" + token + "'");
        if (i + 1 < tokens.size() && tokens[i + 1][0] != '-') ++i;
      } else {
        fail(SyntaxErrorCode::UnexpectedToken, i, "'" + token + "' is not attached to an option");
      }
      continue;
    }
    if (seen.count(token)) fail(SyntaxErrorCode::DuplicateFlag, i, token + " given twice");
    if (it->second.rank <= last_rank) {
      fail(SyntaxErrorCode::FlagOrderViolation, i, token + " is out of the canonical order");
    }
    last_rank = std::max(last_rank, it->second.rank);
    if (i + 1 >= tokens.size() || tokens[i + 1][0] == '-') {
      if (token == "-j") {
        fail(SyntaxErrorCode::MissingTarget, i, "-j needs a target");
      } else {
        fail(SyntaxErrorCode::MissingValue, i, token + " needs a value");
      }
      seen[token] = "";
      continue;
    }
    const std::string& value = tokens[++i];
    seen[token] = value;
    switch (it->second.kind) {
      case FlagSpec::Chain:
        if (value != "INPUT" && value != "OUTPUT" && value != "FORWARD") {
          fail(SyntaxErrorCode::InvalidChain, i, "unknown chain '" + value + "'");
        }
        break;
      case FlagSpec::Proto:
        if (value != "tcp" && value != "udp" && value != "icmp") {
          fail(SyntaxErrorCode::InvalidProtocol, i, "unknown protocol '" + value + "'");
        }
        protocol = value;
        break;
      case FlagSpec::Addr:
        if (!valid_address(value)) fail(SyntaxErrorCode::InvalidAddress, i, "'" + value + "' is not an IPv4 address");
        break;
      case FlagSpec::Port:
        if (!small_number(value, 65535) || value == "0") {
          fail(SyntaxErrorCode::PortOutOfRange, i, "'" + value + "' is not a port in [1,65535]");
        }
        if (protocol != "tcp" && protocol != "udp") {
          fail(SyntaxErrorCode::PortWithoutProtocol, i, token + " requires -p tcp or -p udp before it");
        }
        break;
      case FlagSpec::Target:
        if (value != "DROP" && value != "REJECT") fail(SyntaxErrorCode::InvalidTarget, i, "unknown target '" + value + "'");
        break;
    }
  }
  if (!seen.count("-A")) fail(SyntaxErrorCode::MissingChain, tokens.size(), "no -A <chain>");
  if (!seen.count("-j")) fail(SyntaxErrorCode::MissingTarget, tokens.size(), "no -j <target>");
  if (!seen.count("-p") && !seen.count("-s") && !seen.count("-d") && !seen.count("--sport") && !seen.count("--dport")) {
    fail(SyntaxErrorCode::NoMatchCriterion, tokens.size(), "rule matches every packet");
  }
  return errors;
}

}  // namespace sif::refine
