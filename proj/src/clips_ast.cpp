#include <charconv>
#include <sstream>

#include "sif/clips.hpp"

namespace sif::clips {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  std::string text(buffer, ptr);
  // keep the literal a float when re-lexed
  if (text.find_first_of(".eE") == std::string::npos) text += ".0";
  return text;
}

std::string quote(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_term(const Term& term) {
  return std::visit(overloaded{
                        [](const Value& v) { return format_value(v); },
                        [](const Variable& v) { return "?" + v.name; },
                        [](const Wildcard& w) { return std::string(w.multifield ? "$?" : "?"); },
                    },
                    term);
}

void print_slot_terms(std::ostream& out, const std::vector<SlotTerms>& slots) {
  for (const auto& slot : slots) {
    out << " (" << slot.slot;
    for (const auto& term : slot.terms) out << ' ' << format_term(term);
    out << ')';
  }
}

void print_fact(std::ostream& out, const FactAssertion& fact) {
  out << '(' << fact.template_name;
  for (const auto& assignment : fact.slot_values) {
    out << " (" << assignment.slot;
    for (const auto& value : assignment.values) out << ' ' << format_value(value);
    out << ')';
  }
  out << ')';
}

}  // namespace

std::string format_value(const Value& value) {
  return std::visit(overloaded{
                        [](const Symbol& s) { return s.name; },
                        [](const std::string& s) { return quote(s); },
                        [](std::int64_t i) { return std::to_string(i); },
                        [](double d) { return format_double(d); },
                    },
                    value);
}

std::string value_text(const Value& value) {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return format_value(value);
}

std::string_view to_string(ValueType type) {
  switch (type) {
    case ValueType::Symbol: return "SYMBOL";
    case ValueType::String: return "STRING";
    case ValueType::Integer: return "INTEGER";
    case ValueType::Float: return "FLOAT";
    case ValueType::Any: return "ANY";
  }
  return "ANY";
}

bool value_matches_type(const Value& value, ValueType type) {
  switch (type) {
    case ValueType::Symbol: return std::holds_alternative<Symbol>(value);
    case ValueType::String: return std::holds_alternative<std::string>(value);
    case ValueType::Integer: return std::holds_alternative<std::int64_t>(value);
    case ValueType::Float: return std::holds_alternative<double>(value);
    case ValueType::Any: return true;
  }
  return false;
}

const SlotDef* TemplateDef::find_slot(std::string_view slot) const {
  for (const auto& def : slots) {
    if (def.name == slot) return &def;
  }
  return nullptr;
}

const TemplateDef* ClipsProgram::find_template(std::string_view name) const {
  for (const auto& def : templates) {
    if (def.name == name) return &def;
  }
  return nullptr;
}

std::string_view to_string(DiagnosticCode code) {
  switch (code) {
    case DiagnosticCode::UnbalancedParens: return "UnbalancedParens";
    case DiagnosticCode::UnterminatedString: return "UnterminatedString";
    case DiagnosticCode::UnexpectedToken: return "UnexpectedToken";
    case DiagnosticCode::UnknownConstruct: return "UnknownConstruct";
    case DiagnosticCode::MissingName: return "MissingName";
    case DiagnosticCode::BadSlotSyntax: return "BadSlotSyntax";
    case DiagnosticCode::BadFactSyntax: return "BadFactSyntax";
    case DiagnosticCode::BadPatternSyntax: return "BadPatternSyntax";
    case DiagnosticCode::BadActionSyntax: return "BadActionSyntax";
    case DiagnosticCode::BadDeclaration: return "BadDeclaration";
    case DiagnosticCode::MissingArrow: return "MissingArrow";
    case DiagnosticCode::UnsupportedFeature: return "UnsupportedFeature";
    case DiagnosticCode::DuplicateTemplate: return "DuplicateTemplate";
    case DiagnosticCode::DuplicateSlot: return "DuplicateSlot";
    case DiagnosticCode::EmptyTemplate: return "EmptyTemplate";
    case DiagnosticCode::DefaultTypeMismatch: return "DefaultTypeMismatch";
    case DiagnosticCode::DuplicateFactBlock: return "DuplicateFactBlock";
    case DiagnosticCode::UndefinedTemplate: return "UndefinedTemplate";
    case DiagnosticCode::UndefinedSlot: return "UndefinedSlot";
    case DiagnosticCode::DuplicateSlotValue: return "DuplicateSlotValue";
    case DiagnosticCode::MissingSlotValue: return "MissingSlotValue";
    case DiagnosticCode::SlotTypeMismatch: return "SlotTypeMismatch";
    case DiagnosticCode::SlotCardinality: return "SlotCardinality";
    case DiagnosticCode::DuplicateRule: return "DuplicateRule";
    case DiagnosticCode::EmptyLhs: return "EmptyLhs";
    case DiagnosticCode::UnboundVariable: return "UnboundVariable";
    case DiagnosticCode::MultifieldVariable: return "MultifieldVariable";
    case DiagnosticCode::DuplicateParameter: return "DuplicateParameter";
    case DiagnosticCode::UnusedTemplate: return "UnusedTemplate";
    case DiagnosticCode::RuntimeTypeMismatch: return "RuntimeTypeMismatch";
    case DiagnosticCode::CycleLimitExceeded: return "CycleLimitExceeded";
  }
  return "Unknown";
}

std::vector<DiagnosticCode> all_error_codes() {
  return {DiagnosticCode::UnbalancedParens,   DiagnosticCode::UnterminatedString,
          DiagnosticCode::UnexpectedToken,    DiagnosticCode::UnknownConstruct,
          DiagnosticCode::MissingName,        DiagnosticCode::BadSlotSyntax,
          DiagnosticCode::BadFactSyntax,      DiagnosticCode::BadPatternSyntax,
          DiagnosticCode::BadActionSyntax,    DiagnosticCode::BadDeclaration,
          DiagnosticCode::MissingArrow,       DiagnosticCode::UnsupportedFeature,
          DiagnosticCode::DuplicateTemplate,  DiagnosticCode::DuplicateSlot,
          DiagnosticCode::EmptyTemplate,      DiagnosticCode::DefaultTypeMismatch,
          DiagnosticCode::DuplicateFactBlock, DiagnosticCode::UndefinedTemplate,
          DiagnosticCode::UndefinedSlot,      DiagnosticCode::DuplicateSlotValue,
          DiagnosticCode::MissingSlotValue,   DiagnosticCode::SlotTypeMismatch,
          DiagnosticCode::SlotCardinality,    DiagnosticCode::DuplicateRule,
          DiagnosticCode::EmptyLhs,           DiagnosticCode::UnboundVariable,
          DiagnosticCode::MultifieldVariable, DiagnosticCode::DuplicateParameter};
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::Error) return true;
  }
  return false;
}

std::string pretty_print(const ClipsProgram& program) {
  std::ostringstream out;
  bool first = true;
  auto separate = [&] {
    if (!first) out << '\n';
    first = false;
  };

  for (const auto& def : program.templates) {
    separate();
    out << "(deftemplate " << def.name;
    if (def.comment) out << ' ' << quote(*def.comment);
    for (const auto& slot : def.slots) {
      out << "\n  (" << (slot.kind == SlotKind::Multi ? "multislot " : "slot ") << slot.name;
      if (slot.type != ValueType::Any) out << " (type " << to_string(slot.type) << ')';
      if (slot.default_value) {
        out << " (default";
        for (const auto& value : *slot.default_value) out << ' ' << format_value(value);
        out << ')';
      }
      out << ')';
    }
    out << ")\n";
  }

  for (const auto& block : program.fact_blocks) {
    separate();
    out << "(deffacts " << block.name;
    if (block.comment) out << ' ' << quote(*block.comment);
    for (const auto& fact : block.facts) {
      out << "\n  ";
      print_fact(out, fact);
    }
    out << ")\n";
  }

  for (const auto& rule : program.rules) {
    separate();
    out << "(defrule " << rule.name;
    if (rule.comment) out << ' ' << quote(*rule.comment);
    if (rule.salience_declared) out << "\n  (declare (salience " << rule.salience << "))";
    for (const auto& pattern : rule.lhs) {
      out << "\n  (" << pattern.template_name;
      print_slot_terms(out, pattern.constraints);
      out << ')';
    }
    out << "\n  =>";
    for (const auto& action : rule.rhs) {
      std::visit(overloaded{
                     [&](const AssertAction& a) {
                       out << "\n  (assert (" << a.template_name;
                       print_slot_terms(out, a.slots);
                       out << "))";
                     },
                     [&](const EmitAction& e) {
                       out << "\n  (emit-capability " << e.capability;
                       print_slot_terms(out, e.params);
                       out << ')';
                     },
                 },
                 action.body);
    }
    out << ")\n";
  }
  return out.str();
}

std::string format_fact(const Fact& fact) {
  std::ostringstream out;
  out << '(' << fact.template_name;
  for (const auto& [slot, values] : fact.slots) {
    out << " (" << slot;
    for (const auto& value : values) out << ' ' << format_value(value);
    out << ')';
  }
  out << ')';
  return out.str();
}

}  // namespace sif::clips
