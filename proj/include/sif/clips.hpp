#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

// CLIPS subset: deftemplate / deffacts / defrule with literal, variable and
// wildcard slot constraints. Rule actions are `assert` and the built-in
// `emit-capability`.
namespace sif::clips {

struct Symbol {
  std::string name;
  auto operator<=>(const Symbol&) const = default;
};

using Value = std::variant<Symbol, std::string, std::int64_t, double>;

/// Renders a value in CLIPS literal syntax (strings quoted and escaped).
std::string format_value(const Value& value);
/// Plain text of a value: symbol name, unquoted string, or number.
std::string value_text(const Value& value);

/// Source position (1-based). Spans never take part in structural equality:
/// two ASTs that differ only in where they were parsed from compare equal.
struct SourceSpan {
  int line = 0;
  int column = 0;
  bool operator==(const SourceSpan&) const { return true; }
};

enum class SlotKind { Single, Multi };
enum class ValueType { Symbol, String, Integer, Float, Any };

std::string_view to_string(ValueType type);
bool value_matches_type(const Value& value, ValueType type);

struct SlotDef {
  std::string name;
  SlotKind kind = SlotKind::Single;
  ValueType type = ValueType::Any;
  std::optional<std::vector<Value>> default_value;
  SourceSpan span;
  bool operator==(const SlotDef&) const = default;
};

struct TemplateDef {
  std::string name;
  std::optional<std::string> comment;
  std::vector<SlotDef> slots;
  SourceSpan span;

  const SlotDef* find_slot(std::string_view slot) const;
  bool operator==(const TemplateDef&) const = default;
};

struct SlotAssignment {
  std::string slot;
  std::vector<Value> values;
  SourceSpan span;
  bool operator==(const SlotAssignment&) const = default;
};

struct FactAssertion {
  std::string template_name;
  std::vector<SlotAssignment> slot_values;
  SourceSpan span;
  bool operator==(const FactAssertion&) const = default;
};

/// A `deffacts` construct.
struct FactBlock {
  std::string name;
  std::optional<std::string> comment;
  std::vector<FactAssertion> facts;
  SourceSpan span;
  bool operator==(const FactBlock&) const = default;
};

struct Variable {
  std::string name;  // without the leading '?'
  bool operator==(const Variable&) const = default;
};

/// `?` (single field) or `$?` (any number of fields).
struct Wildcard {
  bool multifield = false;
  bool operator==(const Wildcard&) const = default;
};

using Term = std::variant<Value, Variable, Wildcard>;

struct SlotTerms {
  std::string slot;
  std::vector<Term> terms;
  SourceSpan span;
  bool operator==(const SlotTerms&) const = default;
};

struct Pattern {
  std::string template_name;
  std::vector<SlotTerms> constraints;
  SourceSpan span;
  bool operator==(const Pattern&) const = default;
};

struct AssertAction {
  std::string template_name;
  std::vector<SlotTerms> slots;
  bool operator==(const AssertAction&) const = default;
};

/// `(emit-capability <name> (<param> <term>)*)`
struct EmitAction {
  std::string capability;
  std::vector<SlotTerms> params;
  bool operator==(const EmitAction&) const = default;
};

struct Action {
  std::variant<AssertAction, EmitAction> body;
  SourceSpan span;
  bool operator==(const Action&) const = default;
};

struct RuleDef {
  std::string name;
  std::optional<std::string> comment;
  int salience = 0;
  bool salience_declared = false;
  std::vector<Pattern> lhs;
  std::vector<Action> rhs;
  SourceSpan span;
  bool operator==(const RuleDef&) const = default;
};

struct ClipsProgram {
  std::vector<TemplateDef> templates;
  std::vector<FactBlock> fact_blocks;
  std::vector<RuleDef> rules;

  const TemplateDef* find_template(std::string_view name) const;
  bool empty() const { return templates.empty() && fact_blocks.empty() && rules.empty(); }
  bool operator==(const ClipsProgram&) const = default;
};

enum class Severity { Error, Warning };

enum class DiagnosticCode {
  // lexical / syntactic
  UnbalancedParens,
  UnterminatedString,
  UnexpectedToken,
  UnknownConstruct,
  MissingName,
  BadSlotSyntax,
  BadFactSyntax,
  BadPatternSyntax,
  BadActionSyntax,
  BadDeclaration,
  MissingArrow,
  UnsupportedFeature,
  // semantic
  DuplicateTemplate,
  DuplicateSlot,
  EmptyTemplate,
  DefaultTypeMismatch,
  DuplicateFactBlock,
  UndefinedTemplate,
  UndefinedSlot,
  DuplicateSlotValue,
  MissingSlotValue,
  SlotTypeMismatch,
  SlotCardinality,
  DuplicateRule,
  EmptyLhs,
  UnboundVariable,
  MultifieldVariable,
  DuplicateParameter,
  // warnings
  UnusedTemplate,
  // runtime
  RuntimeTypeMismatch,
  CycleLimitExceeded,
};

std::string_view to_string(DiagnosticCode code);
std::vector<DiagnosticCode> all_error_codes();

struct Diagnostic {
  Severity severity = Severity::Error;
  DiagnosticCode code = DiagnosticCode::UnexpectedToken;
  std::string message;
  int line = 0;
  int column = 0;
};

bool has_errors(const std::vector<Diagnostic>& diagnostics);

struct ParseResult {
  std::optional<ClipsProgram> program;  // set iff no Error diagnostics
  std::vector<Diagnostic> diagnostics;
};

ParseResult parse(std::string_view source);

/// Checks templates, then facts against templates, then rules against both.
/// Reports every violation.
std::vector<Diagnostic> validate(const ClipsProgram& program);

/// Canonical source text; `parse(pretty_print(p))` yields a program equal to p.
std::string pretty_print(const ClipsProgram& program);

// ---------------------------------------------------------------------------
// Inference

struct Fact {
  std::size_t id = 0;
  std::string template_name;
  std::vector<std::pair<std::string, std::vector<Value>>> slots;  // template slot order

  bool same_content(const Fact& other) const {
    return template_name == other.template_name && slots == other.slots;
  }
};

std::string format_fact(const Fact& fact);

struct Capability {
  std::string name;
  std::vector<std::pair<std::string, Value>> params;
  std::string rule;
  std::vector<std::size_t> fact_ids;
};

struct Firing {
  std::size_t cycle = 0;
  std::string rule;
  int salience = 0;
  std::vector<std::size_t> fact_ids;  // pattern order
};

struct ExecutionTrace {
  std::vector<Firing> firings;
  std::vector<Fact> final_facts;
  std::vector<Capability> capabilities;
  std::vector<Diagnostic> diagnostics;
  std::size_t cycles = 0;
  bool cycle_limit_exceeded = false;
};

/// Match-resolve-act loop. Conflict resolution: salience, then recency of
/// the newest matched fact, then rule definition order. A rule never fires
/// twice on the same fact tuple. Throws PreconditionViolation when the
/// program or the extra facts carry Error diagnostics.
ExecutionTrace run(const ClipsProgram& program, const std::vector<FactAssertion>& extra_facts,
                   std::size_t max_cycles);

nlohmann::json to_json(const ExecutionTrace& trace);
nlohmann::json to_json(const std::vector<Diagnostic>& diagnostics);

}  // namespace sif::clips
