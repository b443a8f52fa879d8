#include <algorithm>
#include <set>

#include "clips_lexer.hpp"
#include "sif/clips.hpp"

namespace sif::clips {
namespace {

using detail::Token;
using detail::TokenKind;

struct ParseFailure {};

const std::set<std::string>& unsupported_conditional_elements() {
  static const std::set<std::string> kNames = {"not", "or", "and", "test", "exists", "forall", "logical"};
  return kNames;
}

const std::set<std::string>& unsupported_actions() {
  static const std::set<std::string> kNames = {"retract", "modify", "duplicate", "bind", "printout",
                                               "if", "while", "loop-for-count", "halt", "focus"};
  return kNames;
}

bool is_literal(const Token& token) {
  return token.kind == TokenKind::Symbol || token.kind == TokenKind::String ||
         token.kind == TokenKind::Integer || token.kind == TokenKind::Float;
}

class Parser {
 public:
  Parser(const std::vector<Token>& tokens, std::vector<Diagnostic>& diagnostics)
      : tokens_(tokens), diagnostics_(diagnostics) {}

  ClipsProgram parse_program() {
    ClipsProgram program;
    while (peek().kind != TokenKind::End) {
      if (peek().kind != TokenKind::LParen) {
        report(DiagnosticCode::UnexpectedToken, peek(), "expected '(' to open a construct, found '" + peek().text + "'");
        ++pos_;
        continue;
      }
      std::size_t start = pos_;
      try {
        parse_construct(program);
      } catch (const ParseFailure&) {
        pos_ = matching_close(start) + 1;
      }
    }
    return program;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  const Token& next() {
    const Token& token = peek();
    if (pos_ < tokens_.size() - 1) ++pos_;
    return token;
  }

  std::size_t matching_close(std::size_t open) const {
    int depth = 0;
    for (std::size_t i = open; i < tokens_.size(); ++i) {
      if (tokens_[i].kind == TokenKind::LParen) ++depth;
      if (tokens_[i].kind == TokenKind::RParen && --depth == 0) return i;
    }
    return tokens_.size() - 2;
  }

  void report(DiagnosticCode code, const Token& at, std::string message) {
    diagnostics_.push_back({Severity::Error, code, std::move(message), at.line, at.column});
  }

  [[noreturn]] void fail(DiagnosticCode code, const Token& at, std::string message) {
    report(code, at, std::move(message));
    throw ParseFailure{};
  }

  void expect(TokenKind kind, DiagnosticCode code, const char* what) {
    if (peek().kind != kind) fail(code, peek(), std::string("expected ") + what + ", found '" + peek().text + "'");
    next();
  }

  static SourceSpan span_of(const Token& token) { return {token.line, token.column}; }

  std::string construct_name(const char* construct) {
    if (peek().kind != TokenKind::Symbol) {
      fail(DiagnosticCode::MissingName, peek(), std::string(construct) + " requires a symbol name");
    }
    return next().text;
  }

  std::optional<std::string> optional_comment() {
    if (peek().kind == TokenKind::String) return next().text;
    return std::nullopt;
  }

  void parse_construct(ClipsProgram& program) {
    const Token& open = next();
    if (peek().kind != TokenKind::Symbol) fail(DiagnosticCode::UnknownConstruct, peek(), "expected a construct keyword");
    const Token& keyword = next();
    if (keyword.text == "deftemplate") {
      program.templates.push_back(parse_template(open));
    } else if (keyword.text == "deffacts") {
      program.fact_blocks.push_back(parse_fact_block(open));
    } else if (keyword.text == "defrule") {
      program.rules.push_back(parse_rule(open));
    } else {
      fail(DiagnosticCode::UnknownConstruct, keyword, "unsupported construct '" + keyword.text + "'");
    }
  }

  // (deftemplate name ["comment"] (slot|multislot name (type T)? (default v*)?)*)
  TemplateDef parse_template(const Token& open) {
    TemplateDef def;
    def.span = span_of(open);
    def.name = construct_name("deftemplate");
    def.comment = optional_comment();
    while (peek().kind == TokenKind::LParen) def.slots.push_back(parse_slot_def());
    expect(TokenKind::RParen, DiagnosticCode::BadSlotSyntax, "slot definition or ')'");
    return def;
  }

  SlotDef parse_slot_def() {
    const Token& open = next();
    SlotDef slot;
    slot.span = span_of(open);
    const Token& kind = next();
    if (kind.kind != TokenKind::Symbol || (kind.text != "slot" && kind.text != "multislot" && kind.text != "field" &&
                                           kind.text != "multifield")) {
      fail(DiagnosticCode::BadSlotSyntax, kind, "expected 'slot' or 'multislot', found '" + kind.text + "'");
    }
    slot.kind = kind.text.rfind("multi", 0) == 0 ? SlotKind::Multi : SlotKind::Single;
    if (peek().kind != TokenKind::Symbol) fail(DiagnosticCode::BadSlotSyntax, peek(), "slot requires a symbol name");
    slot.name = next().text;
    bool seen_type = false;
    while (peek().kind == TokenKind::LParen) {
      next();
      const Token& attribute = next();
      if (attribute.kind == TokenKind::Symbol && attribute.text == "type" && !seen_type) {
        seen_type = true;
        const Token& type = next();
        if (type.text == "SYMBOL") slot.type = ValueType::Symbol;
        else if (type.text == "STRING") slot.type = ValueType::String;
        else if (type.text == "INTEGER") slot.type = ValueType::Integer;
        else if (type.text == "FLOAT") slot.type = ValueType::Float;
        else fail(DiagnosticCode::BadSlotSyntax, type, "unsupported slot type '" + type.text + "'");
        expect(TokenKind::RParen, DiagnosticCode::BadSlotSyntax, "')' after slot type");
      } else if (attribute.kind == TokenKind::Symbol && attribute.text == "default" && !slot.default_value) {
        std::vector<Value> values;
        while (is_literal(peek())) values.push_back(next().value);
        if (peek().kind != TokenKind::RParen) {
          fail(DiagnosticCode::BadSlotSyntax, peek(), "default values must be literals");
        }
        next();
        slot.default_value = std::move(values);
      } else {
        fail(DiagnosticCode::BadSlotSyntax, attribute, "unsupported or repeated slot attribute '" + attribute.text + "'");
      }
    }
    expect(TokenKind::RParen, DiagnosticCode::BadSlotSyntax, "')' closing slot definition");
    return slot;
  }

  // (deffacts name ["comment"] (template (slot literal*)*)*)
  FactBlock parse_fact_block(const Token& open) {
    FactBlock block;
    block.span = span_of(open);
    block.name = construct_name("deffacts");
    block.comment = optional_comment();
    while (peek().kind == TokenKind::LParen) {
      const Token& fact_open = next();
      FactAssertion fact;
      fact.span = span_of(fact_open);
      if (peek().kind != TokenKind::Symbol) fail(DiagnosticCode::BadFactSyntax, peek(), "fact must name a template");
      fact.template_name = next().text;
      while (peek().kind == TokenKind::LParen) {
        const Token& slot_open = next();
        SlotAssignment assignment;
        assignment.span = span_of(slot_open);
        if (peek().kind != TokenKind::Symbol) fail(DiagnosticCode::BadFactSyntax, peek(), "expected a slot name");
        assignment.slot = next().text;
        while (is_literal(peek())) assignment.values.push_back(next().value);
        if (peek().kind != TokenKind::RParen) {
          fail(DiagnosticCode::BadFactSyntax, peek(), "fact slot values must be literals");
        }
        next();
        fact.slot_values.push_back(std::move(assignment));
      }
      if (peek().kind != TokenKind::RParen) {
        fail(DiagnosticCode::BadFactSyntax, peek(), "ordered facts are not supported; use (slot value) pairs");
      }
      next();
      block.facts.push_back(std::move(fact));
    }
    expect(TokenKind::RParen, DiagnosticCode::BadFactSyntax, "fact or ')'");
    return block;
  }

  RuleDef parse_rule(const Token& open) {
    RuleDef rule;
    rule.span = span_of(open);
    rule.name = construct_name("defrule");
    rule.comment = optional_comment();

    if (peek().kind == TokenKind::LParen && peek(1).kind == TokenKind::Symbol && peek(1).text == "declare") {
      next();
      next();
      if (peek().kind != TokenKind::LParen || peek(1).text != "salience") {
        fail(DiagnosticCode::BadDeclaration, peek(), "only (salience <integer>) may be declared");
      }
      next();
      next();
      const Token& value = next();
      if (value.kind != TokenKind::Integer) fail(DiagnosticCode::BadDeclaration, value, "salience must be an integer");
      auto salience = std::get<std::int64_t>(value.value);
      if (salience < -10000 || salience > 10000) {
        fail(DiagnosticCode::BadDeclaration, value, "salience must lie in [-10000, 10000]");
      }
      rule.salience = static_cast<int>(salience);
      rule.salience_declared = true;
      expect(TokenKind::RParen, DiagnosticCode::BadDeclaration, "')' after salience");
      expect(TokenKind::RParen, DiagnosticCode::BadDeclaration, "')' closing declare");
    }

    while (!(peek().kind == TokenKind::Symbol && peek().text == "=>")) {
      if (peek().kind == TokenKind::RParen || peek().kind == TokenKind::End) {
        fail(DiagnosticCode::MissingArrow, peek(), "rule '" + rule.name + "' has no '=>'");
      }
      rule.lhs.push_back(parse_pattern());
    }
    next();
    while (peek().kind == TokenKind::LParen) parse_action(rule.rhs);
    expect(TokenKind::RParen, DiagnosticCode::BadActionSyntax, "action or ')'");
    return rule;
  }

  Term parse_pattern_term() {
    const Token& token = peek();
    switch (token.kind) {
      case TokenKind::Symbol:
      case TokenKind::String:
      case TokenKind::Integer:
      case TokenKind::Float: next(); return token.value;
      case TokenKind::Variable: next(); return Variable{token.text};
      case TokenKind::Wildcard: next(); return Wildcard{false};
      case TokenKind::MultiWildcard: next(); return Wildcard{true};
      case TokenKind::MultiVariable:
        fail(DiagnosticCode::UnsupportedFeature, token, "multifield variables are not supported");
      case TokenKind::Other:
        fail(DiagnosticCode::UnsupportedFeature, token, "connective constraints are not supported");
      default: fail(DiagnosticCode::BadPatternSyntax, token, "unexpected '" + token.text + "' in pattern");
    }
  }

  std::vector<SlotTerms> parse_slot_terms(DiagnosticCode code, bool rhs) {
    std::vector<SlotTerms> out;
    while (peek().kind == TokenKind::LParen) {
      const Token& open = next();
      SlotTerms slot;
      slot.span = span_of(open);
      if (peek().kind != TokenKind::Symbol) fail(code, peek(), "expected a slot name");
      slot.slot = next().text;
      while (peek().kind != TokenKind::RParen) {
        if (peek().kind == TokenKind::End || peek().kind == TokenKind::LParen) {
          fail(code, peek(), "function calls are not supported in slot values");
        }
        if (rhs && (peek().kind == TokenKind::Wildcard || peek().kind == TokenKind::MultiWildcard)) {
          fail(code, peek(), "wildcards cannot appear in actions");
        }
        slot.terms.push_back(parse_pattern_term());
      }
      next();
      out.push_back(std::move(slot));
    }
    return out;
  }

  Pattern parse_pattern() {
    const Token& start = peek();
    if (start.kind == TokenKind::Variable && peek(1).kind == TokenKind::Other) {
      fail(DiagnosticCode::UnsupportedFeature, start, "fact-address binding is not supported");
    }
    if (start.kind != TokenKind::LParen) fail(DiagnosticCode::BadPatternSyntax, start, "expected a pattern");
    next();
    if (peek().kind != TokenKind::Symbol) fail(DiagnosticCode::BadPatternSyntax, peek(), "pattern must name a template");
    const Token& head = next();
    if (unsupported_conditional_elements().count(head.text) != 0) {
      fail(DiagnosticCode::UnsupportedFeature, head, "conditional element '" + head.text + "' is not supported");
    }
    Pattern pattern;
    pattern.span = span_of(start);
    pattern.template_name = head.text;
    pattern.constraints = parse_slot_terms(DiagnosticCode::BadPatternSyntax, false);
    if (peek().kind != TokenKind::RParen) {
      fail(DiagnosticCode::BadPatternSyntax, peek(), "ordered patterns are not supported; use (slot constraint) pairs");
    }
    next();
    return pattern;
  }

  void parse_action(std::vector<Action>& out) {
    const Token& open = next();
    if (peek().kind != TokenKind::Symbol) fail(DiagnosticCode::BadActionSyntax, peek(), "expected an action name");
    const Token& head = next();
    if (head.text == "assert") {
      if (peek().kind != TokenKind::LParen) fail(DiagnosticCode::BadActionSyntax, peek(), "assert needs a fact");
      while (peek().kind == TokenKind::LParen) {
        const Token& fact_open = next();
        if (peek().kind != TokenKind::Symbol) fail(DiagnosticCode::BadActionSyntax, peek(), "fact must name a template");
        AssertAction action;
        action.template_name = next().text;
        action.slots = parse_slot_terms(DiagnosticCode::BadActionSyntax, true);
        expect(TokenKind::RParen, DiagnosticCode::BadActionSyntax, "')' closing asserted fact");
        out.push_back({std::move(action), span_of(fact_open)});
      }
    } else if (head.text == "emit-capability") {
      if (peek().kind != TokenKind::Symbol) {
        fail(DiagnosticCode::BadActionSyntax, peek(), "emit-capability needs a capability name");
      }
      EmitAction action;
      action.capability = next().text;
      action.params = parse_slot_terms(DiagnosticCode::BadActionSyntax, true);
      for (const auto& param : action.params) {
        if (param.terms.size() != 1) {
          fail(DiagnosticCode::BadActionSyntax, open, "capability parameter '" + param.slot + "' needs exactly one value");
        }
      }
      out.push_back({std::move(action), span_of(open)});
    } else if (unsupported_actions().count(head.text) != 0) {
      fail(DiagnosticCode::UnsupportedFeature, head, "action '" + head.text + "' is not supported");
    } else {
      fail(DiagnosticCode::BadActionSyntax, head, "unknown action '" + head.text + "'");
    }
    expect(TokenKind::RParen, DiagnosticCode::BadActionSyntax, "')' closing action");
  }

  const std::vector<Token>& tokens_;
  std::vector<Diagnostic>& diagnostics_;
  std::size_t pos_ = 0;
};

// Reports the first stray ')' or the outermost '(' left open.
bool check_balance(const std::vector<Token>& tokens, std::vector<Diagnostic>& diagnostics) {
  std::vector<const Token*> open;
  for (const auto& token : tokens) {
    if (token.kind == TokenKind::LParen) {
      open.push_back(&token);
    } else if (token.kind == TokenKind::RParen) {
      if (open.empty()) {
        diagnostics.push_back({Severity::Error, DiagnosticCode::UnbalancedParens, "unexpected ')'", token.line,
                               token.column});
        return false;
      }
      open.pop_back();
    }
  }
  if (!open.empty()) {
    diagnostics.push_back({Severity::Error, DiagnosticCode::UnbalancedParens, "'(' is never closed",
                           open.front()->line, open.front()->column});
    return false;
  }
  return true;
}

}  // namespace

ParseResult parse(std::string_view source) {
  ParseResult result;
  auto lexed = detail::lex(source);
  result.diagnostics = std::move(lexed.diagnostics);
  if (has_errors(result.diagnostics)) return result;
  if (!check_balance(lexed.tokens, result.diagnostics)) return result;

  Parser parser(lexed.tokens, result.diagnostics);
  ClipsProgram program = parser.parse_program();
  if (!has_errors(result.diagnostics)) result.program = std::move(program);
  return result;
}

}  // namespace sif::clips
