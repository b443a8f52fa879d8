#include <map>
#include <set>

#include "sif/clips.hpp"

namespace sif::clips {
namespace {

class Validator {
 public:
  explicit Validator(const ClipsProgram& program) : program_(program) {}

  std::vector<Diagnostic> run() {
    check_templates();
    check_fact_blocks();
    check_rules();
    check_unused_templates();
    return std::move(out_);
  }

 private:
  void error(DiagnosticCode code, const SourceSpan& at, std::string message) {
    out_.push_back({Severity::Error, code, std::move(message), at.line, at.column});
  }

  // First definition wins when a name is duplicated.
  const TemplateDef* lookup(const std::string& name) {
    auto it = templates_.find(name);
    return it == templates_.end() ? nullptr : it->second;
  }

  void check_templates() {
    for (const auto& def : program_.templates) {
      if (!templates_.emplace(def.name, &def).second) {
        error(DiagnosticCode::DuplicateTemplate, def.span, "template '" + def.name + "' is defined more than once");
      }
      if (def.slots.empty()) {
        error(DiagnosticCode::EmptyTemplate, def.span, "template '" + def.name + "' declares no slots");
      }
      std::set<std::string> names;
      for (const auto& slot : def.slots) {
        if (!names.insert(slot.name).second) {
          error(DiagnosticCode::DuplicateSlot, slot.span,
                "slot '" + slot.name + "' repeated in template '" + def.name + "'");
        }
        if (!slot.default_value) continue;
        if (slot.kind == SlotKind::Single && slot.default_value->size() != 1) {
          error(DiagnosticCode::SlotCardinality, slot.span, "single slot '" + slot.name + "' needs exactly one default");
        }
        for (const auto& value : *slot.default_value) {
          if (!value_matches_type(value, slot.type)) {
            error(DiagnosticCode::DefaultTypeMismatch, slot.span,
                  "default " + format_value(value) + " is not of type " + std::string(to_string(slot.type)));
          }
        }
      }
    }
  }

  // Shared by deffacts facts (literals only) and asserted facts (terms).
  template <class Assignment, class ValuesOf>
  void check_fact_shape(const std::string& template_name, const std::vector<Assignment>& slots,
                        const SourceSpan& at, ValuesOf values_of) {
    const TemplateDef* def = lookup(template_name);
    if (def == nullptr) {
      error(DiagnosticCode::UndefinedTemplate, at, "fact uses undefined template '" + template_name + "'");
      return;
    }
    used_.insert(template_name);
    std::set<std::string> provided;
    for (const auto& assignment : slots) {
      const SlotDef* slot = def->find_slot(assignment.slot);
      if (slot == nullptr) {
        error(DiagnosticCode::UndefinedSlot, assignment.span,
              "template '" + template_name + "' has no slot '" + assignment.slot + "'");
        continue;
      }
      if (!provided.insert(assignment.slot).second) {
        error(DiagnosticCode::DuplicateSlotValue, assignment.span, "slot '" + assignment.slot + "' assigned twice");
      }
      auto count = values_of(assignment, *slot);
      if (slot->kind == SlotKind::Single && count != 1) {
        error(DiagnosticCode::SlotCardinality, assignment.span,
              "single slot '" + assignment.slot + "' takes exactly one value");
      }
    }
    for (const auto& slot : def->slots) {
      if (!slot.default_value && provided.count(slot.name) == 0) {
        error(DiagnosticCode::MissingSlotValue, at,
              "fact of '" + template_name + "' omits slot '" + slot.name + "' which has no default");
      }
    }
  }

  void check_literal_type(const Value& value, const SlotDef& slot, const SourceSpan& at) {
    if (!value_matches_type(value, slot.type)) {
      error(DiagnosticCode::SlotTypeMismatch, at,
            "value " + format_value(value) + " does not match " + std::string(to_string(slot.type)) + " slot '" +
                slot.name + "'");
    }
  }

  void check_fact_blocks() {
    std::set<std::string> names;
    for (const auto& block : program_.fact_blocks) {
      if (!names.insert(block.name).second) {
        error(DiagnosticCode::DuplicateFactBlock, block.span, "deffacts '" + block.name + "' defined more than once");
      }
      for (const auto& fact : block.facts) {
        check_fact_shape(fact.template_name, fact.slot_values, fact.span,
                         [&](const SlotAssignment& a, const SlotDef& slot) {
                           for (const auto& value : a.values) check_literal_type(value, slot, a.span);
                           return a.values.size();
                         });
      }
    }
  }

  void check_rules() {
    std::set<std::string> names;
    for (const auto& rule : program_.rules) {
      if (!names.insert(rule.name).second) {
        error(DiagnosticCode::DuplicateRule, rule.span, "rule '" + rule.name + "' defined more than once");
      }
      if (rule.lhs.empty()) error(DiagnosticCode::EmptyLhs, rule.span, "rule '" + rule.name + "' has no patterns");

      // variable -> declared type of the first slot that binds it
      std::map<std::string, ValueType> bound;
      for (const auto& pattern : rule.lhs) check_pattern(pattern, bound);
      for (const auto& action : rule.rhs) check_action(action, bound);
    }
  }

  void check_pattern(const Pattern& pattern, std::map<std::string, ValueType>& bound) {
    const TemplateDef* def = lookup(pattern.template_name);
    if (def == nullptr) {
      error(DiagnosticCode::UndefinedTemplate, pattern.span,
            "pattern uses undefined template '" + pattern.template_name + "'");
      // still record bindings so the rhs is not flooded with UnboundVariable
      for (const auto& c : pattern.constraints) {
        for (const auto& term : c.terms) {
          if (const auto* v = std::get_if<Variable>(&term)) bound.emplace(v->name, ValueType::Any);
        }
      }
      return;
    }
    used_.insert(pattern.template_name);
    std::set<std::string> seen;
    for (const auto& constraint : pattern.constraints) {
      const SlotDef* slot = def->find_slot(constraint.slot);
      if (slot == nullptr) {
        error(DiagnosticCode::UndefinedSlot, constraint.span,
              "template '" + pattern.template_name + "' has no slot '" + constraint.slot + "'");
        continue;
      }
      if (!seen.insert(constraint.slot).second) {
        error(DiagnosticCode::DuplicateSlotValue, constraint.span, "slot '" + constraint.slot + "' constrained twice");
      }
      if (slot->kind == SlotKind::Single) {
        if (constraint.terms.size() != 1) {
          error(DiagnosticCode::SlotCardinality, constraint.span,
                "single slot '" + constraint.slot + "' takes exactly one constraint");
        }
        for (const auto& term : constraint.terms) {
          if (const auto* value = std::get_if<Value>(&term)) check_literal_type(*value, *slot, constraint.span);
          if (const auto* v = std::get_if<Variable>(&term)) bound.emplace(v->name, slot->type);
          if (const auto* w = std::get_if<Wildcard>(&term); w && w->multifield) {
            error(DiagnosticCode::SlotCardinality, constraint.span, "'$?' cannot constrain single slot '" + slot->name + "'");
          }
        }
      } else {
        for (const auto& term : constraint.terms) {
          if (const auto* value = std::get_if<Value>(&term)) check_literal_type(*value, *slot, constraint.span);
          if (std::holds_alternative<Variable>(term)) {
            error(DiagnosticCode::MultifieldVariable, constraint.span,
                  "variables cannot bind multislot '" + slot->name + "'");
          }
          if (const auto* w = std::get_if<Wildcard>(&term)) {
            if (!w->multifield || constraint.terms.size() != 1) {
              error(DiagnosticCode::MultifieldVariable, constraint.span,
                    "multislot '" + slot->name + "' accepts a literal sequence or a lone '$?'");
            }
          }
        }
      }
    }
  }

  void check_rhs_term(const Term& term, const SlotDef* slot, const std::map<std::string, ValueType>& bound,
                      const SourceSpan& at) {
    if (const auto* v = std::get_if<Variable>(&term)) {
      auto it = bound.find(v->name);
      if (it == bound.end()) {
        error(DiagnosticCode::UnboundVariable, at, "variable ?" + v->name + " is not bound on the left-hand side");
      } else if (slot != nullptr && slot->type != ValueType::Any && it->second != ValueType::Any &&
                 it->second != slot->type) {
        error(DiagnosticCode::SlotTypeMismatch, at,
              "?" + v->name + " carries " + std::string(to_string(it->second)) + " but slot '" + slot->name +
                  "' is " + std::string(to_string(slot->type)));
      }
    } else if (const auto* value = std::get_if<Value>(&term); value && slot != nullptr) {
      check_literal_type(*value, *slot, at);
    }
  }

  void check_action(const Action& action, const std::map<std::string, ValueType>& bound) {
    if (const auto* a = std::get_if<AssertAction>(&action.body)) {
      const TemplateDef* def = lookup(a->template_name);
      check_fact_shape(a->template_name, a->slots, action.span, [&](const SlotTerms& s, const SlotDef& slot) {
        for (const auto& term : s.terms) check_rhs_term(term, &slot, bound, s.span);
        return s.terms.size();
      });
      if (def == nullptr) {
        for (const auto& s : a->slots) {
          for (const auto& term : s.terms) check_rhs_term(term, nullptr, bound, s.span);
        }
      }
      return;
    }
    const auto& emit = std::get<EmitAction>(action.body);
    std::set<std::string> params;
    for (const auto& param : emit.params) {
      if (!params.insert(param.slot).second) {
        error(DiagnosticCode::DuplicateParameter, param.span, "capability parameter '" + param.slot + "' repeated");
      }
      for (const auto& term : param.terms) check_rhs_term(term, nullptr, bound, param.span);
    }
  }

  void check_unused_templates() {
    for (const auto& def : program_.templates) {
      if (used_.count(def.name) == 0) {
        out_.push_back({Severity::Warning, DiagnosticCode::UnusedTemplate,
                        "template '" + def.name + "' is never used", def.span.line, def.span.column});
      }
    }
  }

  const ClipsProgram& program_;
  std::map<std::string, const TemplateDef*> templates_;
  std::set<std::string> used_;
  std::vector<Diagnostic> out_;
};

}  // namespace

std::vector<Diagnostic> validate(const ClipsProgram& program) { return Validator(program).run(); }

}  // namespace sif::clips
