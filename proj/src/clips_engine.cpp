#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "sif/clips.hpp"
#include "sif/error.hpp"

namespace sif::clips {
namespace {

using Bindings = std::map<std::string, Value>;

bool match_terms(const std::vector<Term>& terms, const std::vector<Value>& values, SlotKind kind,
                 Bindings& bindings) {
  if (kind == SlotKind::Multi) {
    if (terms.size() == 1) {
      if (const auto* w = std::get_if<Wildcard>(&terms.front()); w && w->multifield) return true;
    }
    if (terms.size() != values.size()) return false;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (std::get<Value>(terms[i]) != values[i]) return false;
    }
    return true;
  }
  const Term& term = terms.front();
  const Value& value = values.front();
  if (std::holds_alternative<Wildcard>(term)) return true;
  if (const auto* literal = std::get_if<Value>(&term)) return *literal == value;
  const auto& variable = std::get<Variable>(term);
  auto [it, inserted] = bindings.emplace(variable.name, value);
  return inserted || it->second == value;
}

bool match_pattern(const Pattern& pattern, const TemplateDef& def, const Fact& fact, Bindings& bindings) {
  if (fact.template_name != pattern.template_name) return false;
  for (const auto& constraint : pattern.constraints) {
    const SlotDef* slot = def.find_slot(constraint.slot);
    auto it = std::find_if(fact.slots.begin(), fact.slots.end(),
                           [&](const auto& entry) { return entry.first == constraint.slot; });
    if (!match_terms(constraint.terms, it->second, slot->kind, bindings)) return false;
  }
  return true;
}

struct Activation {
  std::size_t rule = 0;
  std::vector<std::size_t> fact_ids;  // pattern order
  std::vector<std::size_t> recency;   // fact ids, newest first
  Bindings bindings;
};

class Engine {
 public:
  Engine(const ClipsProgram& program, ExecutionTrace& trace) : program_(program), trace_(trace) {}

  void assert_initial(const FactAssertion& fact) {
    const TemplateDef& def = *program_.find_template(fact.template_name);
    std::vector<std::pair<std::string, std::vector<Value>>> provided;
    for (const auto& a : fact.slot_values) provided.emplace_back(a.slot, a.values);
    add_fact(def, provided);
  }

  void run(std::size_t max_cycles) {
    std::size_t cycle = 0;
    while (true) {
      auto agenda = activations();
      if (agenda.empty()) break;
      if (cycle == max_cycles) {
        trace_.cycle_limit_exceeded = true;
        trace_.diagnostics.push_back({Severity::Warning, DiagnosticCode::CycleLimitExceeded,
                                      "stopped after " + std::to_string(max_cycles) + " cycles with " +
                                          std::to_string(agenda.size()) + " pending activation(s)",
                                      0, 0});
        break;
      }
      auto chosen = std::min_element(agenda.begin(), agenda.end(),
                                     [&](const Activation& a, const Activation& b) { return precedes(a, b); });
      ++cycle;
      fire(*chosen, cycle);
    }
    trace_.cycles = cycle;
    trace_.final_facts = facts_;
  }

 private:
  bool precedes(const Activation& a, const Activation& b) const {
    const RuleDef& ra = program_.rules[a.rule];
    const RuleDef& rb = program_.rules[b.rule];
    if (ra.salience != rb.salience) return ra.salience > rb.salience;
    if (a.recency.front() != b.recency.front()) return a.recency.front() > b.recency.front();
    if (a.rule != b.rule) return a.rule < b.rule;
    if (a.recency != b.recency) return a.recency > b.recency;
    return a.fact_ids < b.fact_ids;
  }

  void enumerate(std::size_t rule_index, std::size_t pattern_index, Bindings& bindings,
                 std::vector<std::size_t>& ids, std::vector<Activation>& out) const {
    const RuleDef& rule = program_.rules[rule_index];
    if (pattern_index == rule.lhs.size()) {
      if (fired_.count({rule_index, ids}) != 0) return;
      Activation activation{rule_index, ids, ids, bindings};
      std::sort(activation.recency.begin(), activation.recency.end(), std::greater<>());
      out.push_back(std::move(activation));
      return;
    }
    const Pattern& pattern = rule.lhs[pattern_index];
    const TemplateDef& def = *program_.find_template(pattern.template_name);
    for (const auto& fact : facts_) {
      Bindings extended = bindings;
      if (!match_pattern(pattern, def, fact, extended)) continue;
      ids.push_back(fact.id);
      enumerate(rule_index, pattern_index + 1, extended, ids, out);
      ids.pop_back();
    }
  }

  std::vector<Activation> activations() const {
    std::vector<Activation> out;
    for (std::size_t r = 0; r < program_.rules.size(); ++r) {
      Bindings bindings;
      std::vector<std::size_t> ids;
      enumerate(r, 0, bindings, ids, out);
    }
    return out;
  }

  static std::vector<Value> resolve(const std::vector<Term>& terms, const Bindings& bindings) {
    std::vector<Value> values;
    for (const auto& term : terms) {
      if (const auto* v = std::get_if<Variable>(&term)) {
        values.push_back(bindings.at(v->name));
      } else {
        values.push_back(std::get<Value>(term));
      }
    }
    return values;
  }

  void add_fact(const TemplateDef& def, const std::vector<std::pair<std::string, std::vector<Value>>>& provided) {
    Fact fact;
    fact.template_name = def.name;
    for (const auto& slot : def.slots) {
      auto it = std::find_if(provided.begin(), provided.end(), [&](const auto& p) { return p.first == slot.name; });
      fact.slots.emplace_back(slot.name, it != provided.end() ? it->second : *slot.default_value);
    }
    for (const auto& existing : facts_) {
      if (existing.same_content(fact)) return;
    }
    fact.id = ++next_id_;
    facts_.push_back(std::move(fact));
  }

  void fire(const Activation& activation, std::size_t cycle) {
    const RuleDef& rule = program_.rules[activation.rule];
    fired_.insert({activation.rule, activation.fact_ids});
    trace_.firings.push_back({cycle, rule.name, rule.salience, activation.fact_ids});
    for (const auto& action : rule.rhs) {
      if (const auto* a = std::get_if<AssertAction>(&action.body)) {
        const TemplateDef& def = *program_.find_template(a->template_name);
        std::vector<std::pair<std::string, std::vector<Value>>> provided;
        bool well_typed = true;
        for (const auto& slot : a->slots) {
          auto values = resolve(slot.terms, activation.bindings);
          const SlotDef* slot_def = def.find_slot(slot.slot);
          for (const auto& value : values) {
            if (!value_matches_type(value, slot_def->type)) {
              well_typed = false;
              trace_.diagnostics.push_back({Severity::Error, DiagnosticCode::RuntimeTypeMismatch,
                                            "rule '" + rule.name + "' asserted " + format_value(value) + " into " +
                                                std::string(to_string(slot_def->type)) + " slot '" + slot.slot + "'",
                                            action.span.line, action.span.column});
            }
          }
          provided.emplace_back(slot.slot, std::move(values));
        }
        if (well_typed) add_fact(def, provided);
      } else {
        const auto& emit = std::get<EmitAction>(action.body);
        Capability capability{emit.capability, {}, rule.name, activation.fact_ids};
        for (const auto& param : emit.params) {
          capability.params.emplace_back(param.slot, resolve(param.terms, activation.bindings).front());
        }
        trace_.capabilities.push_back(std::move(capability));
      }
    }
  }

  const ClipsProgram& program_;
  ExecutionTrace& trace_;
  std::vector<Fact> facts_;
  std::size_t next_id_ = 0;
  std::set<std::pair<std::size_t, std::vector<std::size_t>>> fired_;
};

std::string first_error(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::Error) return std::string(to_string(d.code)) + ": " + d.message;
  }
  return {};
}

}  // namespace

ExecutionTrace run(const ClipsProgram& program, const std::vector<FactAssertion>& extra_facts,
                   std::size_t max_cycles) {
  ClipsProgram checked = program;
  if (!extra_facts.empty()) {
    FactBlock extra{"extra-facts", std::nullopt, extra_facts, {}};
    // a unique name keeps DuplicateFactBlock out of the way
    while (std::any_of(checked.fact_blocks.begin(), checked.fact_blocks.end(),
                       [&](const FactBlock& b) { return b.name == extra.name; })) {
      extra.name += "'";
    }
    checked.fact_blocks.push_back(std::move(extra));
  }
  auto diagnostics = validate(checked);
  if (has_errors(diagnostics)) throw Error(ErrorCode::PreconditionViolation, first_error(diagnostics));

  ExecutionTrace trace;
  Engine engine(program, trace);
  for (const auto& block : program.fact_blocks) {
    for (const auto& fact : block.facts) engine.assert_initial(fact);
  }
  for (const auto& fact : extra_facts) engine.assert_initial(fact);
  engine.run(max_cycles);
  return trace;
}

nlohmann::json to_json(const std::vector<Diagnostic>& diagnostics) {
  auto out = nlohmann::json::array();
  for (const auto& d : diagnostics) {
    out.push_back({{"severity", d.severity == Severity::Error ? "error" : "warning"},
                   {"code", to_string(d.code)},
                   {"message", d.message},
                   {"line", d.line},
                   {"column", d.column}});
  }
  return out;
}

nlohmann::json to_json(const ExecutionTrace& trace) {
  auto firings = nlohmann::json::array();
  for (const auto& f : trace.firings) {
    firings.push_back({{"cycle", f.cycle}, {"rule", f.rule}, {"salience", f.salience}, {"facts", f.fact_ids}});
  }
  auto facts = nlohmann::json::array();
  for (const auto& f : trace.final_facts) facts.push_back({{"id", f.id}, {"fact", format_fact(f)}});
  auto capabilities = nlohmann::json::array();
  for (const auto& c : trace.capabilities) {
    auto params = nlohmann::json::object();
    for (const auto& [name, value] : c.params) params[name] = value_text(value);
    capabilities.push_back({{"name", c.name}, {"rule", c.rule}, {"facts", c.fact_ids}, {"params", params}});
  }
  return {{"cycles", trace.cycles},
          {"cycle_limit_exceeded", trace.cycle_limit_exceeded},
          {"firings", firings},
          {"final_facts", facts},
          {"capabilities", capabilities},
          {"diagnostics", to_json(trace.diagnostics)}};
}

}  // namespace sif::clips
