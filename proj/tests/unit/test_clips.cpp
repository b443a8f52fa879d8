#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sif/clips.hpp"
#include "sif/error.hpp"
#include "support/clips_oracle.hpp"

namespace fs = std::filesystem;
using namespace sif::clips;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

ClipsProgram parse_ok(std::string_view source) {
  auto result = parse(source);
  INFO(nlohmann::json(to_json(result.diagnostics)).dump());
  REQUIRE(result.program.has_value());
  REQUIRE(!has_errors(validate(*result.program)));
  return *result.program;
}

std::set<DiagnosticCode> error_codes(std::string_view source) {
  auto result = parse(source);
  std::set<DiagnosticCode> codes;
  auto collect = [&](const std::vector<Diagnostic>& ds) {
    for (const auto& d : ds)
      if (d.severity == Severity::Error) codes.insert(d.code);
  };
  collect(result.diagnostics);
  if (result.program) collect(validate(*result.program));
  return codes;
}

const fs::path kGolden = fs::path(SIF_TEST_DIR) / "golden" / "clips";

}  // namespace

TEST_CASE("deftemplate with two slots") {
  auto program = parse_ok("(deftemplate threat (slot src-ip) (slot port))");
  REQUIRE(program.templates.size() == 1);
  const auto& t = program.templates[0];
  CHECK(t.name == "threat");
  REQUIRE(t.slots.size() == 2);
  CHECK(t.slots[0].name == "src-ip");
  CHECK(t.slots[1].name == "port");
  CHECK(t.slots[0].kind == SlotKind::Single);
  CHECK(t.slots[0].type == ValueType::Any);
  CHECK(t.span.line == 1);
}

TEST_CASE("unclosed template reports UnbalancedParens on line 1") {
  auto result = parse("(deftemplate t (slot a)");
  CHECK_FALSE(result.program.has_value());
  REQUIRE(!result.diagnostics.empty());
  CHECK(result.diagnostics[0].code == DiagnosticCode::UnbalancedParens);
  CHECK(result.diagnostics[0].line == 1);
}

TEST_CASE("empty source is an empty program") {
  auto result = parse("");
  REQUIRE(result.program.has_value());
  CHECK(result.program->empty());
  CHECK(result.diagnostics.empty());
  CHECK(pretty_print(*result.program).empty());
}

TEST_CASE("validator examples") {
  CHECK(error_codes("(deftemplate threat (slot a))\n(defrule r (thret (a ?x)) =>)") ==
        std::set{DiagnosticCode::UndefinedTemplate});
  CHECK(error_codes("(deftemplate t (slot n (type INTEGER)))\n(deffacts f (t (n \"seven\")))") ==
        std::set{DiagnosticCode::SlotTypeMismatch});
  CHECK(error_codes("(deftemplate t (slot a))\n(defrule r (t (a 1)) => (assert (t (a ?x))))") ==
        std::set{DiagnosticCode::UnboundVariable});
}

TEST_CASE("validator reports every violation") {
  auto codes = error_codes(
      "(deftemplate t (slot a) (slot a))\n"
      "(deffacts f (u (a 1)))\n"
      "(defrule r (t (b ?x)) => (assert (t (a ?y))))");
  CHECK(codes.count(DiagnosticCode::DuplicateSlot) == 1);
  CHECK(codes.count(DiagnosticCode::UndefinedTemplate) == 1);
  CHECK(codes.count(DiagnosticCode::UndefinedSlot) == 1);
  CHECK(codes.count(DiagnosticCode::UnboundVariable) == 1);
}

TEST_CASE("each error fixture triggers exactly its code") {
  auto codes = all_error_codes();
  CHECK(codes.size() == 28);
  for (auto code : codes) {
    auto path = kGolden / "errors" / (std::string(to_string(code)) + ".clp");
    INFO(path.string());
    REQUIRE(fs::exists(path));
    CHECK(error_codes(slurp(path)) == std::set{code});
  }
}

TEST_CASE("valid corpus round-trips through pretty_print") {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(kGolden / "valid")) {
    INFO(entry.path().string());
    auto program = parse_ok(slurp(entry.path()));
    auto printed = pretty_print(program);
    auto reparsed = parse(printed);
    REQUIRE(reparsed.program.has_value());
    CHECK(*reparsed.program == program);
    CHECK(pretty_print(*reparsed.program) == printed);
    ++seen;
  }
  CHECK(seen >= 5);
}

TEST_CASE("pretty_print keeps definition order") {
  auto program = parse_ok("(deftemplate b (slot x))\n(deftemplate a (slot y))");
  auto text = pretty_print(program);
  CHECK(text.find("deftemplate b") < text.find("deftemplate a"));
}

TEST_CASE("literal forms survive printing") {
  auto program = parse_ok(
      "(deftemplate v (slot s (type STRING)) (slot f (type FLOAT)) (slot i (type INTEGER)))\n"
      "(deffacts f (v (s \"a \\\"q\\\" \\\\ b\") (f 2.0) (i -3)))");
  const auto& values = program.fact_blocks[0].facts[0].slot_values;
  CHECK(std::get<std::string>(values[0].values[0]) == "a \"q\" \\ b");
  CHECK(std::get<double>(values[1].values[0]) == 2.0);
  CHECK(std::get<std::int64_t>(values[2].values[0]) == -3);
  CHECK(*parse(pretty_print(program)).program == program);
}

TEST_CASE("block-all fires once and emits the source address") {
  auto program = parse_ok(
      "(deftemplate threat (slot src-ip))\n"
      "(deffacts seen (threat (src-ip \"203.0.113.5\")))\n"
      "(defrule block-all (threat (src-ip ?a)) => (emit-capability block-source (ip ?a)))");
  auto trace = run(program, {}, 100);
  REQUIRE(trace.firings.size() == 1);
  CHECK(trace.firings[0].rule == "block-all");
  REQUIRE(trace.capabilities.size() == 1);
  CHECK(trace.capabilities[0].name == "block-source");
  REQUIRE(trace.capabilities[0].params.size() == 1);
  CHECK(trace.capabilities[0].params[0].first == "ip");
  CHECK(value_text(trace.capabilities[0].params[0].second) == "203.0.113.5");
  CHECK_FALSE(trace.cycle_limit_exceeded);
}

TEST_CASE("higher salience fires first") {
  auto program = parse_ok(
      "(deftemplate t (slot a))\n"
      "(deffacts f (t (a 1)))\n"
      "(defrule low (t (a ?x)) => (emit-capability c (v ?x)))\n"
      "(defrule high (declare (salience 10)) (t (a ?x)) => (emit-capability c (v ?x)))");
  auto trace = run(program, {}, 100);
  REQUIRE(trace.firings.size() == 2);
  CHECK(trace.firings[0].rule == "high");
  CHECK(trace.firings[1].rule == "low");
}

TEST_CASE("no rules means no firings and memory equals asserted facts") {
  auto program = parse_ok("(deftemplate t (slot a))\n(deffacts f (t (a 1)) (t (a 2)) (t (a 1)))");
  auto trace = run(program, {}, 100);
  CHECK(trace.firings.empty());
  CHECK(trace.cycles == 0);
  REQUIRE(trace.final_facts.size() == 2);
  CHECK(format_fact(trace.final_facts[0]) == "(t (a 1))");
  CHECK(trace.final_facts[1].id == 2);
}

TEST_CASE("recency breaks salience ties") {
  auto program = parse_ok(
      "(deftemplate t (slot a))\n"
      "(deffacts f (t (a 1)) (t (a 2)))\n"
      "(defrule r (t (a ?x)) => (emit-capability c (v ?x)))");
  auto trace = run(program, {}, 100);
  REQUIRE(trace.firings.size() == 2);
  CHECK(trace.firings[0].fact_ids == std::vector<std::size_t>{2});
  CHECK(trace.firings[1].fact_ids == std::vector<std::size_t>{1});
}

TEST_CASE("cycle limit flags the trace") {
  auto program = parse_ok(
      "(deftemplate n (slot v (type INTEGER)))\n"
      "(deffacts f (n (v 1)) (n (v 2)) (n (v 3)))\n"
      "(defrule r (n (v ?x)) (n (v ?y)) => (emit-capability pair (a ?x) (b ?y)))");
  auto trace = run(program, {}, 4);
  CHECK(trace.cycle_limit_exceeded);
  CHECK(trace.cycles == 4);
  CHECK(trace.firings.size() == 4);
  bool flagged = false;
  for (const auto& d : trace.diagnostics) flagged |= d.code == DiagnosticCode::CycleLimitExceeded;
  CHECK(flagged);
  CHECK(run(program, {}, 100).firings.size() == 9);
}

TEST_CASE("run refuses programs with errors") {
  auto result = parse("(deftemplate t (slot a))\n(defrule r (t (a 1)) => (assert (t (a ?x))))");
  REQUIRE(result.program.has_value());
  CHECK_THROWS_AS(run(*result.program, {}, 10), sif::Error);

  auto ok = parse_ok("(deftemplate t (slot a (type INTEGER)))");
  FactAssertion bad{"t", {{"a", {Value{std::string("x")}}, {}}}, {}};
  CHECK_THROWS_AS(run(ok, {bad}, 10), sif::Error);
}

TEST_CASE("runtime type mismatch skips the assert") {
  auto program = parse_ok(
      "(deftemplate in (slot v))\n"
      "(deftemplate out (slot n (type INTEGER)))\n"
      "(deffacts f (in (v \"text\")) (in (v 4)))\n"
      "(defrule r (in (v ?x)) => (assert (out (n ?x))))");
  auto trace = run(program, {}, 100);
  CHECK(trace.final_facts.size() == 3);
  int mismatches = 0;
  for (const auto& d : trace.diagnostics) mismatches += d.code == DiagnosticCode::RuntimeTypeMismatch;
  CHECK(mismatches == 1);
}

TEST_CASE("trace JSON carries facts, firings and capabilities") {
  auto program = parse_ok(slurp(kGolden / "valid" / "threat.clp"));
  auto json = to_json(run(program, {}, 10));
  CHECK(json["firings"].size() == 1);
  CHECK(json["capabilities"][0]["params"]["ip"] == "203.0.113.5");
  CHECK(json["final_facts"][0]["fact"] == "(threat (src-ip \"203.0.113.5\") (port 8443))");
}

TEST_CASE("engine matches the naive fixpoint oracle on random programs") {
  std::mt19937 rng(20240611);
  int with_rules = 0;
  for (int i = 0; i < 300; ++i) {
    auto generated = sif::test::random_program(rng);
    auto diagnostics = validate(generated.program);
    if (has_errors(diagnostics)) {
      // generator may build a rhs variable typed differently from its slot
      continue;
    }
    with_rules += !generated.program.rules.empty();
    auto trace = run(generated.program, generated.extra, 100000);
    REQUIRE_FALSE(trace.cycle_limit_exceeded);
    auto expected = sif::test::naive_fixpoint(generated.program, generated.extra);
    auto actual = sif::test::project(trace);
    INFO(pretty_print(generated.program));
    CHECK(actual.facts == expected.facts);
    CHECK(actual.capabilities == expected.capabilities);

    // refraction and determinism
    std::set<std::pair<std::string, std::vector<std::size_t>>> seen;
    for (const auto& f : trace.firings) CHECK(seen.insert({f.rule, f.fact_ids}).second);
    CHECK(to_json(run(generated.program, generated.extra, 100000)) == to_json(trace));

    // the generated program also survives printing
    auto reparsed = parse(pretty_print(generated.program));
    REQUIRE(reparsed.program.has_value());
    CHECK(*reparsed.program == generated.program);
  }
  CHECK(with_rules > 100);
}
