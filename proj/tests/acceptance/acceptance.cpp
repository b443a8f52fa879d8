// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "sif/clips.hpp"
#include "sif/error.hpp"
#include "sif/knowledge_graph.hpp"
#include "sif/metrics.hpp"
#include "sif/pipeline.hpp"
#include "sif/refine.hpp"
#include "support/clips_oracle.hpp"
#include "support/iptables_fuzz.hpp"
#include "support/metric_oracles.hpp"

namespace fs = std::filesystem;
using namespace sif;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kData = SIF_DATA_DIR;
const fs::path kTests = SIF_TEST_DIR;

// Collects the first few problems of a criterion.
struct Outcome {
  std::vector<std::string> problems;
  std::string summary;

  void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double value, int digits = 2) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << value;
  return out.str();
}

// 1 -------------------------------------------------------------------------

Outcome clips_oracle() {
  Outcome o;
  std::mt19937 rng(20250101);
  auto start = Clock::now();
  int checked = 0, attempts = 0;
  while (checked < 200 && attempts < 5000) {
    ++attempts;
    auto generated = test::random_program(rng);
    if (clips::has_errors(clips::validate(generated.program))) continue;
    auto trace = clips::run(generated.program, generated.extra, 100000);
    auto expected = test::naive_fixpoint(generated.program, generated.extra);
    auto actual = test::project(trace);
    o.expect(!trace.cycle_limit_exceeded, "cycle limit hit on program " + std::to_string(checked));
    o.expect(actual.facts == expected.facts, "working memory differs on program " + std::to_string(checked));
    o.expect(actual.capabilities == expected.capabilities,
             "capabilities differ on program " + std::to_string(checked));
    ++checked;
  }
  double elapsed = seconds_since(start);
  o.expect(checked == 200, "only " + std::to_string(checked) + " valid programs generated");
  o.expect(elapsed < 60.0, "took " + fixed(elapsed) + " s");
  o.summary = std::to_string(checked) + " programs in " + fixed(elapsed) + " s";
  return o;
}

// 2 -------------------------------------------------------------------------

std::set<clips::DiagnosticCode> error_codes(std::string_view source) {
  auto result = clips::parse(source);
  std::set<clips::DiagnosticCode> codes;
  auto collect = [&](const std::vector<clips::Diagnostic>& ds) {
    for (const auto& d : ds)
      if (d.severity == clips::Severity::Error) codes.insert(d.code);
  };
  collect(result.diagnostics);
  if (result.program) collect(clips::validate(*result.program));
  return codes;
}

Outcome parser_round_trip() {
  Outcome o;
  auto golden = kTests / "golden" / "clips";
  int programs = 0;
  for (const auto& entry : fs::directory_iterator(golden / "valid")) {
    auto name = entry.path().filename().string();
    auto first = clips::parse(slurp(entry.path()));
    if (!first.program) {
      o.problems.push_back(name + " does not parse");
      continue;
    }
    auto second = clips::parse(clips::pretty_print(*first.program));
    o.expect(second.program && *second.program == *first.program, name + " changes after printing");
    ++programs;
  }
  o.expect(programs > 0, "no golden programs");

  auto codes = clips::all_error_codes();
  for (auto code : codes) {
    auto path = golden / "errors" / (std::string(clips::to_string(code)) + ".clp");
    auto name = std::string(clips::to_string(code));
    if (!fs::exists(path)) {
      o.problems.push_back("no fixture for " + name);
      continue;
    }
    o.expect(error_codes(slurp(path)).count(code) == 1, name + " fixture does not trigger it");
  }
  o.summary = std::to_string(programs) + " programs round-trip, " + std::to_string(codes.size()) +
              " error classes covered";
  return o;
}

// 3 -------------------------------------------------------------------------

Outcome metric_oracles() {
  using namespace metrics;
  Outcome o;
  constexpr double tol = 1e-9;
  std::mt19937 rng(4242);
  auto near = [&](double a, double b, const std::string& what) {
    o.expect(std::abs(a - b) < tol, what + ": " + fixed(a, 12) + " vs " + fixed(b, 12));
  };
  std::map<std::string, int> checked;
  for (int i = 0; i < 600; ++i) {
    std::set<std::string> vocab;
    auto preds = test::random_predictions(rng, vocab);
    auto [f1, acc] = test::oracle_weighted(preds, vocab);
    near(weighted_f1(preds, vocab), f1, "weighted F1");
    near(weighted_accuracy(preds, vocab), acc, "weighted accuracy");
    near(hamming_loss(preds, vocab), test::oracle_hamming(preds, vocab), "hamming loss");
    for (std::size_t k = 1; k <= 5; ++k) near(top_k_accuracy(preds, k), test::oracle_top_k(preds, k), "top-k");
    checked["multilabel"]++;

    static const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
    auto sentence = [&] {
      std::string s;
      int n = std::uniform_int_distribution<int>(1, 9)(rng);
      for (int w = 0; w < n; ++w) s += words[std::uniform_int_distribution<std::size_t>(0, 4)(rng)] + " ";
      return s;
    };
    auto a = sentence(), b = sentence();
    near(rouge_l_f1(a, b), test::oracle_rouge_l(a, b), "rouge-l");
    checked["rouge"]++;

    auto ratings = test::random_ratings(rng, 2 + static_cast<std::size_t>(i % 3), true);
    for (auto level : {AlphaLevel::Nominal, AlphaLevel::Ordinal, AlphaLevel::Interval}) {
      try {
        near(krippendorff_alpha(ratings, level), test::oracle_alpha(ratings, level),
             "alpha " + std::string(to_string(level)));
        checked["alpha " + std::string(to_string(level))]++;
      } catch (const Error& e) {
        o.expect(e.code() == ErrorCode::InsufficientData, e.what());
      }
    }
    auto pair = test::random_ratings(rng, 2, false);
    for (auto w : {KappaWeighting::Unweighted, KappaWeighting::Linear, KappaWeighting::Quadratic}) {
      try {
        near(cohen_kappa(pair, w), test::oracle_kappa(pair, w), "kappa " + std::string(to_string(w)));
        checked["kappa " + std::string(to_string(w))]++;
      } catch (const Error& e) {
        o.expect(e.code() == ErrorCode::DegenerateMarginals, e.what());
      }
    }
    std::vector<double> x, y;
    for (const auto& row : pair.rows) {
      x.push_back(*row[0]);
      y.push_back(*row[1]);
    }
    try {
      near(spearman_rho(x, y), test::oracle_spearman(x, y), "spearman");
      checked["rho"]++;
    } catch (const Error& e) {
      o.expect(e.code() == ErrorCode::ZeroVariance, e.what());
    }
  }
  int fewest = 1 << 30;
  for (const auto& [name, n] : checked) {
    o.expect(n >= 500, name + " checked on only " + std::to_string(n) + " instances");
    fewest = std::min(fewest, n);
  }
  o.expect(checked.size() == 9, "a metric family was never checked");

  // trivial cases
  RatingMatrix same{5, {{1, 1}, {3, 3}, {5, 5}, {2, 2}}};
  for (auto level : {AlphaLevel::Nominal, AlphaLevel::Ordinal, AlphaLevel::Interval})
    o.expect(krippendorff_alpha(same, level) == 1.0, "perfect agreement alpha");
  for (auto w : {KappaWeighting::Unweighted, KappaWeighting::Linear, KappaWeighting::Quadratic})
    o.expect(cohen_kappa(same, w) == 1.0, "perfect agreement kappa");
  o.expect(spearman_rho({1, 2, 3, 4}, {1, 2, 3, 4}) == 1.0, "identical ranks rho");
  o.expect(spearman_rho({1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}) == -1.0, "reversal rho");
  StatementPrediction perfect{"s", {"T1"}, {{"T1", 0.9, 1}}};
  o.expect(weighted_f1({perfect}, {"T1"}) == 1.0, "perfect F1");
  o.expect(rouge_l_f1("a b c", "a b c") == 1.0, "identical rouge-l");

  const double stability = 3.0;
  kg::KnowledgeGraph graph({stability, 0.01});
  graph.insert_concept("n", 2.0);
  graph.decay(2.0 + stability);
  double decayed = graph.node("n").activation;
  o.expect(std::abs(decayed - std::exp(-1.0)) <= 1e-12, "decay after one stability period: " + fixed(decayed, 15));

  o.summary = "600 random instances, every family checked >= " + std::to_string(fewest) + " times";
  return o;
}

// 4 -------------------------------------------------------------------------

Outcome threshold_monotonicity() {
  Outcome o;
  auto config = pipeline::PipelineConfig::load(kData / "fixtures" / "dataseta" / "config.json");
  auto vocab = cti::Vocabulary::load(config.vocabulary);
  auto corpus = cti::load_corpus(config.corpus, config.schema, vocab);
  auto templates = pipeline::load_templates(config);
  auto client = llm::ScriptedMock::load(config.backend.transcript);
  semantic::Context ctx{config.decoding, templates, {}};

  auto predict = [&](int threshold) {
    auto strategy = config.strategy;
    strategy.threshold_percent = threshold;
    std::vector<StatementPrediction> all;
    for (const auto& report : corpus.reports) {
      auto preds = pipeline::predictions_of(pipeline::extract_report(report, vocab, strategy, client, ctx));
      all.insert(all.end(), preds.begin(), preds.end());
    }
    return all;
  };
  auto loose = predict(50);
  auto strict = predict(60);
  o.expect(loose.size() == strict.size() && !loose.empty(), "statement counts differ");
  std::size_t total_loose = 0, total_strict = 0, strict_subsets = 0;
  for (std::size_t i = 0; i < std::min(loose.size(), strict.size()); ++i) {
    auto a = test::predicted_set(loose[i]);
    auto b = test::predicted_set(strict[i]);
    o.expect(loose[i].statement_id == strict[i].statement_id, "statement order differs");
    o.expect(std::includes(a.begin(), a.end(), b.begin(), b.end()),
             loose[i].statement_id + ": threshold 60 predicts a label threshold 50 does not");
    total_loose += a.size();
    total_strict += b.size();
    strict_subsets += b.size() < a.size();
  }
  o.expect(strict_subsets > 0, "threshold 60 never drops a prediction on the fixture");

  double previous = 0.0;
  for (std::size_t k = 1; k <= 20; ++k) {
    double top = metrics::top_k_accuracy(loose, k);
    o.expect(top >= previous, "top-k accuracy drops at k=" + std::to_string(k));
    previous = top;
  }
  o.summary = std::to_string(loose.size()) + " statements, " + std::to_string(total_loose) + " labels at 50, " +
              std::to_string(total_strict) + " at 60 (" + std::to_string(strict_subsets) +
              " strict subsets); top-20 acc " + fixed(previous);
  return o;
}

// 5 -------------------------------------------------------------------------

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), root).generic_string();
    if (rel == "manifest.json") continue;
    files[rel] = slurp(entry.path());
  }
  return files;
}

std::string shell_quote(const std::string& text) {
  std::string out = "'";
  for (char c : text) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

Outcome offline_determinism() {
  Outcome o;
  auto out = fs::temp_directory_path() / ("sif_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(out);
  auto config = kData / "fixtures" / "datasetb" / "config.json";
  auto command = shell_quote(SIF_CLI) + " run --offline --config " + shell_quote(config.string()) + " --out " +
                 shell_quote(out.string()) + " > " + shell_quote((out.string() + ".log")) + " 2>&1";

  auto start = Clock::now();
  int first = std::system(command.c_str());
  int second = std::system(command.c_str());
  double elapsed = seconds_since(start);
  o.expect(first == 0 && second == 0, "run exited non-zero; see " + out.string() + ".log");

  auto a = out / "run-0001", b = out / "run-0002";
  std::size_t lines = 0, files = 0;
  if (fs::exists(a) && fs::exists(b)) {
    auto ta = tree(a), tb = tree(b);
    files = ta.size();
    o.expect(ta == tb, "output trees differ");
    auto ma = nlohmann::json::parse(slurp(a / "manifest.json"));
    auto mb = nlohmann::json::parse(slurp(b / "manifest.json"));
    ma.erase("timing");
    mb.erase("timing");
    o.expect(ma == mb, "manifests differ outside timing");

    std::string listed;
    for (const auto& [rel, text] : ta) {
      if (fs::path(rel).filename() != "rules.txt") continue;
      auto problems = pipeline::verify_rules_text(text);
      o.expect(problems.empty(), rel + ": " + (problems.empty() ? "" : problems.front()));
      lines += static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
      listed += " " + shell_quote((a / rel).string());
    }
    o.expect(lines > 0, "no iptables lines emitted");
    auto verify = shell_quote(SIF_CLI) + " verify" + listed + " > /dev/null 2>&1";
    o.expect(std::system(verify.c_str()) == 0, "sif verify rejected emitted rules");
  } else {
    o.problems.push_back("run directories missing");
  }
  o.expect(elapsed < 10.0, "two runs took " + fixed(elapsed) + " s");
  if (o.problems.empty()) {
    fs::remove_all(out);
    fs::remove(out.string() + ".log");
  }
  o.summary = std::to_string(files) + " files identical, " + std::to_string(lines) + " rules verified, " +
              fixed(elapsed) + " s for two runs";
  return o;
}

// 6 -------------------------------------------------------------------------

Outcome verifier_fuzz() {
  Outcome o;
  std::mt19937 rng(606);
  int rejected = 0, accepted = 0;
  for (int i = 0; i < 1000; ++i) {
    auto command = refine::render_iptables(test::random_rule(rng));
    bool clean = refine::verify_syntax(command).empty();
    o.expect(clean, "rendered rule rejected: " + command);
    accepted += clean;
    auto mutated = test::mutate(command, static_cast<test::Mutation>(i % 3), rng);
    bool caught = mutated != command && !refine::verify_syntax(mutated).empty();
    o.expect(caught, "mutation accepted: " + mutated);
    rejected += caught;
  }
  o.summary = std::to_string(rejected) + "/1000 mutations rejected, " + std::to_string(accepted) +
              "/1000 originals accepted";
  return o;
}

// 7 -------------------------------------------------------------------------

// Independent cycle check over the serialized edges.
bool acyclic(const nlohmann::json& snapshot) {
  std::map<std::string, std::vector<std::string>> parents;
  for (const auto& e : snapshot["edges"]) parents[e["child"]].push_back(e["parent"]);
  std::map<std::string, int> state;  // 1 on stack, 2 done
  std::function<bool(const std::string&)> visit = [&](const std::string& n) {
    if (state[n] == 1) return false;
    if (state[n] == 2) return true;
    state[n] = 1;
    for (const auto& p : parents[n])
      if (!visit(p)) return false;
    state[n] = 2;
    return true;
  };
  for (const auto& [n, _] : parents)
    if (!visit(n)) return false;
  return true;
}

Outcome graph_properties() {
  Outcome o;
  std::mt19937 rng(77);
  kg::KnowledgeGraph graph({4.0, 0.01});
  double now = 0;
  std::uniform_int_distribution<int> pick(0, 24);
  std::uniform_int_distribution<int> op(0, 2);
  int cycles_refused = 0, violations = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string a = "c" + std::to_string(pick(rng));
    std::string b = "c" + std::to_string(pick(rng));
    switch (op(rng)) {
      case 0: graph.insert_concept(a, now); break;
      case 1:
        try {
          graph.link(a, b);
        } catch (const Error& e) {
          cycles_refused += e.code() == ErrorCode::CycleError;
          o.expect(e.code() == ErrorCode::CycleError || e.code() == ErrorCode::MissingNode, e.what());
        }
        break;
      default: {
        now += 0.25;
        graph.decay(now);
        auto once = graph.to_json();
        graph.decay(now);
        if (graph.to_json() != once) ++violations;
      }
    }
    if (!acyclic(graph.to_json())) {
      o.problems.push_back("cycle after operation " + std::to_string(i));
      break;
    }
  }
  o.expect(violations == 0, std::to_string(violations) + " repeated decays changed the graph");

  kg::KnowledgeGraph diamond;
  for (const auto* label : {"A", "B", "C", "D"}) diamond.insert_concept(label, 0);
  diamond.link("A", "B");
  diamond.link("A", "C");
  diamond.link("B", "D");
  diamond.link("C", "D");
  std::map<std::string, int> seen;
  for (const auto& r : diamond.retrieve("A", 3)) seen[r.label]++;
  o.expect(seen == std::map<std::string, int>{{"A", 1}, {"B", 1}, {"C", 1}, {"D", 1}},
           "diamond retrieval does not return each node once");

  o.summary = "10000 operations, " + std::to_string(cycles_refused) + " cycle-closing links refused";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 clips engine matches naive fixpoint oracle", clips_oracle},
      {"2 parser round-trip and error fixtures", parser_round_trip},
      {"3 metrics match brute-force oracles", metric_oracles},
      {"4 threshold monotonicity and top-k", threshold_monotonicity},
      {"5 offline run determinism", offline_determinism},
      {"6 verifier rejects fuzzed commands", verifier_fuzz},
      {"7 knowledge graph properties", graph_properties},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome.problems.push_back(std::string("exception: ") + e.what());
    }
    bool ok = outcome.problems.empty();
    failed += !ok;
    std::cout << (ok ? "PASS " : "FAIL ") << name;
    if (!outcome.summary.empty()) std::cout << " (" << outcome.summary << ")";
    std::cout << "\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(outcome.problems.size(), 5); ++i)
      std::cout << "     " << outcome.problems[i] << "\n";
    if (outcome.problems.size() > 5) std::cout << "     ... " << outcome.problems.size() - 5 << " more\n";
  }
  return failed == 0 ? 0 : 1;
}
