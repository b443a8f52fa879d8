#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "sif/error.hpp"
#include "sif/knowledge_graph.hpp"

using namespace sif::kg;

namespace {

sif::ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const sif::Error& e) {
    return e.code();
  }
  FAIL("expected sif::Error");
  return sif::ErrorCode::ConfigError;
}

std::vector<std::pair<std::string, int>> labels_and_distances(const std::vector<RetrievedConcept>& found) {
  std::vector<std::pair<std::string, int>> out;
  for (const auto& r : found) out.emplace_back(r.label, r.semantic_distance);
  return out;
}

}  // namespace

TEST_CASE("insert_concept initialises and rehearses") {
  KnowledgeGraph graph;
  CHECK(graph.insert_concept("FTP", 0).activation == 1.0);
  graph.decay(3);
  CHECK(graph.node("FTP").activation < 1.0);
  const auto& again = graph.insert_concept("FTP", 3);
  CHECK(again.activation == 1.0);
  CHECK(again.last_access == 3);
  graph.insert_concept("SMB", 3);
  CHECK(graph.size() == 2);
}

TEST_CASE("link enforces existence and acyclicity") {
  KnowledgeGraph graph;
  for (const char* label : {"FTP", "network-service", "a", "b"}) graph.insert_concept(label, 0);
  graph.link("FTP", "network-service");
  CHECK(graph.edges().size() == 1);
  graph.link("a", "b");
  CHECK(error_of([&] { graph.link("b", "a"); }) == sif::ErrorCode::CycleError);
  CHECK(error_of([&] { graph.link("a", "a"); }) == sif::ErrorCode::CycleError);
  CHECK(error_of([&] { graph.link("a", "missing"); }) == sif::ErrorCode::MissingNode);
  CHECK(error_of([&] { graph.link("missing", "a"); }) == sif::ErrorCode::MissingNode);
  CHECK(graph.is_acyclic());
}

TEST_CASE("decay follows exp(-dt/S)") {
  const double stability = 2.5;
  KnowledgeGraph graph({stability, 0.01});
  graph.insert_concept("n", 1.0);
  graph.decay(1.0);
  CHECK(graph.node("n").activation == 1.0);

  graph.decay(1.0 + stability);
  CHECK(std::abs(graph.node("n").activation - std::exp(-1.0)) <= 1e-12);
  CHECK(std::abs(graph.node("n").activation - 0.36787944117144233) <= 1e-12);

  CHECK(graph.decay(1.0 + 10 * stability) == 1);
  CHECK_FALSE(graph.contains("n"));
}

TEST_CASE("decay rejects clock regression and is idempotent") {
  KnowledgeGraph graph;
  graph.insert_concept("a", 5);
  CHECK(error_of([&] { graph.decay(4); }) == sif::ErrorCode::ClockRegression);
  graph.insert_concept("b", 6);
  graph.decay(7);
  double a = graph.node("a").activation;
  double b = graph.node("b").activation;
  graph.decay(7);
  CHECK(graph.node("a").activation == a);
  CHECK(graph.node("b").activation == b);
}

TEST_CASE("pruning drops incident edges") {
  KnowledgeGraph graph({1.0, 0.1});
  graph.insert_concept("old", 0);
  graph.insert_concept("new", 5);
  graph.link("old", "new");
  CHECK(graph.decay(5) == 1);
  CHECK(graph.edges().empty());
  CHECK(graph.retrieve("new", 3).size() == 1);
}

TEST_CASE("retrieve: chain and identity") {
  KnowledgeGraph graph;
  for (const char* label : {"A", "B", "C"}) graph.insert_concept(label, 0);
  graph.link("A", "B");
  graph.link("B", "C");
  using V = std::vector<std::pair<std::string, int>>;
  CHECK(labels_and_distances(graph.retrieve("A", 2)) == V{{"A", 0}, {"B", 1}, {"C", 2}});
  CHECK(labels_and_distances(graph.retrieve("A", 1)) == V{{"A", 0}, {"B", 1}});
  CHECK(labels_and_distances(graph.retrieve("A", 0)) == V{{"A", 0}});
  CHECK(labels_and_distances(graph.retrieve("C", 5)) == V{{"C", 0}, {"B", 1}, {"A", 2}});
  CHECK(error_of([&] { graph.retrieve("Z", 1); }) == sif::ErrorCode::MissingNode);
}

TEST_CASE("retrieve: diamond against brute-force shortest paths") {
  KnowledgeGraph graph;
  const std::vector<std::string> labels = {"A", "B", "C", "D"};
  for (const auto& label : labels) graph.insert_concept(label, 0);
  const std::vector<std::pair<int, int>> edges = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
  for (auto [c, p] : edges) graph.link(labels[c], labels[p]);

  // Floyd-Warshall on the undirected 4-node graph.
  const int inf = 1000;
  int dist[4][4];
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) dist[i][j] = i == j ? 0 : inf;
  for (auto [c, p] : edges) dist[c][p] = dist[p][c] = 1;
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);

  auto found = graph.retrieve("A", 2);
  REQUIRE(found.size() == 4);
  int d_count = 0;
  for (const auto& r : found) {
    auto index = std::find(labels.begin(), labels.end(), r.label) - labels.begin();
    CHECK(r.semantic_distance == dist[0][index]);
    d_count += r.label == "D";
  }
  CHECK(d_count == 1);
  CHECK(found.back().label == "D");
  CHECK(found.back().semantic_distance == 2);
}

TEST_CASE("retrieve orders by distance, activation, label") {
  KnowledgeGraph graph;
  graph.insert_concept("root", 0);
  graph.insert_concept("stale", 0);
  graph.insert_concept("z-fresh", 2);
  graph.insert_concept("a-fresh", 2);
  graph.insert_concept("root", 2);
  for (const char* child : {"stale", "z-fresh", "a-fresh"}) graph.link(child, "root");
  graph.decay(2);
  auto found = graph.retrieve("root", 1);
  REQUIRE(found.size() == 4);
  CHECK(found[1].label == "a-fresh");
  CHECK(found[2].label == "z-fresh");
  CHECK(found[3].label == "stale");
}

TEST_CASE("snapshot round-trip") {
  KnowledgeGraph graph({3.0, 0.05});
  graph.insert_concept("x", 0);
  graph.insert_concept("y", 1);
  graph.link("x", "y");
  graph.decay(2);
  auto restored = KnowledgeGraph::from_json(graph.to_json(), graph.params());
  CHECK(restored.to_json() == graph.to_json());
  CHECK(restored.retrieve("x", 1) == graph.retrieve("x", 1));

  auto bad = graph.to_json();
  bad["edges"].push_back({{"child", "y"}, {"parent", "x"}});
  CHECK(error_of([&] { KnowledgeGraph::from_json(bad); }) == sif::ErrorCode::CycleError);
}

TEST_CASE("random operations keep the IsA subgraph acyclic and decay monotone") {
  std::mt19937 rng(1234);
  KnowledgeGraph graph({4.0, 0.01});
  double now = 0;
  std::uniform_int_distribution<int> pick(0, 19);
  std::uniform_int_distribution<int> op(0, 2);
  for (int i = 0; i < 2000; ++i) {
    std::string a = "c" + std::to_string(pick(rng));
    std::string b = "c" + std::to_string(pick(rng));
    switch (op(rng)) {
      case 0: graph.insert_concept(a, now); break;
      case 1:
        try {
          graph.link(a, b);
        } catch (const sif::Error& e) {
          CHECK((e.code() == sif::ErrorCode::CycleError || e.code() == sif::ErrorCode::MissingNode));
        }
        break;
      default: {
        std::map<std::string, double> before;
        for (const auto& n : graph.to_json()["nodes"]) before[n["label"]] = n["activation"];
        now += 0.5;
        graph.decay(now);
        for (const auto& n : graph.to_json()["nodes"]) {
          CHECK(n["activation"].get<double>() <= before[n["label"]]);
        }
      }
    }
    REQUIRE(graph.is_acyclic());
  }
}
