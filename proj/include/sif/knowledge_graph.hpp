#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sif::kg {

/// Logical time: one tick per processed report.
using Timestamp = double;

struct ConceptNode {
  std::string label;
  double activation = 1.0;
  Timestamp last_access = 0.0;
  double stability = 1.0;
};

struct RetrievedConcept {
  std::string label;
  int semantic_distance = 0;
  double activation = 0.0;

  bool operator==(const RetrievedConcept&) const = default;
};

struct GraphParams {
  double default_stability = 1.0;
  double retention_floor = 0.01;
};

/// Agent memory: concepts joined by IsA edges (child -> parent). Activation
/// follows an exponential forgetting curve, R = exp(-dt / S), and is restored
/// to 1 whenever a concept is inserted again. Retrieval walks IsA edges in
/// both directions and reports the number of levels traversed as the
/// semantic distance.
///
/// Single writer; concurrent const access is safe between mutations.
class KnowledgeGraph {
 public:
  explicit KnowledgeGraph(GraphParams params = {});

  const ConceptNode& insert_concept(const std::string& label, Timestamp now);

  /// Throws MissingNode or CycleError. Re-linking an existing edge is a no-op.
  void link(const std::string& child, const std::string& parent);

  /// Recomputes every activation at `now` and prunes nodes below the
  /// retention floor together with their edges. Returns the pruned count.
  std::size_t decay(Timestamp now);

  std::vector<RetrievedConcept> retrieve(const std::string& query, int max_depth) const;

  bool contains(const std::string& label) const { return nodes_.count(label) != 0; }
  const ConceptNode& node(const std::string& label) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::set<std::pair<std::string, std::string>>& edges() const noexcept { return edges_; }
  const GraphParams& params() const noexcept { return params_; }

  /// True when the IsA subgraph has no directed cycle (checked from scratch).
  bool is_acyclic() const;

  nlohmann::json to_json() const;
  static KnowledgeGraph from_json(const nlohmann::json& snapshot, GraphParams params = {});

 private:
  bool reaches(const std::string& from, const std::string& to) const;

  GraphParams params_;
  std::map<std::string, ConceptNode> nodes_;
  std::set<std::pair<std::string, std::string>> edges_;  // (child, parent)
  std::map<std::string, std::set<std::string>> parents_;
  std::map<std::string, std::set<std::string>> children_;
};

}  // namespace sif::kg
