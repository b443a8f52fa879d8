#include "sif/knowledge_graph.hpp"

#include <cmath>
#include <deque>
#include <algorithm>

#include <nlohmann/json.hpp>

#include "sif/error.hpp"

namespace sif::kg {

KnowledgeGraph::KnowledgeGraph(GraphParams params) : params_(params) {
  if (!(params_.default_stability > 0.0)) throw Error(ErrorCode::ConfigError, "stability must be positive");
  if (params_.retention_floor < 0.0 || params_.retention_floor >= 1.0) {
    throw Error(ErrorCode::ConfigError, "retention floor must lie in [0, 1)");
  }
}

const ConceptNode& KnowledgeGraph::insert_concept(const std::string& label, Timestamp now) {
  auto [it, inserted] = nodes_.try_emplace(label);
  ConceptNode& node = it->second;
  if (inserted) {
    node.label = label;
    node.stability = params_.default_stability;
  }
  node.activation = 1.0;
  node.last_access = now;
  return node;
}

bool KnowledgeGraph::reaches(const std::string& from, const std::string& to) const {
  std::set<std::string> visited{from};
  std::vector<std::string> stack{from};
  while (!stack.empty()) {
    std::string current = std::move(stack.back());
    stack.pop_back();
    if (current == to) return true;
    auto it = parents_.find(current);
    if (it == parents_.end()) continue;
    for (const auto& parent : it->second) {
      if (visited.insert(parent).second) stack.push_back(parent);
    }
  }
  return false;
}

void KnowledgeGraph::link(const std::string& child, const std::string& parent) {
  if (!contains(child)) throw Error(ErrorCode::MissingNode, child);
  if (!contains(parent)) throw Error(ErrorCode::MissingNode, parent);
  if (child == parent) throw Error(ErrorCode::CycleError, "self-loop on " + child);
  if (edges_.count({child, parent}) != 0) return;
  // child IsA parent closes a cycle iff child is already an ancestor of parent
  if (reaches(parent, child)) {
    throw Error(ErrorCode::CycleError, child + " -> " + parent + " would close a cycle");
  }
  edges_.emplace(child, parent);
  parents_[child].insert(parent);
  children_[parent].insert(child);
}

std::size_t KnowledgeGraph::decay(Timestamp now) {
  for (const auto& [label, node] : nodes_) {
    if (now < node.last_access) {
      throw Error(ErrorCode::ClockRegression, "decay at " + std::to_string(now) + " precedes last access of " + label);
    }
  }
  std::vector<std::string> pruned;
  for (auto& [label, node] : nodes_) {
    node.activation = std::exp(-(now - node.last_access) / node.stability);
    if (node.activation < params_.retention_floor || node.activation <= 0.0) pruned.push_back(label);
  }
  for (const auto& label : pruned) {
    for (const auto& parent : parents_[label]) children_[parent].erase(label);
    for (const auto& child : children_[label]) parents_[child].erase(label);
    parents_.erase(label);
    children_.erase(label);
    nodes_.erase(label);
  }
  if (!pruned.empty()) {
    std::erase_if(edges_, [&](const auto& edge) { return !contains(edge.first) || !contains(edge.second); });
  }
  return pruned.size();
}

std::vector<RetrievedConcept> KnowledgeGraph::retrieve(const std::string& query, int max_depth) const {
  const ConceptNode& start = node(query);
  std::vector<RetrievedConcept> out{{start.label, 0, start.activation}};
  std::set<std::string> visited{query};
  std::deque<std::pair<std::string, int>> frontier{{query, 0}};
  auto visit = [&](const std::string& label, int distance) {
    if (!visited.insert(label).second) return;
    const ConceptNode& n = nodes_.at(label);
    if (n.activation < params_.retention_floor) return;
    out.push_back({label, distance, n.activation});
    frontier.emplace_back(label, distance);
  };
  while (!frontier.empty()) {
    auto [label, distance] = frontier.front();
    frontier.pop_front();
    if (distance >= max_depth) continue;
    if (auto it = parents_.find(label); it != parents_.end()) {
      for (const auto& parent : it->second) visit(parent, distance + 1);
    }
    if (auto it = children_.find(label); it != children_.end()) {
      for (const auto& child : it->second) visit(child, distance + 1);
    }
  }
  std::sort(out.begin(), out.end(), [](const RetrievedConcept& a, const RetrievedConcept& b) {
    if (a.semantic_distance != b.semantic_distance) return a.semantic_distance < b.semantic_distance;
    if (a.activation != b.activation) return a.activation > b.activation;
    return a.label < b.label;
  });
  return out;
}

const ConceptNode& KnowledgeGraph::node(const std::string& label) const {
  auto it = nodes_.find(label);
  if (it == nodes_.end()) throw Error(ErrorCode::MissingNode, label);
  return it->second;
}

bool KnowledgeGraph::is_acyclic() const {
  // Kahn's algorithm over the edge set only.
  std::map<std::string, int> indegree;
  for (const auto& [label, node] : nodes_) indegree[label] = 0;
  for (const auto& [child, parent] : edges_) ++indegree[parent];
  std::vector<std::string> ready;
  for (const auto& [label, degree] : indegree) {
    if (degree == 0) ready.push_back(label);
  }
  std::size_t removed = 0;
  while (!ready.empty()) {
    std::string label = ready.back();
    ready.pop_back();
    ++removed;
    for (const auto& [child, parent] : edges_) {
      if (child == label && --indegree[parent] == 0) ready.push_back(parent);
    }
  }
  return removed == indegree.size();
}

nlohmann::json KnowledgeGraph::to_json() const {
  auto nodes = nlohmann::json::array();
  for (const auto& [label, n] : nodes_) {
    nodes.push_back({{"label", label},
                     {"activation", n.activation},
                     {"last_access", n.last_access},
                     {"stability", n.stability}});
  }
  auto edges = nlohmann::json::array();
  for (const auto& [child, parent] : edges_) edges.push_back({{"child", child}, {"parent", parent}});
  return {{"nodes", nodes}, {"edges", edges}};
}

KnowledgeGraph KnowledgeGraph::from_json(const nlohmann::json& snapshot, GraphParams params) {
  KnowledgeGraph graph(params);
  try {
    for (const auto& n : snapshot.at("nodes")) {
      ConceptNode node;
      node.label = n.at("label").get<std::string>();
      node.activation = n.at("activation").get<double>();
      node.last_access = n.at("last_access").get<double>();
      node.stability = n.at("stability").get<double>();
      if (!(node.activation > 0.0 && node.activation <= 1.0) || !(node.stability > 0.0)) {
        throw Error(ErrorCode::MalformedContainer, "snapshot node " + node.label + " violates invariants");
      }
      graph.nodes_[node.label] = node;
    }
    for (const auto& e : snapshot.at("edges")) {
      graph.link(e.at("child").get<std::string>(), e.at("parent").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedContainer, e.what());
  }
  return graph;
}

}  // namespace sif::kg
