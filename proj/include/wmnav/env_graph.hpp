#pragma once

// Episodic environment graph. Nodes are waypoints in the episode frame (the
// start is the origin) carrying a scan embedding; directed edges carry
// (cos θ, sin θ, distance) and always come in opposite pairs.

#include <algorithm>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmnav/env.hpp"
#include "wmnav/waypoint.hpp"

namespace wmnav {

using NodeId = int;

inline constexpr double kMergeRadius = 0.5;

enum class NodeStatus { Visited, Frontier, Imagined };

inline const char* to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::Visited: return "visited";
    case NodeStatus::Frontier: return "frontier";
    case NodeStatus::Imagined: return "imagined";
  }
  return "?";
}

inline NodeStatus node_status_from_string(const std::string& s) {
  if (s == "visited") return NodeStatus::Visited;
  if (s == "frontier") return NodeStatus::Frontier;
  if (s == "imagined") return NodeStatus::Imagined;
  throw std::invalid_argument("unknown node status: " + s);
}

struct EdgeEmbedding {
  double cos_theta = 1.0;
  double sin_theta = 0.0;
  double distance = 0.0;
  bool operator==(const EdgeEmbedding&) const = default;
};

/// Embedding of the edge u -> v: direction from u to v in the world frame.
inline EdgeEmbedding edge_embedding(Vec2 from, Vec2 to) {
  const Vec2 d = to - from;
  const double n = d.norm();
  if (n == 0.0) return {1.0, 0.0, 0.0};
  return {d.x / n, d.y / n, n};
}

inline std::uint64_t observation_key(const Observation& obs) {
  std::uint64_t h = 0x0b5e77a110ULL;
  for (double r : obs.ranges) h = hash_combine(h, hash_double(r));
  return h;
}

using ObservationPtr = std::shared_ptr<const Observation>;

inline ObservationPtr make_observation(Observation obs) { return std::make_shared<const Observation>(obs); }

struct Neighbor {
  NodeId id = 0;
  EdgeEmbedding edge;  // this node -> id
};

struct EGNode {
  NodeId id = 0;
  Vec2 position;
  ObservationPtr embedding;
  std::uint64_t embedding_key = 0;
  NodeStatus status = NodeStatus::Frontier;
  int synthesis_depth = 0;
  bool expanded = false;  // imagination already grown from this node
  std::vector<Neighbor> neighbors;  // sorted by id

  const Observation& observation() const { return *embedding; }
};

class EnvGraph {
 public:
  EnvGraph() = default;

  const std::vector<EGNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  NodeId start_id() const { return start_id_; }
  NodeId next_id() const { return next_id_; }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const EGNode& v : nodes_) n += v.neighbors.size();
    return n;
  }

  bool contains(NodeId id) const { return find(id) != nullptr; }

  const EGNode* find(NodeId id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id, [](const EGNode& n, NodeId v) { return n.id < v; });
    return (it != nodes_.end() && it->id == id) ? &*it : nullptr;
  }
  EGNode* find(NodeId id) { return const_cast<EGNode*>(std::as_const(*this).find(id)); }

  const EGNode& node(NodeId id) const {
    const EGNode* n = find(id);
    if (!n) throw ContractError("unknown node id " + std::to_string(id));
    return *n;
  }
  EGNode& node(NodeId id) { return const_cast<EGNode&>(std::as_const(*this).node(id)); }

  std::size_t index_of(NodeId id) const {
    return static_cast<std::size_t>(&node(id) - nodes_.data());
  }

  NodeId add_node(Vec2 position, ObservationPtr obs, NodeStatus status, int synthesis_depth) {
    EGNode n;
    n.id = next_id_++;
    n.position = position;
    n.embedding_key = observation_key(*obs);
    n.embedding = std::move(obs);
    n.status = status;
    n.synthesis_depth = synthesis_depth;
    if (nodes_.empty()) start_id_ = n.id;
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
  }

  bool adjacent(NodeId u, NodeId v) const {
    const auto& nb = node(u).neighbors;
    return std::binary_search(nb.begin(), nb.end(), Neighbor{v, {}},
                              [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });
  }

  void connect(NodeId u, NodeId v) {
    if (u == v || adjacent(u, v)) return;
    EGNode& a = node(u);
    EGNode& b = node(v);
    insert_sorted(a.neighbors, {v, edge_embedding(a.position, b.position)});
    insert_sorted(b.neighbors, {u, edge_embedding(b.position, a.position)});
  }

  void set_embedding(NodeId id, ObservationPtr obs, NodeStatus status, int synthesis_depth) {
    EGNode& n = node(id);
    n.embedding_key = observation_key(*obs);
    n.embedding = std::move(obs);
    n.status = status;
    n.synthesis_depth = synthesis_depth;
  }

  void set_expanded(NodeId id, bool expanded = true) { node(id).expanded = expanded; }

  /// Moves a node and refreshes the embeddings of its incident edges.
  void relocate(NodeId id, Vec2 position) {
    EGNode& n = node(id);
    n.position = position;
    for (Neighbor& nb : n.neighbors) {
      EGNode& other = node(nb.id);
      nb.edge = edge_embedding(position, other.position);
      for (Neighbor& back : other.neighbors)
        if (back.id == id) back.edge = edge_embedding(other.position, position);
    }
  }

  void remove_node(NodeId id) {
    if (id == start_id_) throw ContractError("cannot remove the start node");
    const EGNode& n = node(id);
    for (const Neighbor& nb : n.neighbors) {
      auto& back = node(nb.id).neighbors;
      back.erase(std::remove_if(back.begin(), back.end(), [id](const Neighbor& x) { return x.id == id; }), back.end());
    }
    nodes_.erase(nodes_.begin() + static_cast<std::ptrdiff_t>(index_of(id)));
  }

  std::optional<NodeId> nearest_within(Vec2 p, double radius) const {
    std::optional<NodeId> best;
    double best_d = radius;
    for (const EGNode& n : nodes_) {
      const double d = distance(n.position, p);
      if (d < best_d) {
        best_d = d;
        best = n.id;
      }
    }
    return best;
  }

  bool is_connected() const {
    if (nodes_.empty()) return true;
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<NodeId> stack{start_id_};
    seen[index_of(start_id_)] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (const Neighbor& nb : node(u).neighbors) {
        const std::size_t i = index_of(nb.id);
        if (!seen[i]) {
          seen[i] = 1;
          ++count;
          stack.push_back(nb.id);
        }
      }
    }
    return count == nodes_.size();
  }

 private:
  static void insert_sorted(std::vector<Neighbor>& v, Neighbor n) {
    auto it = std::lower_bound(v.begin(), v.end(), n, [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });
    v.insert(it, n);
  }

  std::vector<EGNode> nodes_;  // sorted by id
  NodeId start_id_ = 0;
  NodeId next_id_ = 0;
};

/// A graph holding only the start node, which sits at the origin.
inline EnvGraph init_graph(const Observation& start_obs) {
  EnvGraph g;
  g.add_node({0.0, 0.0}, make_observation(start_obs), NodeStatus::Visited, 0);
  return g;
}

struct AddResult {
  NodeId id = 0;
  bool merged = false;
};

/// Inserts a waypoint reached from `from_id`. Positions within 0.5 m of an
/// existing node merge into it. A new node is linked to `from_id` and to every
/// node it mutually detects (each lies in a navigable bin of the other's scan).
inline AddResult add_waypoint(EnvGraph& g, NodeId from_id, Vec2 position, ObservationPtr obs, NodeStatus status,
                              int synthesis_depth) {
  if (!g.contains(from_id)) throw ContractError("add_waypoint: unknown from_id " + std::to_string(from_id));
  if (auto existing = g.nearest_within(position, kMergeRadius)) {
    g.connect(from_id, *existing);
    return {*existing, true};
  }
  const NodeId id = g.add_node(position, std::move(obs), status, synthesis_depth);
  g.connect(from_id, id);
  const EGNode& fresh = g.node(id);
  std::vector<NodeId> mutual;
  for (const EGNode& w : g.nodes()) {
    if (w.id == id || w.id == from_id) continue;
    if (detects(w.observation(), fresh.position - w.position) && detects(fresh.observation(), w.position - fresh.position))
      mutual.push_back(w.id);
  }
  for (NodeId w : mutual) g.connect(id, w);
  return {id, false};
}

inline AddResult add_waypoint(EnvGraph& g, NodeId from_id, const Waypoint& wp, ObservationPtr obs, NodeStatus status,
                              int synthesis_depth) {
  return add_waypoint(g, from_id, wp.position, std::move(obs), status, synthesis_depth);
}

inline nlohmann::json graph_to_json(const EnvGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json edges = nlohmann::json::array();
  for (const EGNode& n : g.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"x", n.position.x},
                     {"y", n.position.y},
                     {"status", to_string(n.status)},
                     {"depth", n.synthesis_depth},
                     {"expanded", n.expanded},
                     {"scan", n.observation().ranges}});
    for (const Neighbor& nb : n.neighbors)
      edges.push_back({{"u", n.id}, {"v", nb.id}, {"cos", nb.edge.cos_theta}, {"sin", nb.edge.sin_theta},
                       {"dist", nb.edge.distance}});
  }
  return {{"start_id", g.start_id()}, {"nodes", nodes}, {"edges", edges}};
}

}  // namespace wmnav
