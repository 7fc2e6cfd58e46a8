#pragma once

// Scene synthesizers and imagination: predicting scans at unvisited waypoints
// and growing the graph from them.

#include <unordered_map>
#include <vector>

#include "wmnav/env_graph.hpp"

namespace wmnav {

enum class SynthesizerKind { Perfect, Noisy, CopyMemory };

/// Stand-ins for a learned view synthesizer, graded from exact to degraded.
/// Noisy adds i.i.d. Gaussian ray noise whose std grows linearly with
/// synthesis depth. All variants are pure functions of their inputs.
struct SceneSynthesizer {
  SynthesizerKind kind = SynthesizerKind::Perfect;
  double sigma0 = 0.0;
  std::uint64_t seed = 0;

  static SceneSynthesizer perfect() { return {SynthesizerKind::Perfect, 0.0, 0}; }
  static SceneSynthesizer noisy(double sigma0, std::uint64_t seed = 0) { return {SynthesizerKind::Noisy, sigma0, seed}; }
  static SceneSynthesizer copy_memory() { return {SynthesizerKind::CopyMemory, 0.0, 0}; }
};

inline const char* to_string(SynthesizerKind k) {
  switch (k) {
    case SynthesizerKind::Perfect: return "perfect";
    case SynthesizerKind::Noisy: return "noisy";
    case SynthesizerKind::CopyMemory: return "copy_memory";
  }
  return "?";
}

/// Ground-truth access for synthesizers: the plan plus the world position of
/// the episode origin. The planner itself never sees this.
struct PlanOracle {
  const FloorPlan* plan = nullptr;
  Vec2 origin;

  Vec2 to_world(Vec2 rel) const { return origin + rel; }
};

struct SynthesisResult {
  ObservationPtr observation;
  int synthesis_depth = 0;
};

/// Memo for Perfect/Noisy results keyed by (target, depth). Episode-owned;
/// not thread-safe.
class SynthesisCache {
 public:
  ObservationPtr find(std::uint64_t key) const {
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : it->second;
  }
  void insert(std::uint64_t key, ObservationPtr obs) { map_.emplace(key, std::move(obs)); }
  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::uint64_t, ObservationPtr> map_;
};

inline constexpr double kSynthesisRangeSlack = 1e-9;

inline SynthesisResult synthesize(const SceneSynthesizer& s, const PlanOracle& oracle, const EnvGraph& g,
                                  const EGNode& from, Vec2 target, SynthesisCache* cache = nullptr) {
  if (distance(from.position, target) > kMaxWaypointDistance + kSynthesisRangeSlack)
    throw ContractError("synthesize: target is farther than 3.0 m from the source node");
  const int depth = from.synthesis_depth + 1;

  if (s.kind == SynthesizerKind::CopyMemory) {
    const EGNode* best = nullptr;
    for (const EGNode& n : g.nodes())
      if (n.synthesis_depth == 0 && (!best || distance(n.position, target) < distance(best->position, target))) best = &n;
    if (!best) throw ContractError("synthesize: copy-memory needs at least one real observation");
    return {best->embedding, depth};
  }

  std::uint64_t key = hash_combine(hash_double(target.x), hash_double(target.y));
  if (s.kind == SynthesizerKind::Noisy) key = hash_combine(hash_combine(key, static_cast<std::uint64_t>(depth)), s.seed);
  if (cache)
    if (ObservationPtr hit = cache->find(key)) return {hit, depth};

  if (!oracle.plan) throw ContractError("synthesize: plan oracle not set");
  Observation obs = scan_at(*oracle.plan, oracle.to_world(target));
  if (s.kind == SynthesizerKind::Noisy && s.sigma0 > 0.0) {
    Rng rng(key);
    std::normal_distribution<double> noise(0.0, s.sigma0 * depth);
    for (double& r : obs.ranges) r = std::clamp(r + noise(rng), 0.0, kMaxRange);
  }
  ObservationPtr ptr = make_observation(obs);
  if (cache) cache->insert(key, ptr);
  return {ptr, depth};
}

/// Runs the waypoint predictor on `node_id`'s scan and inserts every selected
/// waypoint with a synthesized scan. Returns the ids of nodes that were new
/// (not merged). A node is only grown once.
inline std::vector<NodeId> grow_waypoints(EnvGraph& g, NodeId node_id, NodeStatus status, const SceneSynthesizer& s,
                                          const PlanOracle& oracle, SynthesisCache* cache = nullptr) {
  std::vector<NodeId> added;
  if (g.node(node_id).expanded) return added;
  g.set_expanded(node_id);
  const EGNode from = g.node(node_id);  // copy: g grows below
  const std::vector<Waypoint> wps = select_waypoints(predict_heatmap(from.observation()), from.position);
  for (const Waypoint& wp : wps) {
    SynthesisResult syn = synthesize(s, oracle, g, from, wp.position, cache);
    const AddResult r = add_waypoint(g, node_id, wp, std::move(syn.observation), status, syn.synthesis_depth);
    if (!r.merged) added.push_back(r.id);
  }
  return added;
}

inline std::vector<NodeId> imagined_expand(EnvGraph& g, NodeId node_id, const SceneSynthesizer& s,
                                           const PlanOracle& oracle, SynthesisCache* cache = nullptr) {
  return grow_waypoints(g, node_id, NodeStatus::Imagined, s, oracle, cache);
}

}  // namespace wmnav
