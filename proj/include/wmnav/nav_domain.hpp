#pragma once

// Mental-planning domain: a world state is an environment graph snapshot plus
// the set of waypoints visited so far (really or in the dream). Moving to an
// unvisited waypoint visits it and imagines the waypoints around it; stopping
// at a visited waypoint ends the branch.

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "wmnav/distance.hpp"
#include "wmnav/mcts.hpp"
#include "wmnav/world_model.hpp"

namespace wmnav {

struct WorldState {
  EnvGraph eg;
  std::vector<NodeId> visited;  // sorted
  int depth = 0;
  std::optional<double> distance;  // D(s), filled lazily

  bool is_visited(NodeId id) const { return std::binary_search(visited.begin(), visited.end(), id); }
};

/// Root state for a real graph: every Visited node is in the visited set.
inline WorldState root_state(const EnvGraph& eg) {
  WorldState s;
  s.eg = eg;
  for (const EGNode& n : eg.nodes())
    if (n.status == NodeStatus::Visited) s.visited.push_back(n.id);
  return s;
}

struct NavAction {
  NodeId node = 0;
  bool stop = false;
  bool operator==(const NavAction&) const = default;
};

inline std::string to_string(const NavAction& a) { return (a.stop ? "stop@" : "move@") + std::to_string(a.node); }

inline constexpr double kStopReward = 5.0;

class NavDomain {
 public:
  using State = WorldState;
  using Action = NavAction;

  NavDomain(DistanceModel& model, SceneSynthesizer synth, PlanOracle oracle, SynthesisCache* cache = nullptr,
            double success_radius = 3.0)
      : model_(model), synth_(synth), oracle_(oracle), cache_(cache), success_radius_(success_radius) {}

  /// One action per node in id order: stop at a visited node, move to any other.
  std::vector<NavAction> actions(const WorldState& s) const {
    std::vector<NavAction> out;
    out.reserve(s.eg.size());
    for (const EGNode& n : s.eg.nodes()) out.push_back({n.id, s.is_visited(n.id)});
    return out;
  }

  bool is_stop(const WorldState&, const NavAction& a) const { return a.stop; }

  double node_estimate(const WorldState& s, NodeId id, Rng& rng) { return model_.estimate(s.eg, s.eg.node(id), rng); }

  /// D(s): smallest estimate over the state's visited nodes.
  double state_distance(WorldState& s, Rng& rng) {
    if (!s.distance) {
      double best = std::numeric_limits<double>::infinity();
      for (NodeId id : s.visited) best = std::min(best, node_estimate(s, id, rng));
      s.distance = best;
    }
    return *s.distance;
  }

  double stop_reward(const WorldState& s, NodeId v, Rng& rng) {
    return node_estimate(s, v, rng) <= success_radius_ ? kStopReward : -kStopReward;
  }

  /// T(s, a) with its reward.
  Transition<WorldState> step(WorldState& s, const NavAction& a, Rng& rng) {
    if (a.stop) {
      if (!s.is_visited(a.node)) throw ContractError("stop action at an unvisited node");
      return {std::nullopt, stop_reward(s, a.node, rng)};
    }
    if (s.is_visited(a.node)) throw ContractError("move action to a visited node");
    WorldState next;
    next.eg = s.eg;
    next.visited = s.visited;
    next.visited.insert(std::lower_bound(next.visited.begin(), next.visited.end(), a.node), a.node);
    next.depth = s.depth + 1;
    imagined_expand(next.eg, a.node, synth_, oracle_, cache_);
    const double before = state_distance(s, rng);
    const double after = state_distance(next, rng);
    return {std::move(next), before - after};
  }

  std::vector<double> rollout_scores(WorldState& s, std::span<const NavAction> acts, Rng& rng) {
    std::vector<double> out;
    out.reserve(acts.size());
    for (const NavAction& a : acts) out.push_back(node_estimate(s, a.node, rng));
    return out;
  }

  std::string action_label(const NavAction& a) const { return to_string(a); }

  /// One-step choice without search: the frontier node with the smallest
  /// estimate, unless a visited node is already estimated within the success
  /// radius and at least as close, in which case stop there.
  NavAction greedy_action(WorldState& s, Rng& rng) {
    std::optional<NavAction> move, stop;
    double move_d = std::numeric_limits<double>::infinity(), stop_d = move_d;
    for (const NavAction& a : actions(s)) {
      const double d = node_estimate(s, a.node, rng);
      if (a.stop && d < stop_d) {
        stop_d = d;
        stop = a;
      } else if (!a.stop && d < move_d) {
        move_d = d;
        move = a;
      }
    }
    if (stop && stop_d <= success_radius_ && (!move || stop_d <= move_d)) return *stop;
    if (move) return *move;
    if (stop) return *stop;
    throw DeadEndError("greedy selection: no actions");
  }

 private:
  DistanceModel& model_;
  SceneSynthesizer synth_;
  PlanOracle oracle_;
  SynthesisCache* cache_;
  double success_radius_;
};

}  // namespace wmnav
