#pragma once

// Episode control loop: grow the real graph around visited waypoints, plan in
// imagination, walk to the chosen waypoint with low-level actions, correct the
// graph with what was actually observed, repeat until stopping.

#include <chrono>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "wmnav/nav_domain.hpp"
#include "wmnav/tree_export.hpp"

namespace wmnav {

inline constexpr double kArrivalTolerance = kForwardStep;  // controller stop radius
inline constexpr double kAimToleranceDeg = 7.5;

struct NavigateResult {
  std::vector<LowLevelAction> actions;
  std::vector<Pose> poses;  // pose after each action
  Pose final_pose;
  bool reached = false;
};

/// Greedy point controller: turn in 15° steps until the bearing is within
/// 7.5°, step forward, re-aim, and stop once strictly closer than 0.25 m.
/// A fully blocked step triggers a one-turn detour that slides along the
/// obstacle. Gives up when the detour is blocked too, when it stops making
/// progress, or when `budget` actions are spent.
inline NavigateResult navigate_to(const FloorPlan& plan, Pose pose, Vec2 target, int budget) {
  NavigateResult r;
  double best = distance(pose.position, target);
  int idle = 0;
  int detours = 0;
  bool detour = false;
  constexpr int kMaxIdle = 16;
  constexpr int kMaxDetours = 4;
  while (static_cast<int>(r.actions.size()) < budget) {
    const Vec2 d = target - pose.position;
    const double dist = d.norm();
    if (dist < kArrivalTolerance - 1e-9) {
      r.reached = true;
      break;
    }
    const double diff = angle_diff_deg(pose.heading, bearing_deg(d));
    LowLevelAction a = LowLevelAction::Forward025;
    if (diff > kAimToleranceDeg) a = LowLevelAction::TurnLeft15;
    else if (diff < -kAimToleranceDeg) a = LowLevelAction::TurnRight15;
    const bool forced = detour;
    if (forced) a = LowLevelAction::Forward025;
    detour = false;
    const Pose next = step(plan, pose, a);
    r.actions.push_back(a);
    r.poses.push_back(next);
    if (a == LowLevelAction::Forward025 && next.position == pose.position) {
      // Fully blocked: turn one step toward the target's side and force a
      // forward step, which slides along the obstacle; give up if that fails too.
      pose = next;
      if (forced || ++detours > kMaxDetours || static_cast<int>(r.actions.size()) >= budget) break;
      const LowLevelAction turn = diff >= 0.0 ? LowLevelAction::TurnLeft15 : LowLevelAction::TurnRight15;
      pose = step(plan, next, turn);
      r.actions.push_back(turn);
      r.poses.push_back(pose);
      detour = true;
      continue;
    }
    pose = next;
    const double now = distance(pose.position, target);
    if (now < best - 1e-9) {
      best = now;
      idle = 0;
    } else if (++idle >= kMaxIdle) {
      break;
    }
  }
  if (!r.reached) r.reached = distance(pose.position, target) < kArrivalTolerance - 1e-9;
  r.final_pose = pose;
  return r;
}

struct EpisodeConfig {
  int max_low_level_steps = 500;
  double success_radius = 3.0;
  int max_rounds = 50;
  PlannerConfig planner;
  SceneSynthesizer synthesizer = SceneSynthesizer::perfect();
  DistanceEstimator estimator = DistanceEstimator::oracle();
  std::uint64_t seed = 0;
  bool record_trees = false;
  bool record_timing = true;

  /// Horizon 0 means no search: pick the best frontier by estimate alone.
  bool greedy() const { return planner.horizon == 0; }
};

struct Decision {
  int round = 0;
  NavAction action;
  std::size_t graph_nodes = 0;
  double plan_seconds = 0.0;
  std::optional<TreeSnapshot> tree;
};

struct Trajectory {
  std::vector<Pose> poses;  // poses[0] is the start
  std::vector<LowLevelAction> actions;
  std::vector<Decision> decisions;
};

enum class Outcome { Stopped, DeadEnd, StepBudget, RoundBudget };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Stopped: return "stopped";
    case Outcome::DeadEnd: return "dead_end";
    case Outcome::StepBudget: return "step_budget";
    case Outcome::RoundBudget: return "round_budget";
  }
  return "?";
}

struct EpisodeResult {
  std::string episode_id;
  Outcome outcome = Outcome::DeadEnd;
  Trajectory trajectory;
  EnvGraph graph;  // final real graph
  std::size_t invariant_violations = 0;
  std::size_t planner_iterations = 0;

  bool stopped() const { return outcome == Outcome::Stopped; }
  const Pose& final_pose() const { return trajectory.poses.back(); }
  int plan_steps() const { return static_cast<int>(trajectory.decisions.size()); }
  double mean_plan_seconds() const {
    if (trajectory.decisions.empty()) return 0.0;
    double s = 0.0;
    for (const Decision& d : trajectory.decisions) s += d.plan_seconds;
    return s / static_cast<double>(trajectory.decisions.size());
  }
};

namespace detail {

/// Node ids from `from` to `to` (inclusive) through Visited nodes only; the
/// final node may have any status.
inline std::vector<NodeId> route(const EnvGraph& g, NodeId from, NodeId to) {
  if (from == to) return {from};
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  std::vector<double> dist(g.size(), std::numeric_limits<double>::infinity());
  std::vector<NodeId> prev(g.size(), -1);
  dist[g.index_of(from)] = 0.0;
  open.push({0.0, from});
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (d > dist[g.index_of(u)]) continue;
    if (u == to) break;
    if (u != from && g.node(u).status != NodeStatus::Visited) continue;
    for (const Neighbor& nb : g.node(u).neighbors) {
      const std::size_t vi = g.index_of(nb.id);
      const double nd = d + nb.edge.distance;
      if (nd < dist[vi]) {
        dist[vi] = nd;
        prev[vi] = u;
        open.push({nd, nb.id});
      }
    }
  }
  if (!std::isfinite(dist[g.index_of(to)])) return {};
  std::vector<NodeId> path{to};
  while (path.back() != from) path.push_back(prev[g.index_of(path.back())]);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace detail

/// Runs one episode. Never throws for navigation failures; they are recorded
/// in the outcome.
inline EpisodeResult run_episode(const FloorPlan& plan, const EpisodeSpec& spec, const EpisodeConfig& cfg,
                                 const DistanceField* goal_field = nullptr) {
  if (cfg.max_low_level_steps < 1 || cfg.max_rounds < 1) throw ContractError("episode budgets must be positive");
  if (cfg.estimator.needs_params() && !cfg.estimator.params) throw ContractError("estimator needs a checkpoint");
  if (!cfg.greedy()) cfg.planner.validate();
  std::unique_ptr<DistanceField> owned;
  if (!goal_field) {
    owned = std::make_unique<DistanceField>(plan, spec.goal);
    goal_field = owned.get();
  }

  const Vec2 origin = spec.start.position;
  const PlanOracle world{&plan, origin};
  DistanceModel model(cfg.estimator, GoalDescriptor{spec.goal - origin}, OracleContext{goal_field, origin});
  SynthesisCache cache;
  NavDomain domain(model, cfg.synthesizer, world, &cache, cfg.success_radius);
  Rng rng(mix64(cfg.seed ^ hash_combine(spec.plan_seed, hash_string(spec.episode_id))));

  EpisodeResult res;
  res.episode_id = spec.episode_id;
  Trajectory& traj = res.trajectory;
  Pose pose = spec.start;
  traj.poses.push_back(pose);
  EnvGraph eg = init_graph(observe(plan, pose));
  NodeId current = eg.start_id();

  auto steps_left = [&] { return cfg.max_low_level_steps - static_cast<int>(traj.actions.size()); };
  auto record = [&](const NavigateResult& nav) {
    traj.actions.insert(traj.actions.end(), nav.actions.begin(), nav.actions.end());
    traj.poses.insert(traj.poses.end(), nav.poses.begin(), nav.poses.end());
    pose = nav.final_pose;
  };
  // Marks the agent's actual location as a visited node hanging off `anchor`.
  auto settle = [&](NodeId anchor) {
    const Vec2 rel = pose.position - origin;
    ObservationPtr obs = make_observation(observe(plan, pose));
    const AddResult r = add_waypoint(eg, anchor, rel, obs, NodeStatus::Visited, 0);
    if (r.merged) {
      eg.relocate(r.id, rel);
      eg.set_embedding(r.id, obs, NodeStatus::Visited, 0);
      eg.set_expanded(r.id, false);
    }
    current = r.id;
  };

  Outcome outcome = Outcome::RoundBudget;
  for (int round = 0; round < cfg.max_rounds; ++round) {
    if (steps_left() <= 1) {
      outcome = Outcome::StepBudget;
      break;
    }
    std::vector<NodeId> to_grow;
    for (const EGNode& n : eg.nodes())
      if (n.status == NodeStatus::Visited && !n.expanded) to_grow.push_back(n.id);
    for (NodeId id : to_grow) grow_waypoints(eg, id, NodeStatus::Frontier, cfg.synthesizer, world, &cache);

    model.begin_round();
    WorldState root = root_state(eg);
    Decision dec;
    dec.round = round;
    dec.graph_nodes = eg.size();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (cfg.greedy()) {
        dec.action = domain.greedy_action(root, rng);
      } else {
        PlannerConfig pc = cfg.planner;
        Mcts<NavDomain> search(domain, pc);
        dec.action = search.plan(std::move(root), rng);
        res.invariant_violations += search.invariant_violations();
        res.planner_iterations += search.iterations_run();
        if (cfg.record_trees) dec.tree = snapshot(search, domain);
      }
    } catch (const DeadEndError&) {
      outcome = Outcome::DeadEnd;
      break;
    }
    if (cfg.record_timing) dec.plan_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    traj.decisions.push_back(std::move(dec));
    const NavAction a = traj.decisions.back().action;

    const std::vector<NodeId> path = detail::route(eg, current, a.node);
    if (path.empty()) {
      // Unroutable target: forget it and plan again.
      if (eg.node(a.node).status != NodeStatus::Visited) eg.remove_node(a.node);
      continue;
    }
    bool ok = true;
    for (std::size_t i = 1; i < path.size() && ok; ++i) {
      const NodeId hop = path[i];
      const NavigateResult nav = navigate_to(plan, pose, eg.node(hop).position + origin, steps_left() - 1);
      record(nav);
      const bool last = i + 1 == path.size();
      if (nav.reached || distance(pose.position, eg.node(hop).position + origin) <= kMergeRadius) {
        if (eg.node(hop).status != NodeStatus::Visited) {
          eg.relocate(hop, pose.position - origin);
          eg.set_embedding(hop, make_observation(observe(plan, pose)), NodeStatus::Visited, 0);
          eg.set_expanded(hop, false);
        }
        current = hop;
      } else {
        ok = false;
        const NodeId anchor = current;
        if (last && eg.node(hop).status != NodeStatus::Visited) eg.remove_node(hop);
        settle(anchor);
      }
    }
    if (a.stop && ok) {
      traj.actions.push_back(LowLevelAction::Stop);
      traj.poses.push_back(pose);
      outcome = Outcome::Stopped;
      break;
    }
    if (steps_left() <= 1) {
      outcome = Outcome::StepBudget;
      break;
    }
  }
  res.outcome = outcome;
  res.graph = std::move(eg);
  return res;
}

// ---------------------------------------------------------------------------
// Serialization

inline const char* to_string(LowLevelAction a) {
  switch (a) {
    case LowLevelAction::TurnLeft15: return "turn_left";
    case LowLevelAction::TurnRight15: return "turn_right";
    case LowLevelAction::Forward025: return "forward";
    case LowLevelAction::Stop: return "stop";
  }
  return "?";
}

inline nlohmann::json result_to_json(const EpisodeResult& r) {
  nlohmann::json poses = nlohmann::json::array(), actions = nlohmann::json::array(),
                 decisions = nlohmann::json::array();
  for (const Pose& p : r.trajectory.poses) poses.push_back({p.position.x, p.position.y, p.heading});
  for (LowLevelAction a : r.trajectory.actions) actions.push_back(to_string(a));
  for (std::size_t i = 0; i < r.trajectory.decisions.size(); ++i) {
    const Decision& d = r.trajectory.decisions[i];
    nlohmann::json dj = {{"index", i},
                         {"round", d.round},
                         {"node", d.action.node},
                         {"stop", d.action.stop},
                         {"graph_nodes", d.graph_nodes},
                         {"plan_seconds", d.plan_seconds}};
    if (d.tree) dj["tree"] = tree_to_json(*d.tree);
    decisions.push_back(std::move(dj));
  }
  return {{"episode_id", r.episode_id},
          {"outcome", to_string(r.outcome)},
          {"poses", poses},
          {"actions", actions},
          {"decisions", decisions},
          {"invariant_violations", r.invariant_violations},
          {"graph", graph_to_json(r.graph)}};
}

}  // namespace wmnav
