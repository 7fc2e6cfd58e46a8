#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "toy_domain.hpp"
#include "wmnav/nav_domain.hpp"
#include "wmnav/tree_export.hpp"

using namespace wmnav;
using wmnav::testing::ToyDomain;
using wmnav::testing::ToyEdge;
using wmnav::testing::ToyState;
using wmnav::testing::ToyWorld;

namespace {

ToyWorld flat_world(std::vector<ToyEdge> root_edges) {
  ToyWorld w;
  w.out.push_back(std::move(root_edges));
  w.depth.push_back(0);
  for (const ToyEdge& e : w.out[0])
    if (!e.stop) {
      w.out.emplace_back();
      w.depth.push_back(1);
    }
  int next = 1;
  for (ToyEdge& e : w.out[0])
    if (!e.stop) e.child = next++;
  return w;
}

PlannerConfig cfg_with(int iterations, int horizon, double c = 1.0, std::uint64_t seed = 0) {
  PlannerConfig cfg;
  cfg.iterations = iterations;
  cfg.horizon = horizon;
  cfg.exploration = c;
  cfg.seed = seed;
  cfg.check_invariants = true;
  return cfg;
}

}  // namespace

TEST(Uct, WorkedExamples) {
  EXPECT_DOUBLE_EQ(uct(0.5, 1, 1, 1.0), 0.5);  // ln 1 = 0
  EXPECT_NEAR(uct(1.0, 8, 2, 2.0), 1.0 + 2.0 * std::sqrt(std::log(8.0) / 2.0), 1e-12);
  EXPECT_NEAR(uct(1.0, 8, 2, 2.0), 3.0394, 1e-4);
  EXPECT_TRUE(std::isinf(uct(-100.0, 5, 0, 1.0)));
}

TEST(LeafValue, DiscountedSum) {
  const std::vector<double> ones{1.0, 1.0, 1.0};
  EXPECT_NEAR(leaf_value(ones, 0.98), 2.9404, 1e-12);
  EXPECT_EQ(leaf_value(std::vector<double>{}, 0.98), 0.0);
  EXPECT_EQ(leaf_value(std::vector<double>{-5.0}, 0.5), -5.0);
}

TEST(Rollout, SoftmaxOverNegatedScores) {
  const std::vector<double> scores{2.0, 4.0};
  const auto p = rollout_probabilities(scores, 1.0);
  EXPECT_NEAR(p[0], 0.8808, 1e-4);
  EXPECT_NEAR(p[1], 0.1192, 1e-4);
  const auto flat = rollout_probabilities(std::vector<double>{3.0, 3.0, 3.0}, 1.0);
  for (double x : flat) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
}

TEST(Rollout, StopsAfterStopAction) {
  const ToyWorld w = flat_world({{5.0, true}});
  ToyDomain d(w);
  Mcts<ToyDomain> m(d, cfg_with(1, 4));
  Rng rng(1);
  EXPECT_EQ(m.rollout(ToyState{}, 4, rng), (std::vector<double>{5.0}));
  EXPECT_TRUE(m.rollout(ToyState{}, 0, rng).empty());
}

TEST(Select, FreshRootPicksFirstEdge) {
  const ToyWorld w = flat_world({{0.1}, {0.2}, {0.3}});
  ToyDomain d(w);
  Mcts<ToyDomain> m(d, cfg_with(1, 2));
  m.reset(ToyState{});
  const SelectionPath p = m.select();
  ASSERT_EQ(p.steps.size(), 1u);
  EXPECT_EQ(p.steps[0], std::make_pair(0, 0));
  EXPECT_TRUE(p.unexpanded);
}

TEST(Select, EqualVisitsPickHigherQ) {
  const ToyWorld w = flat_world({{0.0}, {0.0}});
  ToyDomain d(w);
  Mcts<ToyDomain> m(d, cfg_with(1, 1));
  m.reset(ToyState{});
  Rng rng(0);
  m.iterate(rng);
  m.iterate(rng);
  auto& root = m.mutable_tree().nodes[0];
  root.edges[0].q = 0.0;
  root.edges[1].q = 2.0;
  EXPECT_EQ(m.select().steps.front().second, 1);
}

TEST(Select, SaturatedTreeEndsAtTerminalWithinHorizon) {
  Rng gen(3);
  const ToyWorld w = wmnav::testing::random_world(gen, 3, 3, 0.0);
  ToyDomain d(w);
  Mcts<ToyDomain> m(d, cfg_with(500, 3));
  Rng rng(1);
  m.plan(ToyState{}, rng);
  const SelectionPath p = m.select();
  EXPECT_FALSE(p.unexpanded);
  EXPECT_TRUE(m.tree().nodes[static_cast<std::size_t>(p.leaf)].terminal);
  EXPECT_LE(static_cast<int>(p.steps.size()), 3);
}

TEST(Expand, ChildStartsWithOneVisitAndRecordsReward) {
  const ToyWorld w = flat_world({{0.7}, {-5.0, true}});
  ToyDomain d(w);
  Mcts<ToyDomain> m(d, cfg_with(1, 1));
  m.reset(ToyState{});
  Rng rng(0);
  const int c = m.expand(0, 0, rng);
  EXPECT_EQ(m.tree().nodes[static_cast<std::size_t>(c)].visits, 1);
  EXPECT_TRUE(m.tree().nodes[static_cast<std::size_t>(c)].terminal);  // depth == horizon
  EXPECT_EQ(m.tree().root().edges[0].reward, 0.7);
  EXPECT_THROW(m.expand(0, 0, rng), ContractError);
  const int s = m.expand(0, 1, rng);
  EXPECT_TRUE(m.tree().nodes[static_cast<std::size_t>(s)].terminal);
  EXPECT_FALSE(m.tree().nodes[static_cast<std::size_t>(s)].state.has_value());
}

TEST(Backup, SingleStepExample) {
  const ToyWorld w = flat_world({{1.0}});
  ToyDomain d(w);
  Mcts<ToyDomain> m(d, cfg_with(1, 2));
  m.reset(ToyState{});
  Rng rng(0);
  SelectionPath p = m.select();
  const int c = m.expand(0, 0, rng);
  m.mutable_tree().nodes[static_cast<std::size_t>(c)].value = 3.0;
  m.backup(p);
  const auto& root = m.tree().root();
  EXPECT_NEAR(root.edges[0].q, 1.0 + 0.98 * 3.0, 1e-12);
  EXPECT_EQ(root.edges[0].visits, 1);
  EXPECT_EQ(root.visits, 2);
  EXPECT_NEAR(root.value, 3.94 / 2.0, 1e-12);
}

TEST(Backup, TwoEdgeExample) {
  const ToyWorld w = flat_world({{1.0}, {-5.0, true}});
  ToyDomain d(w);
  Mcts<ToyDomain> m(d, cfg_with(3, 1));
  Rng rng(0);
  m.reset(ToyState{});
  m.iterate(rng);  // edge 0: Q = 1
  m.iterate(rng);  // edge 1: Q = -5
  m.iterate(rng);  // edge 0 again (higher UCT), terminal revisit: N = 2
  const auto& root = m.tree().root();
  EXPECT_EQ(root.edges[0].visits, 2);
  EXPECT_EQ(root.edges[1].visits, 1);
  EXPECT_EQ(root.visits, 4);
  EXPECT_NEAR(root.value, (2.0 * 1.0 + 1.0 * -5.0) / 4.0, 1e-12);
  EXPECT_EQ(m.invariant_violations(), 0u);
}

TEST(Mcts, InvariantsHoldOnRandomLandscapes) {
  Rng gen(11);
  for (int trial = 0; trial < 40; ++trial) {
    const ToyWorld w = wmnav::testing::random_world(gen, 4, 4);
    ToyDomain d(w);
    Mcts<ToyDomain> m(d, cfg_with(200, 4, 1.0));
    Rng rng(static_cast<std::uint64_t>(trial));
    m.plan(ToyState{}, rng);
    EXPECT_EQ(m.invariant_violations(), 0u);
    EXPECT_EQ(count_invariant_violations(m.tree()), 0u);
    EXPECT_LE(d.max_depth_seen, 4);  // tree depth plus rollout depth never exceeds H
  }
}

TEST(Mcts, SingleIterationReturnsTheExpandedAction) {
  const ToyWorld w = flat_world({{-1.0}, {3.0}});
  ToyDomain d(w);
  Mcts<ToyDomain> m(d, cfg_with(1, 2));
  Rng rng(0);
  EXPECT_EQ(m.plan(ToyState{}, rng), 0);
  EXPECT_EQ(m.iterations_run(), 1u);
}

TEST(Mcts, DominantActionIsAlwaysChosen) {
  const ToyWorld w = flat_world({{-1.0}, {-0.5}, {5.0, true}, {0.2}});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ToyDomain d(w);
    Mcts<ToyDomain> m(d, cfg_with(50, 3, 1.0, seed));
    Rng rng(seed);
    EXPECT_EQ(m.plan(ToyState{}, rng), 2);
  }
}

TEST(Mcts, MatchesExhaustiveSearchOnSmallTrees) {
  Rng gen(17);
  int agree = 0;
  const int trials = 30;
  for (int trial = 0; trial < trials; ++trial) {
    const ToyWorld w = wmnav::testing::random_world(gen, 3, 2);
    ToyDomain d(w);
    Mcts<ToyDomain> m(d, cfg_with(2000, 2, 2.0));
    Rng rng(static_cast<std::uint64_t>(trial));
    const int a = m.plan(ToyState{}, rng);
    const std::vector<double> q = wmnav::testing::max_backup_q(w, 2, 0.98);
    agree += q[static_cast<std::size_t>(a)] == *std::max_element(q.begin(), q.end());
  }
  EXPECT_GE(agree, trials * 9 / 10);
}

TEST(Mcts, DeterministicForFixedSeed) {
  Rng gen(5);
  const ToyWorld w = wmnav::testing::random_world(gen, 4, 4);
  auto run = [&] {
    ToyDomain d(w);
    Mcts<ToyDomain> m(d, cfg_with(100, 4));
    Rng rng(9);
    m.plan(ToyState{}, rng);
    return tree_to_json(snapshot(m, d)).dump();
  };
  EXPECT_EQ(run(), run());
}

TEST(Mcts, PositiveScalingKeepsTheChoice) {
  Rng gen(23);
  for (int trial = 0; trial < 20; ++trial) {
    const ToyWorld w = wmnav::testing::random_world(gen, 4, 3);
    ToyDomain plain(w), scaled(w, 2.5, 0.0, 2.5);
    Mcts<ToyDomain> a(plain, cfg_with(100, 3, 1.0)), b(scaled, cfg_with(100, 3, 2.5));
    Rng ra(static_cast<std::uint64_t>(trial)), rb(static_cast<std::uint64_t>(trial));
    EXPECT_EQ(a.plan(ToyState{}, ra), b.plan(ToyState{}, rb));
  }
}

TEST(Mcts, UniformMoveShiftKeepsTheChoiceAtDepthOne) {
  const ToyWorld w = flat_world({{0.3}, {-0.2}, {0.9}, {0.1}});
  for (double shift : {0.5, 2.0, 10.0}) {
    ToyDomain plain(w), shifted(w, 1.0, shift);
    Mcts<ToyDomain> a(plain, cfg_with(40, 1)), b(shifted, cfg_with(40, 1));
    Rng ra(1), rb(1);
    EXPECT_EQ(a.plan(ToyState{}, ra), b.plan(ToyState{}, rb));
  }
}

TEST(Mcts, EmptyRootIsDeadEndAndZeroHorizonIsRejected) {
  ToyWorld w;
  w.out.emplace_back();
  w.depth.push_back(0);
  ToyDomain d(w);
  Mcts<ToyDomain> m(d, cfg_with(10, 2));
  Rng rng(0);
  EXPECT_THROW(m.plan(ToyState{}, rng), DeadEndError);

  const ToyWorld one = flat_world({{1.0}});
  ToyDomain d1(one);
  Mcts<ToyDomain> m0(d1, cfg_with(10, 0));
  EXPECT_THROW(m0.plan(ToyState{}, rng), ContractError);
  PlannerConfig bad = cfg_with(0, 2);
  EXPECT_THROW(Mcts<ToyDomain>(d1, bad), ContractError);
}

// Navigation domain on an open 20 x 20 m plan with the goal due east.
namespace {

struct NavFixture {
  FloorPlan plan = wmnav::testing::open_plan(20, 20);
  Vec2 start;
  Vec2 goal;
  DistanceField field;
  DistanceModel model;
  NavDomain domain;
  EnvGraph eg;

  NavFixture(Vec2 s, Vec2 g)
      : start(s),
        goal(g),
        field(plan, g),
        model(DistanceEstimator::oracle(), GoalDescriptor{g - s}, OracleContext{&field, s}),
        domain(model, SceneSynthesizer::perfect(), PlanOracle{&plan, s}),
        eg(init_graph(scan_at(plan, s))) {}
};

}  // namespace

TEST(NavDomain, ActionSpaceHasOneStopPerVisitedNode) {
  NavFixture f({8.05, 10.05}, {15.05, 10.05});
  grow_waypoints(f.eg, f.eg.start_id(), NodeStatus::Frontier, SceneSynthesizer::perfect(), PlanOracle{&f.plan, f.start});
  ASSERT_EQ(f.eg.size(), 6u);
  const WorldState s = root_state(f.eg);
  const auto acts = f.domain.actions(s);
  ASSERT_EQ(acts.size(), 6u);
  EXPECT_EQ(std::count_if(acts.begin(), acts.end(), [](const NavAction& a) { return a.stop; }), 1);
  EXPECT_EQ(f.domain.actions(root_state(f.eg)), acts);
}

TEST(NavDomain, StopRewardThreshold) {
  Rng rng(0);
  for (auto [dx, reward] : {std::pair{2.5, 5.0}, std::pair{3.0, 5.0}, std::pair{3.1, -5.0}}) {
    NavFixture f({10.05 - dx, 10.05}, {10.05, 10.05});
    WorldState s = root_state(f.eg);
    EXPECT_NEAR(f.domain.state_distance(s, rng), dx, 1e-12);
    const Transition<WorldState> t = f.domain.step(s, NavAction{f.eg.start_id(), true}, rng);
    EXPECT_FALSE(t.next);
    EXPECT_EQ(t.reward, reward) << dx;
  }
}

TEST(NavDomain, MoveRewardIsDistanceReduction) {
  NavFixture f({4.05, 10.05}, {14.05, 10.05});
  grow_waypoints(f.eg, f.eg.start_id(), NodeStatus::Frontier, SceneSynthesizer::perfect(), PlanOracle{&f.plan, f.start});
  Rng rng(0);
  WorldState s = root_state(f.eg);
  const double d0 = f.domain.state_distance(s, rng);
  EXPECT_NEAR(d0, 10.0, 1e-9);
  for (const EGNode& n : f.eg.nodes()) {
    if (s.is_visited(n.id)) continue;
    const double dn = *wmnav::testing::reference_geodesic(f.plan, f.start + n.position, f.goal);
    const Transition<WorldState> t = f.domain.step(s, NavAction{n.id, false}, rng);
    ASSERT_TRUE(t.next);
    EXPECT_NEAR(t.reward, d0 - std::min(d0, dn), 1e-6);
    EXPECT_TRUE(t.next->is_visited(n.id));
    EXPECT_EQ(t.next->depth, 1);
    EXPECT_GT(t.next->eg.size(), s.eg.size());  // imagined neighbours were added
  }
}

TEST(NavDomain, PlannerPrefersMovingTowardsTheGoal) {
  NavFixture f({4.05, 10.05}, {14.05, 10.05});
  grow_waypoints(f.eg, f.eg.start_id(), NodeStatus::Frontier, SceneSynthesizer::perfect(), PlanOracle{&f.plan, f.start});
  PlannerConfig cfg = cfg_with(200, 3);
  Mcts<NavDomain> m(f.domain, cfg);
  Rng rng(0);
  const NavAction a = m.plan(root_state(f.eg), rng);
  EXPECT_FALSE(a.stop);
  EXPECT_GT(f.eg.node(a.node).position.x, 2.0);
  EXPECT_EQ(m.invariant_violations(), 0u);
}

TEST(TreeExport, DotCarriesNumericAttributes) {
  Rng gen(2);
  const ToyWorld w = wmnav::testing::random_world(gen, 3, 3);
  ToyDomain d(w);
  Mcts<ToyDomain> m(d, cfg_with(60, 3));
  Rng rng(4);
  m.plan(ToyState{}, rng);
  const TreeSnapshot t = snapshot(m, d);
  const DotGraph g = parse_dot(to_dot(t));
  ASSERT_EQ(g.nodes.size(), t.nodes.size());
  ASSERT_EQ(g.edges.size(), t.edges.size());
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    EXPECT_EQ(g.nodes[i].attrs.at("V"), t.nodes[i].value);
    EXPECT_EQ(g.nodes[i].attrs.at("N"), static_cast<double>(t.nodes[i].visits));
    const double c = g.nodes[i].attrs.at("color_value");
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
  }
  for (std::size_t i = 0; i < t.edges.size(); ++i) {
    EXPECT_EQ(g.edges[i].from, t.edges[i].parent);
    EXPECT_EQ(g.edges[i].to, t.edges[i].child);
    EXPECT_EQ(g.edges[i].attrs.at("Q"), t.edges[i].q);
    EXPECT_EQ(g.edges[i].attrs.at("R"), t.edges[i].reward);
  }
  const TreeSnapshot back = tree_from_json(tree_to_json(t));
  EXPECT_EQ(tree_to_json(back).dump(), tree_to_json(t).dump());
}
