#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "wmnav/world_model.hpp"

using namespace wmnav;
using wmnav::testing::open_plan;

namespace {

Observation uniform_scan(double r) {
  Observation o;
  o.ranges.fill(r);
  return o;
}

// Every directed edge has its reverse, unit direction vectors, opposite
// angles and the true Euclidean length.
void expect_edge_invariants(const EnvGraph& g) {
  for (const EGNode& u : g.nodes())
    for (const Neighbor& nb : u.neighbors) {
      const EGNode& v = g.node(nb.id);
      const auto& e = nb.edge;
      EXPECT_NEAR(e.cos_theta * e.cos_theta + e.sin_theta * e.sin_theta, 1.0, 1e-9);
      EXPECT_NEAR(e.distance, distance(u.position, v.position), 1e-9);
      ASSERT_TRUE(g.adjacent(v.id, u.id));
      const auto it = std::find_if(v.neighbors.begin(), v.neighbors.end(), [&](const Neighbor& x) { return x.id == u.id; });
      EXPECT_NEAR(it->edge.cos_theta, -e.cos_theta, 1e-9);
      EXPECT_NEAR(it->edge.sin_theta, -e.sin_theta, 1e-9);
      EXPECT_NEAR(it->edge.distance, e.distance, 1e-12);
    }
}

struct OpenWorld {
  FloorPlan plan = open_plan(20, 20);
  PlanOracle oracle{&plan, {10.0, 10.0}};
  EnvGraph g = init_graph(scan_at(plan, {10.0, 10.0}));
};

}  // namespace

TEST(EnvGraph, InitHasSingleStartNode) {
  const EnvGraph g = init_graph(uniform_scan(2.0));
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g.edge_count(), 0u);
  const EGNode& s = g.node(g.start_id());
  EXPECT_EQ(s.position, (Vec2{0.0, 0.0}));
  EXPECT_EQ(s.status, NodeStatus::Visited);
  EXPECT_EQ(s.synthesis_depth, 0);
}

TEST(EnvGraph, AddFrontierCreatesSymmetricEdge) {
  EnvGraph g = init_graph(uniform_scan(5.0));
  const AddResult r = add_waypoint(g, g.start_id(), Vec2{1.0, 0.0}, make_observation(uniform_scan(5.0)),
                                   NodeStatus::Frontier, 1);
  EXPECT_FALSE(r.merged);
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g.edge_count(), 2u);
  const EdgeEmbedding e = g.node(g.start_id()).neighbors.at(0).edge;
  EXPECT_EQ(e, (EdgeEmbedding{1.0, 0.0, 1.0}));
  expect_edge_invariants(g);
}

TEST(EnvGraph, NearbyPositionMerges) {
  EnvGraph g = init_graph(uniform_scan(5.0));
  add_waypoint(g, g.start_id(), Vec2{1.0, 0.0}, make_observation(uniform_scan(5.0)), NodeStatus::Frontier, 1);
  const AddResult r =
      add_waypoint(g, g.start_id(), Vec2{1.2, 0.1}, make_observation(uniform_scan(5.0)), NodeStatus::Frontier, 1);
  EXPECT_TRUE(r.merged);
  EXPECT_EQ(g.size(), 2u);
}

TEST(EnvGraph, UnknownSourceThrows) {
  EnvGraph g = init_graph(uniform_scan(5.0));
  EXPECT_THROW(add_waypoint(g, 42, Vec2{1, 0}, make_observation(uniform_scan(5.0)), NodeStatus::Frontier, 1),
               ContractError);
}

TEST(EnvGraph, MutuallyVisibleTriangleInOpenSpace) {
  OpenWorld w;
  const auto scan = [&](Vec2 rel) { return make_observation(scan_at(w.plan, w.oracle.to_world(rel))); };
  const NodeId a = add_waypoint(w.g, w.g.start_id(), Vec2{1.0, 0.0}, scan({1.0, 0.0}), NodeStatus::Frontier, 1).id;
  const NodeId b = add_waypoint(w.g, w.g.start_id(), Vec2{0.0, 1.0}, scan({0.0, 1.0}), NodeStatus::Frontier, 1).id;
  EXPECT_TRUE(w.g.adjacent(a, b));  // linked by mutual detection, not by the source
  EXPECT_EQ(w.g.edge_count(), 6u);
  expect_edge_invariants(w.g);
}

TEST(EnvGraph, RandomMutationsKeepInvariants) {
  const FloorPlan plan = generate_floorplan(21, FloorPlanParams{});
  Rng rng(5);
  for (std::uint64_t e = 0; e < 5; ++e) {
    const EpisodeSpec spec = sample_episode(plan, e);
    const PlanOracle oracle{&plan, spec.start.position};
    EnvGraph g = init_graph(observe(plan, spec.start));
    for (int step = 0; step < 30; ++step) {
      const EGNode& pick = g.nodes()[std::uniform_int_distribution<std::size_t>(0, g.size() - 1)(rng)];
      const int op = std::uniform_int_distribution<int>(0, 3)(rng);
      if (op <= 1) {
        grow_waypoints(g, pick.id, op ? NodeStatus::Imagined : NodeStatus::Frontier, SceneSynthesizer::perfect(), oracle);
      } else if (op == 2 && pick.id != g.start_id()) {
        const Vec2 to = pick.position + Vec2{0.05, -0.05};
        g.relocate(pick.id, to);
      } else if (pick.id != g.start_id() && g.size() > 2) {
        g.remove_node(pick.id);
      }
      expect_edge_invariants(g);
    }
  }
}

TEST(Synthesize, PerfectEqualsGroundTruth) {
  OpenWorld w;
  const SynthesisResult r =
      synthesize(SceneSynthesizer::perfect(), w.oracle, w.g, w.g.node(w.g.start_id()), Vec2{2.0, 1.0});
  EXPECT_EQ(*r.observation, scan_at(w.plan, {12.0, 11.0}));
  EXPECT_EQ(r.synthesis_depth, 1);
}

TEST(Synthesize, CopyMemoryReturnsStoredScan) {
  OpenWorld w;
  const EGNode& start = w.g.node(w.g.start_id());
  const SynthesisResult r = synthesize(SceneSynthesizer::copy_memory(), w.oracle, w.g, start, Vec2{2.0, 1.0});
  EXPECT_EQ(r.observation, start.embedding);
}

TEST(Synthesize, RangeViolationThrows) {
  OpenWorld w;
  EXPECT_THROW(synthesize(SceneSynthesizer::perfect(), w.oracle, w.g, w.g.node(w.g.start_id()), Vec2{3.5, 0.0}),
               ContractError);
}

TEST(Synthesize, NoisyErrorMatchesNoiseLaw) {
  // 4 x 4 m room: every ray is between 1.4 and 3.7 m, far from the clamps.
  FloorPlan plan(60, 60);
  plan.carve_rect(1.0, 1.0, 5.0, 5.0);
  const PlanOracle oracle{&plan, {3.0, 3.0}};
  EnvGraph g = init_graph(scan_at(plan, {3.0, 3.0}));
  EGNode from = g.node(g.start_id());
  from.synthesis_depth = 2;  // result depth 3
  const SceneSynthesizer s = SceneSynthesizer::noisy(0.1, 99);
  double sq = 0.0;
  int n = 0;
  for (int i = 0; n < 10000; ++i) {
    const Vec2 target{-0.6 + 0.012 * (i % 100), -0.6 + 0.012 * (i / 100)};
    const SynthesisResult r = synthesize(s, oracle, g, from, target);
    EXPECT_EQ(r.synthesis_depth, 3);
    const Observation truth = scan_at(plan, oracle.to_world(target));
    for (int k = 0; k < kRayCount && n < 10000; ++k, ++n) {
      const double e = r.observation->ranges[k] - truth.ranges[k];
      sq += e * e;
    }
  }
  EXPECT_NEAR(std::sqrt(sq / n), 0.3, 0.03);
}

TEST(Synthesize, NoisyIsDeterministicPerSeed) {
  OpenWorld w;
  const EGNode& start = w.g.node(w.g.start_id());
  const auto a = synthesize(SceneSynthesizer::noisy(0.2, 1), w.oracle, w.g, start, Vec2{1.0, 1.0});
  const auto b = synthesize(SceneSynthesizer::noisy(0.2, 1), w.oracle, w.g, start, Vec2{1.0, 1.0});
  const auto c = synthesize(SceneSynthesizer::noisy(0.2, 2), w.oracle, w.g, start, Vec2{1.0, 1.0});
  EXPECT_EQ(*a.observation, *b.observation);
  EXPECT_NE(*a.observation, *c.observation);
}

TEST(ImaginedExpand, OpenScanGivesFiveImaginedNodes) {
  OpenWorld w;
  const auto added = imagined_expand(w.g, w.g.start_id(), SceneSynthesizer::perfect(), w.oracle);
  EXPECT_EQ(added.size(), 5u);
  for (NodeId id : added) {
    EXPECT_EQ(w.g.node(id).status, NodeStatus::Imagined);
    EXPECT_EQ(w.g.node(id).synthesis_depth, 1);
    EXPECT_EQ(w.g.node(id).observation(), scan_at(w.plan, w.oracle.to_world(w.g.node(id).position)));
  }
}

TEST(ImaginedExpand, ZeroScanGivesNothing) {
  const FloorPlan plan = open_plan(20, 20);
  EnvGraph g = init_graph(uniform_scan(0.0));
  EXPECT_TRUE(imagined_expand(g, g.start_id(), SceneSynthesizer::perfect(), PlanOracle{&plan, {10, 10}}).empty());
}

TEST(ImaginedExpand, SecondCallIsNoOp) {
  OpenWorld w;
  imagined_expand(w.g, w.g.start_id(), SceneSynthesizer::perfect(), w.oracle);
  const std::string before = graph_to_json(w.g).dump();
  EXPECT_TRUE(imagined_expand(w.g, w.g.start_id(), SceneSynthesizer::perfect(), w.oracle).empty());
  EXPECT_EQ(graph_to_json(w.g).dump(), before);
}

TEST(ImaginedExpand, DepthGrowsByOnePerHopAndCopyMemoryOnlyCopies) {
  const FloorPlan plan = generate_floorplan(8, FloorPlanParams{});
  const EpisodeSpec spec = sample_episode(plan, 2);
  const PlanOracle oracle{&plan, spec.start.position};
  for (const SceneSynthesizer& s :
       {SceneSynthesizer::perfect(), SceneSynthesizer::noisy(0.1, 3), SceneSynthesizer::copy_memory()}) {
    EnvGraph g = init_graph(observe(plan, spec.start));
    std::vector<NodeId> chain{g.start_id()};
    for (int hop = 0; hop < 4; ++hop) {
      const auto added = imagined_expand(g, chain.back(), s, oracle);
      if (added.empty()) break;
      EXPECT_EQ(g.node(added.front()).synthesis_depth, g.node(chain.back()).synthesis_depth + 1);
      chain.push_back(added.front());
    }
    EXPECT_GE(chain.size(), 2u);
    if (s.kind == SynthesizerKind::CopyMemory)
      for (const EGNode& n : g.nodes()) EXPECT_EQ(n.observation(), g.node(g.start_id()).observation());
    EXPECT_TRUE(g.is_connected());
  }
}

TEST(EnvGraph, JsonListsNodesAndDirectedEdges) {
  OpenWorld w;
  imagined_expand(w.g, w.g.start_id(), SceneSynthesizer::perfect(), w.oracle);
  const auto j = graph_to_json(w.g);
  EXPECT_EQ(j["nodes"].size(), w.g.size());
  EXPECT_EQ(j["edges"].size(), w.g.edge_count());
}
