// Acceptance run: twelve end-to-end checks on the synthetic benchmark, one
// PASS/FAIL line each. Exit status is nonzero if any check fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "toy_domain.hpp"
#include "wmnav/benchmark.hpp"

using namespace wmnav;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double sr_points(const SuiteReport& r, const std::string& v) { return 100.0 * r.summary(v).sr; }

VariantSpec variant(std::string name, SceneSynthesizer s, EstimatorSpec e, int iterations = 50, int horizon = 4) {
  VariantSpec v;
  v.name = std::move(name);
  v.synthesizer = s;
  v.estimator = e;
  v.planner.iterations = iterations;
  v.planner.horizon = horizon;
  return v;
}

const EstimatorSpec kOracle{EstimatorKind::Oracle, 0.0, 0.0};
const EstimatorSpec kLearned{EstimatorKind::Learned, 0.0, 0.0};

struct Context {
  BenchmarkConfig base;
  EpisodeSet set;
  std::shared_ptr<const GatParams> params;
  std::vector<SuiteReport> reports;  // every suite run, for the global checks

  const SuiteReport& run(const std::string& suite, std::vector<VariantSpec> variants, bool timing = false) {
    BenchmarkConfig cfg = base;
    cfg.suite = suite;
    cfg.variants = std::move(variants);
    cfg.record_timing = timing;
    const auto t0 = Clock::now();
    reports.push_back(run_suite(cfg, set, params));
    std::printf("  [%s] %zu episodes in %.1f s\n", suite.c_str(), reports.back().rows.size(), seconds_since(t0));
    for (const VariantSummary& s : reports.back().summaries)
      std::printf("    %-24s SR %5.1f  OR %5.1f  SPL %.3f  NE %5.2f  s/step %.4f\n", s.variant.c_str(), 100 * s.sr,
                  100 * s.oracle, s.spl, s.ne, s.s_per_step);
    std::fflush(stdout);
    return reports.back();
  }
};

// 1. Planner against exhaustive max-backup search on toy trees.
Verdict mcts_oracle_equivalence() {
  const auto t0 = Clock::now();
  Rng gen(2024);
  const int spaces = 60;
  int agree = 0;
  double worst_dq = 0.0;
  for (int i = 0; i < spaces; ++i) {
    const int branching = 1 + i % 4, depth = 1 + (i / 4) % 3;
    const testing::ToyWorld w = testing::random_world(gen, branching, depth);
    testing::ToyDomain d(w);
    PlannerConfig cfg;
    cfg.exploration = 0.0;
    cfg.horizon = depth;
    cfg.iterations = 20000;
    Mcts<testing::ToyDomain> m(d, cfg);
    Rng rng(static_cast<std::uint64_t>(i));
    const int a = m.plan(testing::ToyState{}, rng);
    const std::vector<double> q = testing::max_backup_q(w, depth, cfg.gamma);
    const double best = *std::max_element(q.begin(), q.end());
    agree += q[static_cast<std::size_t>(a)] == best;
    worst_dq = std::max(worst_dq, std::abs(m.tree().root().edges[static_cast<std::size_t>(a)].q - best));
  }
  const double secs = seconds_since(t0);
  return {agree == spaces && worst_dq <= 1e-9 && secs < 10.0,
          fmt("root action agrees on %d/%d spaces, max |Q - Q*| = %.3g, %.2f s", agree, spaces, worst_dq, secs)};
}

// 10. Training efficacy (also provides the checkpoint for later checks).
Verdict training_efficacy(Context& ctx) {
  const auto t0 = Clock::now();
  const BenchmarkConfig& cfg = ctx.base;
  const auto train_eps = training_episodes(ctx.set, cfg, cfg.training.episodes);
  const auto held_eps = training_episodes(ctx.set, cfg, 40, 2'000'000);
  Rng rng(mix64(cfg.training.train.seed ^ 0xda7aULL));
  const std::vector<TrainingSample> train_data = build_training_set(train_eps, cfg.training.dataset, rng);
  const std::vector<TrainingSample> held = build_training_set(held_eps, cfg.training.dataset, rng);
  TrainReport rep;
  ctx.params = std::make_shared<const GatParams>(train(train_data, cfg.training.train, &rep));
  const double secs = seconds_since(t0);
  const double model = rmse(*ctx.params, held);
  const double baseline = constant_rmse(held, mean_label(train_data));
  return {model < 0.7 * baseline && secs < 900.0,
          fmt("held-out RMSE %.3f m vs mean-label %.3f m (ratio %.3f, need < 0.7), %zu train / %zu held-out "
              "snapshots, %.1f s",
              model, baseline, model / baseline, train_data.size(), held.size(), secs)};
}

// 3. Exact distances and scans solve every solvable episode.
Verdict perfect_distance(Context& ctx) {
  const auto t0 = Clock::now();
  const SuiteReport& r = ctx.run("perfect_distance", {variant("oracle", SceneSynthesizer::perfect(), kOracle)});
  const double secs = seconds_since(t0);
  int solvable_n = 0, success = 0;
  for (std::size_t i = 0; i < ctx.set.episodes.size(); ++i) {
    const BenchEpisode& e = ctx.set.episodes[i];
    if (!solvable(ctx.set.plans[e.plan_index], e.spec, ctx.base.success_radius)) continue;
    ++solvable_n;
    success += r.rows[i].metrics.sr;
  }
  return {solvable_n > 0 && success == solvable_n && secs < 300.0,
          fmt("SR %d/%d (%.1f%%) on solvable episodes, %.1f s", success, solvable_n, 100.0 * success / solvable_n, secs)};
}

// 4. SR grows with the share of exact distances.
Verdict mixture_trend(Context& ctx) {
  const std::vector<double> ps{0.0, 0.2, 0.5, 0.8, 1.0};
  std::vector<VariantSpec> vs;
  for (double p : ps) vs.push_back(variant(fmt("p=%.1f", p), SceneSynthesizer::perfect(), {EstimatorKind::Mixture, 0.0, p}));
  const SuiteReport& r = ctx.run("mixture", vs);
  std::vector<double> sr;
  for (const VariantSpec& v : vs) sr.push_back(sr_points(r, v.name));
  int inversions = 0;
  bool ok = true;
  for (std::size_t i = 1; i < sr.size(); ++i)
    if (sr[i] < sr[i - 1]) {
      ++inversions;
      if (sr[i - 1] - sr[i] > 2.0 + 1e-9) ok = false;
    }
  ok = ok && inversions <= 1;
  return {ok, fmt("SR %.1f / %.1f / %.1f / %.1f / %.1f, %d inversion(s)", sr[0], sr[1], sr[2], sr[3], sr[4], inversions)};
}

// 5. Better imagination, better navigation.
Verdict imagination_ordering(Context& ctx) {
  const SuiteReport& r = ctx.run("imagination", {variant("perfect", SceneSynthesizer::perfect(), kLearned),
                                                 variant("noisy0.3", SceneSynthesizer::noisy(0.3, 7), kLearned),
                                                 variant("copy", SceneSynthesizer::copy_memory(), kLearned)});
  const double a = sr_points(r, "perfect"), b = sr_points(r, "noisy0.3"), c = sr_points(r, "copy");
  return {a - b >= 3.0 && b - c >= 3.0, fmt("SR perfect %.1f, noisy %.1f, copy %.1f (need gaps >= 3)", a, b, c)};
}

// 6. Search beats one-step greedy selection.
Verdict planning_vs_greedy(Context& ctx) {
  const EstimatorSpec noisy{EstimatorKind::NoisyOracle, 1.0, 0.0};
  const SceneSynthesizer synth = SceneSynthesizer::noisy(0.3, 7);
  const SuiteReport& r = ctx.run("planning", {variant("h4-50", synth, noisy), variant("greedy", synth, noisy, 50, 0)});
  const double a = sr_points(r, "h4-50"), g = sr_points(r, "greedy");
  return {a - g >= 5.0, fmt("SR search %.1f vs greedy %.1f (need gap >= 5)", a, g)};
}

// 7. More iterations cost more time with diminishing returns.
Verdict iteration_trend(Context& ctx) {
  const std::vector<int> its{10, 30, 50, 70};
  std::vector<VariantSpec> vs;
  for (int n : its) vs.push_back(variant("it" + std::to_string(n), SceneSynthesizer::perfect(), kLearned, n));
  const SuiteReport& r = ctx.run("iterations", vs, true);
  std::vector<double> sr, t;
  for (const VariantSpec& v : vs) {
    sr.push_back(sr_points(r, v.name));
    t.push_back(r.summary(v.name).s_per_step);
  }
  const bool time_up = t[0] < t[1] && t[1] < t[2] && t[2] < t[3];
  const bool ok = time_up && sr[2] >= sr[0] - 1.0 && sr[3] - sr[2] <= sr[2] - sr[0];
  return {ok, fmt("SR %.1f / %.1f / %.1f / %.1f, s/step %.4f / %.4f / %.4f / %.4f", sr[0], sr[1], sr[2], sr[3], t[0],
                  t[1], t[2], t[3])};
}

// 8. Synthesis error compounds with depth.
Verdict synthesis_error(Context& ctx) {
  const std::vector<double> e = synthesis_error_curve(ctx.set.plans, SceneSynthesizer::noisy(0.1, 3), 400, 4, 11);
  const bool ok = e[0] < e[1] && e[1] < e[2] && e[2] < e[3];
  return {ok, fmt("RMSE by depth %.4f / %.4f / %.4f / %.4f", e[0], e[1], e[2], e[3])};
}

// 9. Analytic gradients against central differences.
Verdict gradient_check(const Context& ctx) {
  Rng rng(909);
  double worst = 0.0;
  int checked = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const BenchEpisode& be = ctx.set.episodes[static_cast<std::size_t>(inst * 7) % ctx.set.episodes.size()];
    const FloorPlan& plan = ctx.set.plans[be.plan_index];
    const PlanOracle oracle{&plan, be.spec.start.position};
    EnvGraph g = init_graph(observe(plan, be.spec.start));
    const int rounds = 1 + inst % 2;
    for (int round = 0; round < rounds; ++round) {
      std::vector<NodeId> ids;
      for (const EGNode& n : g.nodes()) ids.push_back(n.id);
      for (NodeId id : ids) imagined_expand(g, id, SceneSynthesizer::noisy(0.1, 5), oracle);
    }
    const GatGraph gg = to_gat_graph(g, GoalDescriptor{be.spec.goal - be.spec.start.position});
    std::vector<double> labels(g.size());
    for (double& l : labels) l = std::uniform_real_distribution<double>(0.0, 20.0)(rng);
    GatParams p = inst % 2 && ctx.params ? *ctx.params : GatParams::initialize(static_cast<std::uint64_t>(inst) + 1);
    std::vector<double> grad(p.size(), 0.0);
    gat_loss(p, gg, labels, grad);
    for (int k = 0; k < 40; ++k) {
      const std::size_t i = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
      const double keep = p.values()[i], h = 1e-5 * std::max(1.0, std::abs(keep));
      p.values()[i] = keep + h;
      const double up = gat_loss(p, gg, labels);
      p.values()[i] = keep - h;
      const double down = gat_loss(p, gg, labels);
      p.values()[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      // Relative error with a 1e-6 scale floor so exactly-zero gradients compare absolutely.
      const double rel = std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1e-6});
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  return {worst < 1e-4, fmt("max relative error %.3g over %d coordinates on 20 instances", worst, checked)};
}

// 11. Two CLI runs of the same config give identical CSV bytes.
Verdict determinism() {
  BenchmarkConfig c;
  c.suite = "determinism";
  c.plan_seeds = {101, 202};
  c.episodes_per_plan = 3;
  c.variants = {variant("search", SceneSynthesizer::noisy(0.3, 7), {EstimatorKind::NoisyOracle, 1.0, 0.0}, 30),
                variant("greedy", SceneSynthesizer::perfect(), kOracle, 50, 0)};
  {
    std::ofstream out("determinism.json");
    out << benchmark_to_json(c).dump(2);
  }
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string csv[2];
  for (int i = 0; i < 2; ++i) {
    const std::string path = "determinism_" + std::to_string(i) + ".csv";
    std::remove(path.c_str());
    const std::string cmd = std::string(WMNAV_CLI) + " bench --config determinism.json --csv " + path + " --quiet";
    if (std::system(cmd.c_str()) != 0) return {false, "bench command failed: " + cmd};
    csv[i] = slurp(path);
  }
  const bool ok = !csv[0].empty() && csv[0] == csv[1];
  return {ok, fmt("%zu and %zu bytes, %s", csv[0].size(), csv[1].size(), ok ? "identical" : "different")};
}

// 2. Back-up identities over every planning call of every suite.
Verdict invariants(const Context& ctx) {
  std::size_t violations = 0, iterations = 0;
  for (const SuiteReport& r : ctx.reports)
    for (const SuiteRow& row : r.rows) {
      violations += row.invariant_violations;
      iterations += row.planner_iterations;
    }
  return {violations == 0 && iterations > 0,
          fmt("%zu violations after %zu checked iterations", violations, iterations)};
}

// 12. SR <= OR, SPL <= SR and SPL recomputation on every row.
Verdict metric_identities(const Context& ctx) {
  std::size_t rows = 0, bad = 0;
  for (const SuiteReport& r : ctx.reports)
    for (const SuiteRow& row : r.rows) {
      ++rows;
      const Metrics& m = row.metrics;
      const double spl = spl_value(m.sr, row.geodesic_ref, m.tl);
      if (m.sr > m.oracle || m.spl > m.sr || std::abs(spl - m.spl) > 1e-9) ++bad;
    }
  return {bad == 0 && rows > 0, fmt("%zu rows, %zu violations", rows, bad)};
}

}  // namespace

int main() {
  Context ctx;
  ctx.base.check_invariants = true;
  ctx.base.record_timing = false;
  ctx.set = make_episode_set(ctx.base);
  std::printf("benchmark: %zu plans, %zu episodes\n", ctx.set.plans.size(), ctx.set.episodes.size());

  std::vector<std::pair<int, Verdict>> results;
  std::vector<std::pair<int, std::string>> names{{1, "planner matches exhaustive search"},
                                                 {2, "back-up invariants"},
                                                 {3, "perfect distance solves solvable episodes"},
                                                 {4, "SR rises with exact-distance share"},
                                                 {5, "imagination quality ordering"},
                                                 {6, "search beats greedy selection"},
                                                 {7, "iteration budget trends"},
                                                 {8, "synthesis error grows with depth"},
                                                 {9, "gradient check"},
                                                 {10, "training efficacy"},
                                                 {11, "bench determinism"},
                                                 {12, "metric identities"}};
  auto record = [&](int id, const std::function<Verdict()>& f) {
    Verdict o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("  -> criterion %d: %s (%s)\n", id, o.pass ? "pass" : "fail", o.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(id, o);
  };

  record(1, mcts_oracle_equivalence);
  record(10, [&] { return training_efficacy(ctx); });
  record(9, [&] { return gradient_check(ctx); });
  record(8, [&] { return synthesis_error(ctx); });
  record(3, [&] { return perfect_distance(ctx); });
  record(4, [&] { return mixture_trend(ctx); });
  record(5, [&] { return imagination_ordering(ctx); });
  record(6, [&] { return planning_vs_greedy(ctx); });
  record(7, [&] { return iteration_trend(ctx); });
  record(11, determinism);
  record(2, [&] { return invariants(ctx); });
  record(12, [&] { return metric_identities(ctx); });

  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  int failed = 0;
  std::printf("\n");
  for (const auto& [id, o] : results) {
    const std::string& name = names[static_cast<std::size_t>(id - 1)].second;
    std::printf("%s criterion %2d %-42s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    failed += !o.pass;
  }
  std::printf("\n%d/%zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed ? 1 : 0;
}
