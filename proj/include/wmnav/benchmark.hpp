#pragma once

// Benchmark suites: a fixed episode set over procedurally generated plans,
// evaluated under a grid of (synthesizer, estimator, planner) variants with
// paired seeds, plus CSV/JSON reporting and a few standalone studies.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "wmnav/env_io.hpp"
#include "wmnav/metrics.hpp"
#include "wmnav/training.hpp"

namespace wmnav {

class MissingCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::Oracle;
  double sigma = 0.0;
  double p_replace = 0.0;
};

struct VariantSpec {
  std::string name;
  SceneSynthesizer synthesizer = SceneSynthesizer::perfect();
  EstimatorSpec estimator;
  PlannerConfig planner;
};

struct TrainingSpec {
  int episodes = 200;
  DatasetConfig dataset;
  TrainConfig train;
};

struct BenchmarkConfig {
  std::string suite = "standard";
  std::vector<std::uint64_t> plan_seeds{101, 102, 103, 104, 105, 201, 202, 203, 204, 205};
  int seen_plans = 5;  // the first `seen_plans` seeds are used for training
  int episodes_per_plan = 20;
  std::uint64_t episode_seed_base = 0;
  FloorPlanParams floorplan;
  int max_low_level_steps = 500;
  double success_radius = 3.0;
  int max_rounds = 50;
  std::uint64_t seed = 0;
  bool record_timing = false;  // off: s_per_step is written as 0 so reports are reproducible
  bool check_invariants = true;
  std::string checkpoint;
  TrainingSpec training;
  std::vector<VariantSpec> variants;
  std::string csv_path;
  std::string json_path;
  int workers = 1;
};

// ---------------------------------------------------------------------------
// Config JSON

inline SceneSynthesizer synthesizer_from_json(const json& j) {
  const std::string kind = j.value("kind", "perfect");
  if (kind == "perfect") return SceneSynthesizer::perfect();
  if (kind == "noisy") return SceneSynthesizer::noisy(j.value("sigma0", 0.1), j.value("seed", std::uint64_t{0}));
  if (kind == "copy_memory") return SceneSynthesizer::copy_memory();
  throw std::invalid_argument("unknown synthesizer kind: " + kind);
}

inline json synthesizer_to_json(const SceneSynthesizer& s) {
  json j = {{"kind", to_string(s.kind)}};
  if (s.kind == SynthesizerKind::Noisy) {
    j["sigma0"] = s.sigma0;
    j["seed"] = s.seed;
  }
  return j;
}

inline EstimatorSpec estimator_from_json(const json& j) {
  const std::string kind = j.value("kind", "oracle");
  EstimatorSpec e;
  if (kind == "learned") e.kind = EstimatorKind::Learned;
  else if (kind == "oracle") e.kind = EstimatorKind::Oracle;
  else if (kind == "noisy_oracle") e.kind = EstimatorKind::NoisyOracle;
  else if (kind == "mixture") e.kind = EstimatorKind::Mixture;
  else throw std::invalid_argument("unknown estimator kind: " + kind);
  e.sigma = j.value("sigma", 0.0);
  e.p_replace = j.value("p_replace", 0.0);
  return e;
}

inline json estimator_to_json(const EstimatorSpec& e) {
  json j = {{"kind", to_string(e.kind)}};
  if (e.kind == EstimatorKind::NoisyOracle) j["sigma"] = e.sigma;
  if (e.kind == EstimatorKind::Mixture) j["p_replace"] = e.p_replace;
  return j;
}

inline PlannerConfig planner_from_json(const json& j) {
  PlannerConfig p;
  p.iterations = j.value("iterations", p.iterations);
  p.horizon = j.value("horizon", p.horizon);
  p.exploration = j.value("exploration", p.exploration);
  p.gamma = j.value("gamma", p.gamma);
  p.temperature = j.value("temperature", p.temperature);
  return p;
}

inline json planner_to_json(const PlannerConfig& p) {
  return {{"iterations", p.iterations}, {"horizon", p.horizon}, {"exploration", p.exploration},
          {"gamma", p.gamma}, {"temperature", p.temperature}};
}

inline VariantSpec variant_from_json(const json& j) {
  VariantSpec v;
  v.name = j.at("name").get<std::string>();
  if (j.contains("synthesizer")) v.synthesizer = synthesizer_from_json(j["synthesizer"]);
  if (j.contains("estimator")) v.estimator = estimator_from_json(j["estimator"]);
  if (j.contains("planner")) v.planner = planner_from_json(j["planner"]);
  return v;
}

inline json variant_to_json(const VariantSpec& v) {
  return {{"name", v.name},
          {"synthesizer", synthesizer_to_json(v.synthesizer)},
          {"estimator", estimator_to_json(v.estimator)},
          {"planner", planner_to_json(v.planner)}};
}

inline TrainingSpec training_from_json(const json& j) {
  TrainingSpec t;
  t.episodes = j.value("episodes", t.episodes);
  t.dataset.path_spacing = j.value("path_spacing", t.dataset.path_spacing);
  t.dataset.extra_waypoints = j.value("extra_waypoints", t.dataset.extra_waypoints);
  t.dataset.replace_prob = j.value("replace_prob", t.dataset.replace_prob);
  if (j.contains("synthesizer")) t.dataset.synthesizer = synthesizer_from_json(j["synthesizer"]);
  t.train.lr = j.value("lr", t.train.lr);
  t.train.batch = j.value("batch", t.train.batch);
  t.train.epochs_real = j.value("epochs_real", t.train.epochs_real);
  t.train.epochs_mixed = j.value("epochs_mixed", t.train.epochs_mixed);
  t.train.grad_clip = j.value("grad_clip", t.train.grad_clip);
  t.train.weight_decay = j.value("weight_decay", t.train.weight_decay);
  t.train.seed = j.value("seed", t.train.seed);
  return t;
}

inline json training_to_json(const TrainingSpec& t) {
  return {{"episodes", t.episodes},
          {"path_spacing", t.dataset.path_spacing},
          {"extra_waypoints", t.dataset.extra_waypoints},
          {"replace_prob", t.dataset.replace_prob},
          {"synthesizer", synthesizer_to_json(t.dataset.synthesizer)},
          {"lr", t.train.lr},
          {"batch", t.train.batch},
          {"epochs_real", t.train.epochs_real},
          {"epochs_mixed", t.train.epochs_mixed},
          {"grad_clip", t.train.grad_clip},
          {"weight_decay", t.train.weight_decay},
          {"seed", t.train.seed}};
}

/// Reads a config; "grid" (synthesizers × estimators × planners, each a list
/// of named entries) expands into additional variants named "s/e/p".
inline BenchmarkConfig benchmark_from_json(const json& j) {
  BenchmarkConfig c;
  c.suite = j.value("suite", c.suite);
  if (j.contains("plan_seeds")) c.plan_seeds = j["plan_seeds"].get<std::vector<std::uint64_t>>();
  c.seen_plans = j.value("seen_plans", c.seen_plans);
  c.episodes_per_plan = j.value("episodes_per_plan", c.episodes_per_plan);
  c.episode_seed_base = j.value("episode_seed_base", c.episode_seed_base);
  if (j.contains("floorplan")) {
    const json& f = j["floorplan"];
    c.floorplan.width_m = f.value("width_m", c.floorplan.width_m);
    c.floorplan.height_m = f.value("height_m", c.floorplan.height_m);
    c.floorplan.room_count = f.value("room_count", c.floorplan.room_count);
    c.floorplan.corridor_width_m = f.value("corridor_width_m", c.floorplan.corridor_width_m);
  }
  c.max_low_level_steps = j.value("max_low_level_steps", c.max_low_level_steps);
  c.success_radius = j.value("success_radius", c.success_radius);
  c.max_rounds = j.value("max_rounds", c.max_rounds);
  c.seed = j.value("seed", c.seed);
  c.record_timing = j.value("record_timing", c.record_timing);
  c.check_invariants = j.value("check_invariants", c.check_invariants);
  c.checkpoint = j.value("checkpoint", c.checkpoint);
  if (j.contains("training")) c.training = training_from_json(j["training"]);
  if (j.contains("variants"))
    for (const json& v : j["variants"]) c.variants.push_back(variant_from_json(v));
  if (j.contains("grid")) {
    const json& g = j["grid"];
    for (const json& s : g.at("synthesizers"))
      for (const json& e : g.at("estimators"))
        for (const json& p : g.at("planners")) {
          VariantSpec v;
          v.name = s.at("name").get<std::string>() + "/" + e.at("name").get<std::string>() + "/" +
                   p.at("name").get<std::string>();
          v.synthesizer = synthesizer_from_json(s);
          v.estimator = estimator_from_json(e);
          v.planner = planner_from_json(p);
          c.variants.push_back(std::move(v));
        }
  }
  if (j.contains("output")) {
    c.csv_path = j["output"].value("csv", c.csv_path);
    c.json_path = j["output"].value("json", c.json_path);
  }
  c.workers = j.value("workers", c.workers);
  if (c.episodes_per_plan < 1) throw std::invalid_argument("episodes_per_plan must be >= 1");
  if (c.plan_seeds.empty()) throw std::invalid_argument("plan_seeds must be non-empty");
  std::set<std::string> names;
  for (const VariantSpec& v : c.variants)
    if (!names.insert(v.name).second) throw std::invalid_argument("duplicate variant name: " + v.name);
  return c;
}

inline json benchmark_to_json(const BenchmarkConfig& c) {
  json variants = json::array();
  for (const VariantSpec& v : c.variants) variants.push_back(variant_to_json(v));
  return {{"suite", c.suite},
          {"plan_seeds", c.plan_seeds},
          {"seen_plans", c.seen_plans},
          {"episodes_per_plan", c.episodes_per_plan},
          {"episode_seed_base", c.episode_seed_base},
          {"floorplan",
           {{"width_m", c.floorplan.width_m},
            {"height_m", c.floorplan.height_m},
            {"room_count", c.floorplan.room_count},
            {"corridor_width_m", c.floorplan.corridor_width_m}}},
          {"max_low_level_steps", c.max_low_level_steps},
          {"success_radius", c.success_radius},
          {"max_rounds", c.max_rounds},
          {"seed", c.seed},
          {"record_timing", c.record_timing},
          {"check_invariants", c.check_invariants},
          {"checkpoint", c.checkpoint},
          {"training", training_to_json(c.training)},
          {"variants", variants},
          {"output", {{"csv", c.csv_path}, {"json", c.json_path}}},
          {"workers", c.workers}};
}

inline BenchmarkConfig load_benchmark_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  return benchmark_from_json(json::parse(in));
}

// ---------------------------------------------------------------------------
// Episode sets

struct BenchEpisode {
  std::size_t plan_index = 0;
  bool seen = false;
  EpisodeSpec spec;
};

struct EpisodeSet {
  std::vector<FloorPlan> plans;
  std::vector<BenchEpisode> episodes;
};

inline EpisodeSet make_episode_set(const BenchmarkConfig& cfg) {
  EpisodeSet set;
  for (std::uint64_t s : cfg.plan_seeds) set.plans.push_back(generate_floorplan(s, cfg.floorplan));
  for (std::size_t p = 0; p < set.plans.size(); ++p)
    for (int e = 0; e < cfg.episodes_per_plan; ++e)
      set.episodes.push_back({p, static_cast<int>(p) < cfg.seen_plans,
                              sample_episode(set.plans[p], cfg.episode_seed_base + static_cast<std::uint64_t>(e))});
  return set;
}

/// Training episodes on the seen plans, disjoint seeds from the evaluation set.
inline std::vector<TrainingEpisode> training_episodes(const EpisodeSet& set, const BenchmarkConfig& cfg,
                                                      int count, std::uint64_t seed_offset = 1'000'000) {
  std::vector<TrainingEpisode> out;
  const int seen = std::min<int>(cfg.seen_plans, static_cast<int>(set.plans.size()));
  if (seen < 1) throw std::invalid_argument("training needs at least one seen plan");
  for (int i = 0; i < count; ++i) {
    const std::size_t p = static_cast<std::size_t>(i % seen);
    out.push_back({&set.plans[p], sample_episode(set.plans[p], seed_offset + static_cast<std::uint64_t>(i))});
  }
  return out;
}

/// Trains the distance network as configured; returns the parameters.
inline GatParams train_for_benchmark(const EpisodeSet& set, const BenchmarkConfig& cfg, TrainReport* report = nullptr,
                                     const EpochCallback& on_epoch = {}) {
  const std::vector<TrainingEpisode> eps = training_episodes(set, cfg, cfg.training.episodes);
  Rng rng(mix64(cfg.training.train.seed ^ 0xda7aULL));
  const std::vector<TrainingSample> data = build_training_set(eps, cfg.training.dataset, rng);
  return train(data, cfg.training.train, report, on_epoch);
}

// ---------------------------------------------------------------------------
// Solvability

/// True when the waypoint graph explored with exact scans contains a waypoint
/// within `radius` geodesic meters of the goal, i.e. an agent with perfect
/// distance and imagination can in principle succeed.
inline bool solvable(const FloorPlan& plan, const EpisodeSpec& spec, double radius = 3.0,
                     const DistanceField* goal_field = nullptr, std::size_t max_nodes = 4000) {
  std::unique_ptr<DistanceField> owned;
  if (!goal_field) {
    owned = std::make_unique<DistanceField>(plan, spec.goal);
    goal_field = owned.get();
  }
  std::vector<Vec2> nodes{spec.start.position};
  for (std::size_t i = 0; i < nodes.size() && nodes.size() < max_nodes; ++i) {
    if (goal_field->at_or(nodes[i], kUnreachableDistance) <= radius) return true;
    for (const Waypoint& w : select_waypoints(predict_heatmap(scan_at(plan, nodes[i])), nodes[i])) {
      bool near = false;
      for (const Vec2& n : nodes)
        if (distance(n, w.position) < kMergeRadius) {
          near = true;
          break;
        }
      if (!near) nodes.push_back(w.position);
    }
  }
  for (const Vec2& n : nodes)
    if (goal_field->at_or(n, kUnreachableDistance) <= radius) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Suites

struct SuiteRow {
  std::string variant;
  std::string episode_id;
  std::size_t plan_index = 0;
  bool seen = false;
  double geodesic_ref = 0.0;
  Metrics metrics;
  int plan_steps = 0;
  double s_per_step = 0.0;
  std::string outcome;
  std::size_t invariant_violations = 0;
  std::size_t planner_iterations = 0;
};

struct VariantSummary {
  std::string variant;
  std::size_t episodes = 0;
  double ne = 0, tl = 0, sr = 0, oracle = 0, spl = 0, s_per_step = 0, plan_steps = 0;
};

struct SuiteReport {
  std::string suite;
  std::vector<SuiteRow> rows;  // variant-major, episodes in set order
  std::vector<VariantSummary> summaries;
  std::size_t invariant_violations = 0;

  const VariantSummary& summary(const std::string& variant) const {
    for (const VariantSummary& s : summaries)
      if (s.variant == variant) return s;
    throw std::out_of_range("no variant " + variant);
  }
  std::vector<const SuiteRow*> rows_for(const std::string& variant) const {
    std::vector<const SuiteRow*> out;
    for (const SuiteRow& r : rows)
      if (r.variant == variant) out.push_back(&r);
    return out;
  }
};

inline std::vector<VariantSummary> summarize(const std::vector<SuiteRow>& rows) {
  std::vector<VariantSummary> out;
  std::map<std::string, std::size_t> index;
  for (const SuiteRow& r : rows) {
    auto [it, fresh] = index.emplace(r.variant, out.size());
    if (fresh) out.push_back({r.variant});
    VariantSummary& s = out[it->second];
    ++s.episodes;
    s.ne += r.metrics.ne;
    s.tl += r.metrics.tl;
    s.sr += r.metrics.sr;
    s.oracle += r.metrics.oracle;
    s.spl += r.metrics.spl;
    s.s_per_step += r.s_per_step;
    s.plan_steps += r.plan_steps;
  }
  for (VariantSummary& s : out) {
    const double n = static_cast<double>(s.episodes);
    s.ne /= n;
    s.tl /= n;
    s.sr /= n;
    s.oracle /= n;
    s.spl /= n;
    s.s_per_step /= n;
    s.plan_steps /= n;
  }
  return out;
}

inline EpisodeConfig episode_config(const BenchmarkConfig& cfg, const VariantSpec& v,
                                    const std::shared_ptr<const GatParams>& params) {
  EpisodeConfig ec;
  ec.max_low_level_steps = cfg.max_low_level_steps;
  ec.success_radius = cfg.success_radius;
  ec.max_rounds = cfg.max_rounds;
  ec.planner = v.planner;
  ec.planner.seed = cfg.seed;
  ec.planner.check_invariants = cfg.check_invariants;
  ec.synthesizer = v.synthesizer;
  ec.seed = cfg.seed;
  ec.record_timing = cfg.record_timing;
  switch (v.estimator.kind) {
    case EstimatorKind::Oracle: ec.estimator = DistanceEstimator::oracle(); break;
    case EstimatorKind::NoisyOracle: ec.estimator = DistanceEstimator::noisy_oracle(v.estimator.sigma); break;
    case EstimatorKind::Learned:
      if (!params) throw MissingCheckpoint("variant " + v.name + " needs a trained checkpoint");
      ec.estimator = DistanceEstimator::learned(params);
      break;
    case EstimatorKind::Mixture:
      if (!params) throw MissingCheckpoint("variant " + v.name + " needs a trained checkpoint");
      ec.estimator = DistanceEstimator::mixture(v.estimator.p_replace, params);
      break;
  }
  return ec;
}

inline bool needs_checkpoint(const BenchmarkConfig& cfg) {
  for (const VariantSpec& v : cfg.variants)
    if (v.estimator.kind == EstimatorKind::Learned || v.estimator.kind == EstimatorKind::Mixture) return true;
  return false;
}

using ProgressCallback = std::function<void(const SuiteRow&)>;

/// Runs every variant on every episode of `set`. Episodes may be spread over
/// `cfg.workers` threads; rows are stored by index so the report does not
/// depend on scheduling.
inline SuiteReport run_suite(const BenchmarkConfig& cfg, const EpisodeSet& set,
                             std::shared_ptr<const GatParams> params = nullptr,
                             const ProgressCallback& progress = {}) {
  if (needs_checkpoint(cfg) && !params) throw MissingCheckpoint("suite " + cfg.suite + " needs a trained checkpoint");
  std::vector<DistanceField> fields;
  fields.reserve(set.episodes.size());
  for (const BenchEpisode& e : set.episodes) fields.emplace_back(set.plans[e.plan_index], e.spec.goal);

  const std::size_t ne = set.episodes.size();
  std::vector<SuiteRow> rows(cfg.variants.size() * ne);
  std::vector<EpisodeConfig> configs;
  for (const VariantSpec& v : cfg.variants) configs.push_back(episode_config(cfg, v, params));

  auto run_one = [&](std::size_t job) {
    const std::size_t vi = job / ne, ei = job % ne;
    const BenchEpisode& be = set.episodes[ei];
    const FloorPlan& plan = set.plans[be.plan_index];
    const EpisodeResult res = run_episode(plan, be.spec, configs[vi], &fields[ei]);
    SuiteRow& row = rows[job];
    row.variant = cfg.variants[vi].name;
    row.episode_id = be.spec.episode_id;
    row.plan_index = be.plan_index;
    row.seen = be.seen;
    row.geodesic_ref = be.spec.geodesic_ref;
    row.metrics = compute_metrics(res, be.spec, plan, cfg.success_radius, &fields[ei]);
    row.plan_steps = res.plan_steps();
    row.s_per_step = cfg.record_timing ? res.mean_plan_seconds() : 0.0;
    row.outcome = to_string(res.outcome);
    row.invariant_violations = res.invariant_violations;
    row.planner_iterations = res.planner_iterations;
  };

  const std::size_t jobs = rows.size();
  const int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs; ++j) {
      run_one(j);
      if (progress) progress(rows[j]);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs; j = next++) run_one(j);
      });
    for (std::thread& t : pool) t.join();
    if (progress)
      for (const SuiteRow& r : rows) progress(r);
  }

  SuiteReport rep;
  rep.suite = cfg.suite;
  rep.rows = std::move(rows);
  rep.summaries = summarize(rep.rows);
  for (const SuiteRow& r : rep.rows) rep.invariant_violations += r.invariant_violations;
  return rep;
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline std::string report_csv(const SuiteReport& r) {
  std::ostringstream os;
  os << "suite,variant,episode_id,NE,TL,SR,OR,SPL,plan_steps,s_per_step\n";
  for (const SuiteRow& row : r.rows)
    os << r.suite << ',' << row.variant << ',' << row.episode_id << ',' << detail::num(row.metrics.ne) << ','
       << detail::num(row.metrics.tl) << ',' << row.metrics.sr << ',' << row.metrics.oracle << ','
       << detail::num(row.metrics.spl) << ',' << row.plan_steps << ',' << detail::num(row.s_per_step) << '\n';
  return os.str();
}

inline json report_json(const SuiteReport& r) {
  json rows = json::array(), summaries = json::array();
  for (const SuiteRow& row : r.rows)
    rows.push_back({{"variant", row.variant},
                    {"episode_id", row.episode_id},
                    {"seen", row.seen},
                    {"geodesic_ref", row.geodesic_ref},
                    {"NE", row.metrics.ne},
                    {"TL", row.metrics.tl},
                    {"SR", row.metrics.sr},
                    {"OR", row.metrics.oracle},
                    {"SPL", row.metrics.spl},
                    {"plan_steps", row.plan_steps},
                    {"s_per_step", row.s_per_step},
                    {"outcome", row.outcome},
                    {"invariant_violations", row.invariant_violations}});
  for (const VariantSummary& s : r.summaries)
    summaries.push_back({{"variant", s.variant},
                         {"episodes", s.episodes},
                         {"NE", s.ne},
                         {"TL", s.tl},
                         {"SR", s.sr},
                         {"OR", s.oracle},
                         {"SPL", s.spl},
                         {"plan_steps", s.plan_steps},
                         {"s_per_step", s.s_per_step}});
  return {{"suite", r.suite}, {"summaries", summaries}, {"rows", rows},
          {"invariant_violations", r.invariant_violations}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// Synthesis error along imagination chains

/// Mean per-ray RMSE between synthesized and true scans at synthesis depths
/// 1..max_depth. Each chain starts from a real scan at a random episode start
/// and repeatedly imagines a randomly chosen waypoint of the previous
/// (synthesized) scan.
inline std::vector<double> synthesis_error_curve(const std::vector<FloorPlan>& plans, const SceneSynthesizer& synth,
                                                 int chains, int max_depth, std::uint64_t seed) {
  std::vector<double> sum(static_cast<std::size_t>(max_depth), 0.0);
  std::vector<int> count(static_cast<std::size_t>(max_depth), 0);
  Rng rng(mix64(seed ^ 0xc4a1ULL));
  for (int c = 0; c < chains; ++c) {
    const FloorPlan& plan = plans[static_cast<std::size_t>(c) % plans.size()];
    const EpisodeSpec spec = sample_episode(plan, seed + static_cast<std::uint64_t>(c));
    const PlanOracle oracle{&plan, spec.start.position};
    EnvGraph g = init_graph(observe(plan, spec.start));
    NodeId cur = g.start_id();
    for (int d = 1; d <= max_depth; ++d) {
      const EGNode& from = g.node(cur);
      const std::vector<Waypoint> wps = select_waypoints(predict_heatmap(from.observation()), from.position);
      if (wps.empty()) break;
      const Waypoint& wp = wps[std::uniform_int_distribution<std::size_t>(0, wps.size() - 1)(rng)];
      SynthesisResult syn = synthesize(synth, oracle, g, from, wp.position);
      const Observation truth = scan_at(plan, oracle.to_world(wp.position));
      double sq = 0.0;
      for (int i = 0; i < kRayCount; ++i) {
        const double e = syn.observation->ranges[i] - truth.ranges[i];
        sq += e * e;
      }
      sum[static_cast<std::size_t>(d - 1)] += std::sqrt(sq / kRayCount);
      ++count[static_cast<std::size_t>(d - 1)];
      const AddResult r = add_waypoint(g, cur, wp, syn.observation, NodeStatus::Imagined, syn.synthesis_depth);
      if (r.merged) break;
      cur = r.id;
    }
  }
  std::vector<double> out(sum.size(), 0.0);
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = count[i] ? sum[i] / count[i] : 0.0;
  return out;
}

}  // namespace wmnav
