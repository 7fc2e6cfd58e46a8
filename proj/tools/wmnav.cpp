// Command-line front end: environment generation, distance-network training,
// single episodes, benchmark suites and search-tree export.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wmnav/benchmark.hpp"
#include "wmnav/env_io.hpp"

using namespace wmnav;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return json::parse(in);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::shared_ptr<const GatParams> load_checkpoint(const std::string& path) {
  return std::make_shared<const GatParams>(params_from_json(read_json(path)));
}

std::shared_ptr<const GatParams> checkpoint_for(const BenchmarkConfig& cfg, const std::string& override_path) {
  const std::string path = override_path.empty() ? cfg.checkpoint : override_path;
  if (!needs_checkpoint(cfg)) return path.empty() ? nullptr : load_checkpoint(path);
  if (path.empty()) throw MissingCheckpoint("config needs a trained checkpoint; run train-dist and pass --checkpoint");
  return load_checkpoint(path);
}

std::shared_ptr<const GatParams> checkpoint_for(const BenchmarkConfig& cfg, const VariantSpec& v,
                                               const std::string& override_path) {
  if (!override_path.empty()) return load_checkpoint(override_path);
  const bool needed = v.estimator.kind == EstimatorKind::Learned || v.estimator.kind == EstimatorKind::Mixture;
  return needed && !cfg.checkpoint.empty() ? load_checkpoint(cfg.checkpoint) : nullptr;
}

const VariantSpec& find_variant(const BenchmarkConfig& cfg, const std::string& name) {
  if (cfg.variants.empty()) throw std::invalid_argument("config has no variants");
  if (name.empty()) return cfg.variants.front();
  for (const VariantSpec& v : cfg.variants)
    if (v.name == name) return v;
  throw std::invalid_argument("no variant named " + name);
}

struct EpisodeInput {
  FloorPlan plan;
  EpisodeSpec spec;
};

// An episode either comes from an environment document or from the config's
// episode set.
EpisodeInput pick_episode(const BenchmarkConfig& cfg, const std::string& env_path, int index) {
  if (!env_path.empty()) {
    EnvDocument doc = env_from_json(read_json(env_path));
    if (doc.episodes.empty()) doc.episodes.push_back(sample_episode(doc.plan, 0));
    if (index < 0 || index >= static_cast<int>(doc.episodes.size()))
      throw std::out_of_range("episode index out of range");
    return {doc.plan, doc.episodes[static_cast<std::size_t>(index)]};
  }
  const EpisodeSet set = make_episode_set(cfg);
  if (index < 0 || index >= static_cast<int>(set.episodes.size()))
    throw std::out_of_range("episode index out of range");
  const BenchEpisode& e = set.episodes[static_cast<std::size_t>(index)];
  return {set.plans[e.plan_index], e.spec};
}

BenchmarkConfig config_or_default(const std::string& path) {
  if (!path.empty()) return load_benchmark_config(path);
  BenchmarkConfig cfg;
  VariantSpec v;
  v.name = "default";
  cfg.variants.push_back(v);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"World-model mental planning for continuous navigation"};
  app.require_subcommand(1);

  // gen-env
  auto* gen = app.add_subcommand("gen-env", "Generate a floor plan and sample episodes on it");
  std::uint64_t gen_seed = 101;
  int gen_episodes = 1;
  std::string gen_out;
  FloorPlanParams fp;
  gen->add_option("--seed", gen_seed, "Floor plan seed");
  gen->add_option("--episodes", gen_episodes, "Episodes to sample")->check(CLI::NonNegativeNumber);
  gen->add_option("--width", fp.width_m, "Width in meters");
  gen->add_option("--height", fp.height_m, "Height in meters");
  gen->add_option("--rooms", fp.room_count, "Number of rooms");
  gen->add_option("--out", gen_out, "Output JSON path")->required();

  // train-dist
  auto* tr = app.add_subcommand("train-dist", "Train the distance network on the seen plans of a config");
  std::string tr_config, tr_out;
  int tr_episodes = -1;
  tr->add_option("--config", tr_config, "Benchmark config (plans and training settings)");
  tr->add_option("--episodes", tr_episodes, "Override the number of training episodes");
  tr->add_option("--out", tr_out, "Checkpoint output path")->required();

  // run
  auto* run = app.add_subcommand("run", "Run one episode and write its result as JSON");
  std::string run_config, run_env, run_variant, run_ckpt, run_out;
  int run_index = 0;
  bool run_trees = false;
  run->add_option("--config", run_config, "Benchmark config providing variants and episodes");
  run->add_option("--env", run_env, "Environment document from gen-env");
  run->add_option("--episode", run_index, "Episode index");
  run->add_option("--variant", run_variant, "Variant name (default: first)");
  run->add_option("--checkpoint", run_ckpt, "Distance network checkpoint");
  run->add_flag("--trees", run_trees, "Embed search trees in the result");
  run->add_option("--out", run_out, "Result JSON path (default: stdout)");

  // bench
  auto* bench = app.add_subcommand("bench", "Run every variant of a config over its episode set");
  std::string bench_config, bench_ckpt, bench_csv, bench_json;
  int bench_workers = 0;
  bool bench_quiet = false;
  bench->add_option("--config", bench_config, "Benchmark config")->required();
  bench->add_option("--checkpoint", bench_ckpt, "Distance network checkpoint");
  bench->add_option("--csv", bench_csv, "CSV report path (overrides config)");
  bench->add_option("--json", bench_json, "JSON report path (overrides config)");
  bench->add_option("--workers", bench_workers, "Worker threads (overrides config)");
  bench->add_flag("--quiet", bench_quiet, "No per-episode progress");

  // export-tree
  auto* ex = app.add_subcommand("export-tree", "Run an episode and export one decision's search tree");
  std::string ex_config, ex_env, ex_variant, ex_ckpt, ex_dot, ex_json;
  int ex_index = 0, ex_decision = 0;
  ex->add_option("--config", ex_config, "Benchmark config");
  ex->add_option("--env", ex_env, "Environment document from gen-env");
  ex->add_option("--episode", ex_index, "Episode index");
  ex->add_option("--variant", ex_variant, "Variant name (default: first)");
  ex->add_option("--checkpoint", ex_ckpt, "Distance network checkpoint");
  ex->add_option("--decision", ex_decision, "Decision index within the episode");
  ex->add_option("--dot", ex_dot, "Graphviz output path")->required();
  ex->add_option("--json", ex_json, "Also write the tree as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const FloorPlan plan = generate_floorplan(gen_seed, fp);
      std::vector<EpisodeSpec> eps;
      for (int i = 0; i < gen_episodes; ++i) eps.push_back(sample_episode(plan, static_cast<std::uint64_t>(i)));
      write_json(gen_out, env_to_json(plan, eps));
      std::printf("wrote %s: %dx%d cells, %zu rooms, %zu episodes\n", gen_out.c_str(), plan.width(), plan.height(),
                  plan.rooms().size(), eps.size());
    } else if (tr->parsed()) {
      BenchmarkConfig cfg = tr_config.empty() ? BenchmarkConfig{} : load_benchmark_config(tr_config);
      if (tr_episodes > 0) cfg.training.episodes = tr_episodes;
      const EpisodeSet set = make_episode_set(cfg);
      const auto eps = training_episodes(set, cfg, cfg.training.episodes);
      Rng rng(mix64(cfg.training.train.seed ^ 0xda7aULL));
      std::vector<TrainingSample> data = build_training_set(eps, cfg.training.dataset, rng);
      // Last tenth of the episodes' snapshots is held out.
      const std::size_t cut = data.size() - data.size() / 10;
      const std::span<const TrainingSample> train_set(data.data(), cut), held(data.data() + cut, data.size() - cut);
      const auto t0 = std::chrono::steady_clock::now();
      TrainReport rep;
      const GatParams p = train(train_set, cfg.training.train, &rep, [](int epoch, double loss) {
        std::printf("epoch %d  mse %.4f\n", epoch, loss);
        std::fflush(stdout);
      });
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_json(tr_out, params_to_json(p));
      std::printf("samples %zu  held-out rmse %.4f  mean-label rmse %.4f  (%.1fs)\n", data.size(), rmse(p, held),
                  constant_rmse(held, mean_label(train_set)), secs);
    } else if (run->parsed()) {
      const BenchmarkConfig cfg = config_or_default(run_config);
      const VariantSpec& v = find_variant(cfg, run_variant);
      const EpisodeInput in = pick_episode(cfg, run_env, run_index);
      EpisodeConfig ec = episode_config(cfg, v, checkpoint_for(cfg, v, run_ckpt));
      ec.record_trees = run_trees;
      ec.record_timing = true;
      const EpisodeResult res = run_episode(in.plan, in.spec, ec);
      json j = result_to_json(res);
      const Metrics m = compute_metrics(res, in.spec, in.plan, cfg.success_radius);
      j["metrics"] = {{"NE", m.ne}, {"TL", m.tl}, {"SR", m.sr}, {"OR", m.oracle}, {"SPL", m.spl}};
      j["variant"] = v.name;
      if (run_out.empty()) std::cout << j.dump(2) << "\n";
      else write_json(run_out, j);
      std::fprintf(stderr, "%s  %s  SR=%d NE=%.2f TL=%.2f decisions=%d\n", in.spec.episode_id.c_str(),
                   to_string(res.outcome), m.sr, m.ne, m.tl, res.plan_steps());
    } else if (bench->parsed()) {
      BenchmarkConfig cfg = load_benchmark_config(bench_config);
      if (!bench_csv.empty()) cfg.csv_path = bench_csv;
      if (!bench_json.empty()) cfg.json_path = bench_json;
      if (bench_workers > 0) cfg.workers = bench_workers;
      const auto params = checkpoint_for(cfg, bench_ckpt);
      const EpisodeSet set = make_episode_set(cfg);
      ProgressCallback progress;
      if (!bench_quiet)
        progress = [](const SuiteRow& r) {
          std::fprintf(stderr, "%s %s SR=%d NE=%.2f\n", r.variant.c_str(), r.episode_id.c_str(), r.metrics.sr,
                       r.metrics.ne);
        };
      const SuiteReport rep = run_suite(cfg, set, params, progress);
      if (!cfg.csv_path.empty()) write_text(cfg.csv_path, report_csv(rep));
      if (!cfg.json_path.empty()) write_json(cfg.json_path, report_json(rep));
      std::printf("%-28s %6s %6s %6s %6s %6s %8s\n", "variant", "NE", "TL", "SR", "OR", "SPL", "s/step");
      for (const VariantSummary& s : rep.summaries)
        std::printf("%-28s %6.2f %6.2f %6.1f %6.1f %6.1f %8.4f\n", s.variant.c_str(), s.ne, s.tl, 100 * s.sr,
                    100 * s.oracle, 100 * s.spl, s.s_per_step);
      std::printf("invariant violations: %zu\n", rep.invariant_violations);
    } else if (ex->parsed()) {
      const BenchmarkConfig cfg = config_or_default(ex_config);
      const VariantSpec& v = find_variant(cfg, ex_variant);
      const EpisodeInput in = pick_episode(cfg, ex_env, ex_index);
      EpisodeConfig ec = episode_config(cfg, v, checkpoint_for(cfg, v, ex_ckpt));
      ec.record_trees = true;
      const EpisodeResult res = run_episode(in.plan, in.spec, ec);
      const auto& decs = res.trajectory.decisions;
      if (ex_decision < 0 || ex_decision >= static_cast<int>(decs.size()))
        throw std::out_of_range("episode has " + std::to_string(decs.size()) + " decisions");
      const Decision& d = decs[static_cast<std::size_t>(ex_decision)];
      if (!d.tree) throw std::runtime_error("decision was made without a search tree (greedy variant)");
      write_dot(*d.tree, ex_dot);
      if (!ex_json.empty()) write_json(ex_json, tree_to_json(*d.tree));
      std::printf("decision %d: %s, %zu tree nodes -> %s\n", ex_decision, to_string(d.action).c_str(),
                  d.tree->nodes.size(), ex_dot.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
