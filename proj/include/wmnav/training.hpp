#pragma once

// Supervised training of the distance network. Graphs are grown along a
// reference path to the goal; each growth step yields one training snapshot
// whose nodes are labelled with their true geodesic distance to the goal.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "wmnav/distance.hpp"
#include "wmnav/world_model.hpp"

namespace wmnav {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Node table shared by all snapshots of one episode. Snapshots only ever add
/// nodes, so snapshot l holds the first `count` rows.
struct EpisodeNodes {
  std::vector<double> real_features;   // n * feature_dim
  std::vector<double> mixed_features;  // real, or synthesized where replaced
  std::vector<char> replaced;
  std::vector<double> labels;
  std::size_t size() const { return labels.size(); }
};

struct TrainingSample {
  std::shared_ptr<const EpisodeNodes> nodes;
  int count = 0;
  std::vector<std::vector<std::pair<int, EdgeEmbedding>>> neighbors;

  std::span<const double> labels() const { return {nodes->labels.data(), static_cast<std::size_t>(count)}; }

  GatGraph graph(bool mixed) const {
    GatGraph g;
    const auto& src = mixed ? nodes->mixed_features : nodes->real_features;
    g.features.assign(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(count) * g.feature_dim);
    g.neighbors = neighbors;
    return g;
  }
};

struct DatasetConfig {
  double path_spacing = 2.0;   // meters between reference-path waypoints
  int extra_waypoints = 5;     // random accessible waypoints per path step (max)
  double replace_prob = 0.3;   // per-node chance of a synthesized scan
  SceneSynthesizer synthesizer = SceneSynthesizer::noisy(0.1, 17);
};

/// Waypoints every `spacing` meters along a shortest path from start to goal
/// (steepest descent on the goal distance field). Starts at the start, ends at
/// the goal.
inline std::vector<Vec2> reference_path(const FloorPlan& plan, const EpisodeSpec& spec, double spacing,
                                        const DistanceField* goal_field = nullptr) {
  std::unique_ptr<DistanceField> owned;
  if (!goal_field) {
    owned = std::make_unique<DistanceField>(plan, spec.goal);
    goal_field = owned.get();
  }
  if (!goal_field->at(spec.start.position)) throw ContractError("reference_path: goal unreachable from start");
  std::vector<Vec2> cells{spec.start.position};
  Cell c = plan.cell_of(spec.start.position);
  const Cell goal = plan.cell_of(spec.goal);
  while (!(c == goal)) {
    double best = *goal_field->at(plan.cell_center(c));
    Cell next = c;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const Cell nb{c.x + dx, c.y + dy};
        if ((dx == 0 && dy == 0) || plan.occupied(nb)) continue;
        if (dx != 0 && dy != 0 && (plan.occupied(c.x + dx, c.y) || plan.occupied(c.x, c.y + dy))) continue;
        const auto d = goal_field->at(plan.cell_center(nb));
        if (d && *d < best) {
          best = *d;
          next = nb;
        }
      }
    if (next == c) break;
    c = next;
    cells.push_back(plan.cell_center(c));
  }
  cells.back() = spec.goal;

  std::vector<Vec2> out{cells.front()};
  double since = 0.0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    since += distance(cells[i - 1], cells[i]);
    if (since >= spacing) {
      out.push_back(cells[i]);
      since = 0.0;
    }
  }
  if (distance(out.back(), spec.goal) > 1e-12) out.push_back(spec.goal);
  return out;
}

/// One snapshot per reference-path waypoint. Positions are in the episode
/// frame (start at the origin).
inline std::vector<TrainingSample> build_episode_samples(const FloorPlan& plan, const EpisodeSpec& spec,
                                                         const std::vector<Vec2>& path, const DatasetConfig& cfg,
                                                         const DistanceField& goal_field, Rng& rng) {
  const Vec2 origin = spec.start.position;
  const GoalDescriptor goal{spec.goal - origin};
  const PlanOracle oracle{&plan, origin};
  auto nodes = std::make_shared<EpisodeNodes>();
  constexpr int F = kRayCount + 2;
  std::bernoulli_distribution replace(cfg.replace_prob);

  EnvGraph g = init_graph(scan_at(plan, origin));
  auto record = [&](NodeId id, const Observation* synth) {
    const EGNode& n = g.node(id);
    const std::size_t row = nodes->size();
    nodes->real_features.resize((row + 1) * F);
    nodes->mixed_features.resize((row + 1) * F);
    node_features(n.observation(), n.position, goal, {nodes->real_features.data() + row * F, F});
    const bool swap = synth && replace(rng);
    node_features(swap ? *synth : n.observation(), n.position, goal, {nodes->mixed_features.data() + row * F, F});
    nodes->replaced.push_back(swap ? 1 : 0);
    nodes->labels.push_back(goal_field.at_or(oracle.to_world(n.position), kUnreachableDistance));
  };
  auto synth_from = [&](NodeId from, Vec2 target) -> Observation {
    const EGNode& f = g.node(from);
    Vec2 t = target;
    if (distance(f.position, t) > kMaxWaypointDistance) t = f.position + (t - f.position) * (kMaxWaypointDistance / distance(f.position, t));
    return *synthesize(cfg.synthesizer, oracle, g, f, t).observation;
  };
  record(g.start_id(), nullptr);

  std::vector<TrainingSample> out;
  NodeId prev = g.start_id();
  for (std::size_t l = 0; l < path.size(); ++l) {
    NodeId anchor = prev;
    if (l > 0) {
      const Vec2 p = path[l] - origin;
      const AddResult r = add_waypoint(g, prev, p, make_observation(scan_at(plan, path[l])), NodeStatus::Visited, 0);
      if (!r.merged) {
        const Observation s = synth_from(prev, p);
        record(r.id, &s);
      }
      anchor = r.id;
    }
    std::vector<Waypoint> cands = select_waypoints(predict_heatmap(g.node(anchor).observation()), g.node(anchor).position);
    std::shuffle(cands.begin(), cands.end(), rng);
    const int max_take = std::min<int>(cfg.extra_waypoints, static_cast<int>(cands.size()));
    const int take = max_take == 0 ? 0 : std::uniform_int_distribution<int>(1, max_take)(rng);
    for (int i = 0; i < take; ++i) {
      const Vec2 p = cands[static_cast<std::size_t>(i)].position;
      const AddResult r =
          add_waypoint(g, anchor, p, make_observation(scan_at(plan, oracle.to_world(p))), NodeStatus::Frontier, 0);
      if (!r.merged) {
        const Observation s = synth_from(anchor, p);
        record(r.id, &s);
      }
    }
    prev = anchor;

    TrainingSample sample;
    sample.nodes = nodes;
    sample.count = static_cast<int>(g.size());
    sample.neighbors = to_gat_graph(g, goal).neighbors;
    out.push_back(std::move(sample));
  }
  return out;
}

struct TrainingEpisode {
  const FloorPlan* plan = nullptr;
  EpisodeSpec spec;
};

inline std::vector<TrainingSample> build_training_set(std::span<const TrainingEpisode> episodes,
                                                      const DatasetConfig& cfg, Rng& rng) {
  std::vector<TrainingSample> out;
  for (const TrainingEpisode& ep : episodes) {
    const DistanceField field(*ep.plan, ep.spec.goal);
    const std::vector<Vec2> path = reference_path(*ep.plan, ep.spec, cfg.path_spacing, &field);
    std::vector<TrainingSample> s = build_episode_samples(*ep.plan, ep.spec, path, cfg, field, rng);
    std::move(s.begin(), s.end(), std::back_inserter(out));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimisation

struct TrainConfig {
  double lr = 1e-3;
  int batch = 16;
  int epochs_real = 10;
  int epochs_mixed = 10;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
};

/// AdamW with decoupled weight decay.
class AdamW {
 public:
  AdamW(std::size_t n, const TrainConfig& cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& theta, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mh = m_[i] / c1;
      const double vh = v_[i] / c2;
      theta[i] -= cfg_.lr * (mh / (std::sqrt(vh) + cfg_.eps) + cfg_.weight_decay * theta[i]);
    }
  }

  long steps() const { return t_; }

 private:
  TrainConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

/// Scales `grad` so its L2 norm is at most `max_norm`. Returns the pre-clip norm.
inline double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

struct TrainReport {
  std::vector<double> epoch_loss;  // mean squared error per node, per epoch
  double initial_loss = 0.0;
  double final_loss = 0.0;
  long steps = 0;
};

inline double mean_label(std::span<const TrainingSample> data) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const TrainingSample& s : data)
    for (double y : s.labels()) {
      sum += y;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

/// Root-mean-square error per node over a sample set.
inline double rmse(const GatParams& p, std::span<const TrainingSample> data, bool mixed = false) {
  double sq = 0.0;
  std::size_t n = 0;
  for (const TrainingSample& s : data) {
    sq += gat_loss(p, s.graph(mixed), s.labels());
    n += static_cast<std::size_t>(s.count);
  }
  return n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
}

/// RMSE of predicting `constant` for every node.
inline double constant_rmse(std::span<const TrainingSample> data, double constant) {
  double sq = 0.0;
  std::size_t n = 0;
  for (const TrainingSample& s : data)
    for (double y : s.labels()) {
      sq += (y - constant) * (y - constant);
      ++n;
    }
  return n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
}

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Two-phase training: real observations first, then with synthesized
/// replacements. The output bias starts at the mean label.
inline GatParams train(std::span<const TrainingSample> data, const TrainConfig& cfg, TrainReport* report = nullptr,
                       const EpochCallback& on_epoch = {}) {
  if (data.empty()) throw ContractError("train: empty dataset");
  if (cfg.batch < 1) throw ContractError("train: batch must be >= 1");
  GatParams p = GatParams::initialize(cfg.seed, std::max(mean_label(data), 0.1));
  AdamW opt(p.size(), cfg);
  Rng rng(mix64(cfg.seed ^ 0x7a11ULL));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(p.size());

  TrainReport rep;
  std::size_t total_nodes = 0;
  for (const TrainingSample& s : data) total_nodes += static_cast<std::size_t>(s.count);
  {
    double sq = 0.0;
    for (const TrainingSample& s : data) sq += gat_loss(p, s.graph(false), s.labels());
    rep.initial_loss = sq / static_cast<double>(total_nodes);
  }

  const int epochs = cfg.epochs_real + cfg.epochs_mixed;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const bool mixed = epoch >= cfg.epochs_real;
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sq = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = b; i < e; ++i) {
        const TrainingSample& s = data[order[i]];
        epoch_sq += gat_loss(p, s.graph(mixed), s.labels(), grad);
      }
      const double inv = 1.0 / static_cast<double>(e - b);
      for (double& g : grad) g *= inv;
      const double norm = clip_grad_norm(grad, cfg.grad_clip);
      if (!std::isfinite(norm) || !std::isfinite(epoch_sq))
        throw TrainingDiverged("training diverged: non-finite loss or gradient at epoch " + std::to_string(epoch));
      opt.step(p.values(), grad);
    }
    const double loss = epoch_sq / static_cast<double>(total_nodes);
    rep.epoch_loss.push_back(loss);
    if (on_epoch) on_epoch(epoch, loss);
  }
  if (!p.all_finite()) throw TrainingDiverged("training diverged: non-finite parameters");
  {
    double sq = 0.0;
    for (const TrainingSample& s : data) sq += gat_loss(p, s.graph(false), s.labels());
    rep.final_loss = sq / static_cast<double>(total_nodes);
  }
  rep.steps = opt.steps();
  if (report) *report = std::move(rep);
  return p;
}

}  // namespace wmnav
