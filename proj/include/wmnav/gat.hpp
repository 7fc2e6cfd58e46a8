#pragma once

// Single-layer multi-head graph attention network with an MLP regression
// head, predicting per-node distance to the goal. Forward and exact reverse
// mode gradients are written out by hand in double precision.
//
//   x_v      = [scan_v / 5, (goal - p_v) / 10]                      (122)
//   z_v^h    = W_h x_v                                              (32 per head)
//   m_uv^h   = z_u^h + E_h e_uv          over u in {v} ∪ N(v), e_vv = 0
//   s_uv^h   = LeakyReLU(a_dst^h·z_v^h + a_src^h·m_uv^h)
//   α_uv^h   = softmax_u s_uv^h
//   g_v^h    = ELU(Σ_u α_uv^h m_uv^h + b^h)
//   F(v)     = softplus(w2·ReLU(W1 [g_v^1..g_v^4] + b1) + b2)

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmnav/env_graph.hpp"

namespace wmnav {

struct GatShape {
  int node_features = kRayCount + 2;
  int edge_features = 3;
  int heads = 4;
  int head_dim = 32;
  int mlp_hidden = 64;

  int attn_width() const { return heads * head_dim; }
  bool operator==(const GatShape&) const = default;
};

inline constexpr double kScanScale = kMaxRange;
inline constexpr double kGoalScale = 10.0;
inline constexpr double kLeakySlope = 0.2;

/// Flat parameter vector with named views. Layout order is part of the
/// checkpoint format.
class GatParams {
 public:
  GatParams() : GatParams(GatShape{}) {}
  explicit GatParams(GatShape shape) : shape_(shape) { layout(); }

  const GatShape& shape() const { return shape_; }
  std::vector<double>& values() { return theta_; }
  const std::vector<double>& values() const { return theta_; }
  std::size_t size() const { return theta_.size(); }

  std::size_t w_in() const { return off_w_in_; }    // [h][d][f]
  std::size_t w_edge() const { return off_w_e_; }   // [h][d][3]
  std::size_t a_dst() const { return off_a_dst_; }  // [h][d]
  std::size_t a_src() const { return off_a_src_; }  // [h][d]
  std::size_t b_att() const { return off_b_att_; }  // [h][d]
  std::size_t w1() const { return off_w1_; }        // [m][h*d]
  std::size_t b1() const { return off_b1_; }        // [m]
  std::size_t w2() const { return off_w2_; }        // [m]
  std::size_t b2() const { return off_b2_; }        // scalar

  bool all_finite() const {
    return std::all_of(theta_.begin(), theta_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Glorot-uniform weights, zero biases, output bias set so the initial
  /// prediction is about `initial_output` meters.
  static GatParams initialize(std::uint64_t seed, double initial_output = 5.0, GatShape shape = {}) {
    GatParams p(shape);
    Rng rng(mix64(seed ^ 0x6a7ULL));
    auto glorot = [&](std::size_t off, std::size_t count, int fan_in, int fan_out) {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (std::size_t i = 0; i < count; ++i) p.theta_[off + i] = u(rng);
    };
    const auto H = static_cast<std::size_t>(shape.heads), D = static_cast<std::size_t>(shape.head_dim),
               F = static_cast<std::size_t>(shape.node_features), E = static_cast<std::size_t>(shape.edge_features),
               M = static_cast<std::size_t>(shape.mlp_hidden);
    glorot(p.off_w_in_, H * D * F, shape.node_features, shape.head_dim);
    glorot(p.off_w_e_, H * D * E, shape.edge_features, shape.head_dim);
    glorot(p.off_a_dst_, H * D, 2 * shape.head_dim, 1);
    glorot(p.off_a_src_, H * D, 2 * shape.head_dim, 1);
    glorot(p.off_w1_, M * H * D, shape.attn_width(), shape.mlp_hidden);
    glorot(p.off_w2_, M, shape.mlp_hidden, 1);
    p.theta_[p.off_b2_] = inverse_softplus(initial_output);
    return p;
  }

  static double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

  bool operator==(const GatParams& o) const { return shape_ == o.shape_ && theta_ == o.theta_; }

 private:
  void layout() {
    const auto H = static_cast<std::size_t>(shape_.heads), D = static_cast<std::size_t>(shape_.head_dim),
               F = static_cast<std::size_t>(shape_.node_features), E = static_cast<std::size_t>(shape_.edge_features),
               M = static_cast<std::size_t>(shape_.mlp_hidden);
    std::size_t o = 0;
    off_w_in_ = o; o += H * D * F;
    off_w_e_ = o;  o += H * D * E;
    off_a_dst_ = o; o += H * D;
    off_a_src_ = o; o += H * D;
    off_b_att_ = o; o += H * D;
    off_w1_ = o;   o += M * H * D;
    off_b1_ = o;   o += M;
    off_w2_ = o;   o += M;
    off_b2_ = o;   o += 1;
    theta_.assign(o, 0.0);
  }

  GatShape shape_;
  std::vector<double> theta_;
  std::size_t off_w_in_ = 0, off_w_e_ = 0, off_a_dst_ = 0, off_a_src_ = 0, off_b_att_ = 0, off_w1_ = 0, off_b1_ = 0,
              off_w2_ = 0, off_b2_ = 0;
};

/// Graph in network-input form: dense node features plus, per node, its
/// neighbours in a canonical order (by position) so outputs do not depend on
/// node numbering.
struct GatGraph {
  int feature_dim = kRayCount + 2;
  std::vector<double> features;  // n * feature_dim
  std::vector<std::vector<std::pair<int, EdgeEmbedding>>> neighbors;

  int size() const { return static_cast<int>(neighbors.size()); }
  std::span<const double> feature(int v) const {
    return {features.data() + static_cast<std::size_t>(v) * static_cast<std::size_t>(feature_dim),
            static_cast<std::size_t>(feature_dim)};
  }
};

/// Goal displacement from the episode start, in meters.
struct GoalDescriptor {
  Vec2 offset;
};

inline void node_features(const Observation& obs, Vec2 position, const GoalDescriptor& goal, std::span<double> out) {
  for (int i = 0; i < kRayCount; ++i) out[static_cast<std::size_t>(i)] = obs.ranges[i] / kScanScale;
  const Vec2 rel = goal.offset - position;
  out[kRayCount] = rel.x / kGoalScale;
  out[kRayCount + 1] = rel.y / kGoalScale;
}

namespace detail {
inline bool position_less(Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }
}  // namespace detail

/// Node i of the result is the i-th node of `g` in id order.
inline GatGraph to_gat_graph(const EnvGraph& g, const GoalDescriptor& goal) {
  GatGraph out;
  const int n = static_cast<int>(g.size());
  out.features.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(out.feature_dim), 0.0);
  out.neighbors.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const EGNode& v = g.nodes()[static_cast<std::size_t>(i)];
    node_features(v.observation(), v.position,
                  goal, {out.features.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(out.feature_dim),
                         static_cast<std::size_t>(out.feature_dim)});
    auto& nb = out.neighbors[static_cast<std::size_t>(i)];
    for (const Neighbor& u : v.neighbors) {
      // Aggregation at v uses the edge u -> v.
      const EGNode& un = g.node(u.id);
      nb.emplace_back(static_cast<int>(g.index_of(u.id)), edge_embedding(un.position, v.position));
    }
    std::sort(nb.begin(), nb.end(), [&](const auto& a, const auto& b) {
      return detail::position_less(g.nodes()[static_cast<std::size_t>(a.first)].position,
                                   g.nodes()[static_cast<std::size_t>(b.first)].position);
    });
  }
  return out;
}

namespace gat_detail {

inline double leaky(double s) { return s > 0.0 ? s : kLeakySlope * s; }
inline double leaky_grad(double s) { return s > 0.0 ? 1.0 : kLeakySlope; }
inline double elu(double c) { return c > 0.0 ? c : std::expm1(c); }
inline double elu_grad(double c) { return c > 0.0 ? 1.0 : std::exp(c); }
inline double softplus(double o) { return o > 30.0 ? o : std::log1p(std::exp(o)); }
inline double sigmoid(double o) { return 1.0 / (1.0 + std::exp(-o)); }

/// z = W_in x for every head, laid out [h][d].
inline void project(const GatParams& p, std::span<const double> x, std::span<double> z) {
  const GatShape& s = p.shape();
  const double* w = p.values().data() + p.w_in();
  const auto F = static_cast<std::size_t>(s.node_features);
  const std::size_t rows = static_cast<std::size_t>(s.attn_width());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * F;
    double acc = 0.0;
    for (std::size_t f = 0; f < F; ++f) acc += wr[f] * x[f];
    z[r] = acc;
  }
}

struct NodePass {
  // Per head, per incoming slot (slot 0 is the self loop).
  std::vector<double> messages;  // [slot][h][d]
  std::vector<double> pre;       // [slot][h] pre-activation scores
  std::vector<double> alpha;     // [slot][h]
  std::vector<double> attn_pre;  // [h][d] before ELU
  std::vector<double> attn_out;  // [h][d]
  std::vector<double> hidden_pre;  // [m]
  double out_pre = 0.0;
  double output = 0.0;
};

inline EdgeEmbedding self_edge() { return {0.0, 0.0, 0.0}; }

/// Forward for one node given projections of every node (`z`, [n][h][d]).
inline void node_forward(const GatParams& p, const GatGraph& g, std::span<const double> z, int v, NodePass& pass) {
  const GatShape& s = p.shape();
  const std::size_t H = static_cast<std::size_t>(s.heads), D = static_cast<std::size_t>(s.head_dim),
                    HD = H * D, M = static_cast<std::size_t>(s.mlp_hidden);
  const auto& nb = g.neighbors[static_cast<std::size_t>(v)];
  const std::size_t slots = nb.size() + 1;
  const double* th = p.values().data();
  pass.messages.assign(slots * HD, 0.0);
  pass.pre.assign(slots * H, 0.0);
  pass.alpha.assign(slots * H, 0.0);
  pass.attn_pre.assign(HD, 0.0);
  pass.attn_out.assign(HD, 0.0);
  pass.hidden_pre.assign(M, 0.0);

  const double* zv = z.data() + static_cast<std::size_t>(v) * HD;
  for (std::size_t k = 0; k < slots; ++k) {
    const int u = k == 0 ? v : nb[k - 1].first;
    const EdgeEmbedding e = k == 0 ? self_edge() : nb[k - 1].second;
    const double ev[3] = {e.cos_theta, e.sin_theta, e.distance};
    const double* zu = z.data() + static_cast<std::size_t>(u) * HD;
    for (std::size_t r = 0; r < HD; ++r) {
      const double* we = th + p.w_edge() + r * 3;
      pass.messages[k * HD + r] = zu[r] + we[0] * ev[0] + we[1] * ev[1] + we[2] * ev[2];
    }
  }
  for (std::size_t h = 0; h < H; ++h) {
    double t = 0.0;
    for (std::size_t d = 0; d < D; ++d) t += th[p.a_dst() + h * D + d] * zv[h * D + d];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < slots; ++k) {
      double sc = t;
      for (std::size_t d = 0; d < D; ++d) sc += th[p.a_src() + h * D + d] * pass.messages[k * HD + h * D + d];
      pass.pre[k * H + h] = sc;
      mx = std::max(mx, leaky(sc));
    }
    double z_sum = 0.0;
    for (std::size_t k = 0; k < slots; ++k) {
      const double e = std::exp(leaky(pass.pre[k * H + h]) - mx);
      pass.alpha[k * H + h] = e;
      z_sum += e;
    }
    for (std::size_t k = 0; k < slots; ++k) pass.alpha[k * H + h] /= z_sum;
    for (std::size_t d = 0; d < D; ++d) {
      double c = th[p.b_att() + h * D + d];
      for (std::size_t k = 0; k < slots; ++k) c += pass.alpha[k * H + h] * pass.messages[k * HD + h * D + d];
      pass.attn_pre[h * D + d] = c;
      pass.attn_out[h * D + d] = elu(c);
    }
  }
  double o = th[p.b2()];
  for (std::size_t m = 0; m < M; ++m) {
    const double* w1 = th + p.w1() + m * HD;
    double r = th[p.b1() + m];
    for (std::size_t i = 0; i < HD; ++i) r += w1[i] * pass.attn_out[i];
    pass.hidden_pre[m] = r;
    if (r > 0.0) o += th[p.w2() + m] * r;
  }
  pass.out_pre = o;
  pass.output = softplus(o);
}

/// Accumulates d(output)/d(theta) * upstream into `grad` and
/// d(output)/dz * upstream into `dz`.
inline void node_backward(const GatParams& p, const GatGraph& g, std::span<const double> z, int v,
                          const NodePass& pass, double upstream, std::span<double> grad, std::span<double> dz) {
  const GatShape& s = p.shape();
  const std::size_t H = static_cast<std::size_t>(s.heads), D = static_cast<std::size_t>(s.head_dim),
                    HD = H * D, M = static_cast<std::size_t>(s.mlp_hidden);
  const auto& nb = g.neighbors[static_cast<std::size_t>(v)];
  const std::size_t slots = nb.size() + 1;
  const double* th = p.values().data();

  const double d_o = upstream * sigmoid(pass.out_pre);
  grad[p.b2()] += d_o;
  std::vector<double> d_attn(HD, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    const double r = pass.hidden_pre[m];
    if (r <= 0.0) continue;
    grad[p.w2() + m] += d_o * r;
    const double d_r = d_o * th[p.w2() + m];
    grad[p.b1() + m] += d_r;
    const double* w1 = th + p.w1() + m * HD;
    double* gw1 = grad.data() + p.w1() + m * HD;
    for (std::size_t i = 0; i < HD; ++i) {
      gw1[i] += d_r * pass.attn_out[i];
      d_attn[i] += d_r * w1[i];
    }
  }

  std::vector<double> d_msg(slots * HD, 0.0);
  const double* zv = z.data() + static_cast<std::size_t>(v) * HD;
  for (std::size_t h = 0; h < H; ++h) {
    std::vector<double> d_c(D);
    for (std::size_t d = 0; d < D; ++d) {
      d_c[d] = d_attn[h * D + d] * elu_grad(pass.attn_pre[h * D + d]);
      grad[p.b_att() + h * D + d] += d_c[d];
    }
    std::vector<double> d_alpha(slots, 0.0);
    double weighted = 0.0;
    for (std::size_t k = 0; k < slots; ++k) {
      const double a = pass.alpha[k * H + h];
      double da = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        da += d_c[d] * pass.messages[k * HD + h * D + d];
        d_msg[k * HD + h * D + d] += a * d_c[d];
      }
      d_alpha[k] = da;
      weighted += a * da;
    }
    double d_t = 0.0;
    for (std::size_t k = 0; k < slots; ++k) {
      const double a = pass.alpha[k * H + h];
      const double d_l = a * (d_alpha[k] - weighted);
      const double d_s = d_l * leaky_grad(pass.pre[k * H + h]);
      d_t += d_s;
      for (std::size_t d = 0; d < D; ++d) {
        grad[p.a_src() + h * D + d] += d_s * pass.messages[k * HD + h * D + d];
        d_msg[k * HD + h * D + d] += d_s * th[p.a_src() + h * D + d];
      }
    }
    for (std::size_t d = 0; d < D; ++d) {
      grad[p.a_dst() + h * D + d] += d_t * zv[h * D + d];
      dz[static_cast<std::size_t>(v) * HD + h * D + d] += d_t * th[p.a_dst() + h * D + d];
    }
  }
  for (std::size_t k = 0; k < slots; ++k) {
    const int u = k == 0 ? v : nb[k - 1].first;
    const EdgeEmbedding e = k == 0 ? self_edge() : nb[k - 1].second;
    const double ev[3] = {e.cos_theta, e.sin_theta, e.distance};
    for (std::size_t r = 0; r < HD; ++r) {
      const double dm = d_msg[k * HD + r];
      dz[static_cast<std::size_t>(u) * HD + r] += dm;
      double* ge = grad.data() + p.w_edge() + r * 3;
      ge[0] += dm * ev[0];
      ge[1] += dm * ev[1];
      ge[2] += dm * ev[2];
    }
  }
}

inline std::vector<double> project_all(const GatParams& p, const GatGraph& g) {
  const std::size_t HD = static_cast<std::size_t>(p.shape().attn_width());
  std::vector<double> z(static_cast<std::size_t>(g.size()) * HD);
  for (int v = 0; v < g.size(); ++v)
    project(p, g.feature(v), {z.data() + static_cast<std::size_t>(v) * HD, HD});
  return z;
}

}  // namespace gat_detail

/// Per-node distance predictions (meters, nonnegative), in node order.
inline std::vector<double> gat_forward(const GatParams& p, const GatGraph& g) {
  const std::vector<double> z = gat_detail::project_all(p, g);
  std::vector<double> out(static_cast<std::size_t>(g.size()));
  gat_detail::NodePass pass;
  for (int v = 0; v < g.size(); ++v) {
    gat_detail::node_forward(p, g, z, v, pass);
    out[static_cast<std::size_t>(v)] = pass.output;
  }
  return out;
}

inline std::vector<double> gat_forward(const GatParams& p, const EnvGraph& g, const GoalDescriptor& goal) {
  return gat_forward(p, to_gat_graph(g, goal));
}

/// Squared-error loss Σ_v (F(v) - label_v)² for one graph. When `grad` is
/// non-empty the loss gradient is added into it.
inline double gat_loss(const GatParams& p, const GatGraph& g, std::span<const double> labels,
                       std::span<double> grad = {}) {
  if (labels.size() != static_cast<std::size_t>(g.size())) throw ContractError("gat_loss: label count mismatch");
  const std::vector<double> z = gat_detail::project_all(p, g);
  const std::size_t HD = static_cast<std::size_t>(p.shape().attn_width());
  std::vector<double> dz(grad.empty() ? 0 : z.size(), 0.0);
  gat_detail::NodePass pass;
  double loss = 0.0;
  for (int v = 0; v < g.size(); ++v) {
    gat_detail::node_forward(p, g, z, v, pass);
    const double err = pass.output - labels[static_cast<std::size_t>(v)];
    loss += err * err;
    if (!grad.empty()) gat_detail::node_backward(p, g, z, v, pass, 2.0 * err, grad, dz);
  }
  if (!grad.empty()) {
    const auto F = static_cast<std::size_t>(p.shape().node_features);
    for (int v = 0; v < g.size(); ++v) {
      const std::span<const double> x = g.feature(v);
      for (std::size_t r = 0; r < HD; ++r) {
        const double d = dz[static_cast<std::size_t>(v) * HD + r];
        if (d == 0.0) continue;
        double* gw = grad.data() + p.w_in() + r * F;
        for (std::size_t f = 0; f < F; ++f) gw[f] += d * x[f];
      }
    }
  }
  return loss;
}

/// Memoized inference over evolving graphs. Projections are cached per node
/// content; outputs are cached per (node, neighbourhood) signature, so nodes
/// whose one-hop neighbourhood is unchanged between graph snapshots are not
/// recomputed. Not thread-safe; one per episode.
class GatEvaluator {
 public:
  GatEvaluator(std::shared_ptr<const GatParams> params, GoalDescriptor goal)
      : params_(std::move(params)), goal_(goal) {}

  const GatParams& params() const { return *params_; }

  /// Prediction for every node of `g`, in node order.
  std::vector<double> evaluate(const EnvGraph& g) {
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = evaluate_node(g, g.nodes()[i]);
    return out;
  }

  double evaluate_node(const EnvGraph& g, const EGNode& v) {
    std::uint64_t sig = node_key(v);
    for (const Neighbor& u : v.neighbors) sig = hash_combine(sig, node_key(g.node(u.id)));
    if (auto it = outputs_.find(sig); it != outputs_.end()) return it->second;

    // Local subgraph: v plus its neighbours, neighbours in canonical order.
    std::vector<const EGNode*> local{&v};
    for (const Neighbor& u : v.neighbors) local.push_back(&g.node(u.id));
    std::sort(local.begin() + 1, local.end(),
              [](const EGNode* a, const EGNode* b) { return detail::position_less(a->position, b->position); });
    const std::size_t HD = static_cast<std::size_t>(params_->shape().attn_width());
    std::vector<double> z(local.size() * HD);
    GatGraph sub;
    sub.neighbors.resize(local.size());
    for (std::size_t i = 0; i < local.size(); ++i) {
      const std::vector<double>& zi = projection(*local[i]);
      std::copy(zi.begin(), zi.end(), z.begin() + static_cast<std::ptrdiff_t>(i * HD));
      if (i > 0) sub.neighbors[0].emplace_back(static_cast<int>(i), edge_embedding(local[i]->position, v.position));
    }
    gat_detail::node_forward(*params_, sub, z, 0, pass_);
    outputs_.emplace(sig, pass_.output);
    return pass_.output;
  }

 private:
  static std::uint64_t node_key(const EGNode& n) {
    return hash_combine(hash_combine(n.embedding_key, hash_double(n.position.x)), hash_double(n.position.y));
  }

  const std::vector<double>& projection(const EGNode& n) {
    const std::uint64_t key = node_key(n);
    auto it = projections_.find(key);
    if (it != projections_.end()) return it->second;
    std::vector<double> x(static_cast<std::size_t>(params_->shape().node_features));
    node_features(n.observation(), n.position, goal_, x);
    std::vector<double> z(static_cast<std::size_t>(params_->shape().attn_width()));
    gat_detail::project(*params_, x, z);
    return projections_.emplace(key, std::move(z)).first->second;
  }

  std::shared_ptr<const GatParams> params_;
  GoalDescriptor goal_;
  std::unordered_map<std::uint64_t, std::vector<double>> projections_;
  std::unordered_map<std::uint64_t, double> outputs_;
  gat_detail::NodePass pass_;
};

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json params_to_json(const GatParams& p) {
  const GatShape& s = p.shape();
  return {{"version", kCheckpointVersion},
          {"format", "gat-distance"},
          {"shape",
           {{"node_features", s.node_features},
            {"edge_features", s.edge_features},
            {"heads", s.heads},
            {"head_dim", s.head_dim},
            {"mlp_hidden", s.mlp_hidden}}},
          {"count", p.size()},
          {"params", p.values()}};
}

inline GatParams params_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != kCheckpointVersion || j.value("format", "") != "gat-distance")
    throw std::runtime_error("not a gat-distance checkpoint (version 1)");
  const auto& sj = j.at("shape");
  GatShape s{sj.at("node_features").get<int>(), sj.at("edge_features").get<int>(), sj.at("heads").get<int>(),
             sj.at("head_dim").get<int>(), sj.at("mlp_hidden").get<int>()};
  if (s.edge_features != 3 || s.node_features != kRayCount + 2)
    throw std::runtime_error("checkpoint shape is incompatible with this build");
  GatParams p(s);
  const auto values = j.at("params").get<std::vector<double>>();
  if (values.size() != p.size() || j.at("count").get<std::size_t>() != p.size())
    throw std::runtime_error("checkpoint parameter count does not match its shape header");
  p.values() = values;
  if (!p.all_finite()) throw std::runtime_error("checkpoint contains non-finite parameters");
  return p;
}

}  // namespace wmnav
