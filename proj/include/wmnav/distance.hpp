#pragma once

// Distance-to-goal estimators used for rewards and rollouts: the learned
// graph network, the ground-truth oracle, a noisy oracle, and a mixture that
// replaces learned estimates with ground truth at a fixed rate.

#include <limits>
#include <memory>
#include <span>
#include <unordered_map>

#include "wmnav/gat.hpp"
#include "wmnav/world_model.hpp"

namespace wmnav {

/// Stand-in for +∞ when the goal is unreachable from a node.
inline constexpr double kUnreachableDistance = 100.0;

enum class EstimatorKind { Learned, Oracle, NoisyOracle, Mixture };

inline const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Learned: return "learned";
    case EstimatorKind::Oracle: return "oracle";
    case EstimatorKind::NoisyOracle: return "noisy_oracle";
    case EstimatorKind::Mixture: return "mixture";
  }
  return "?";
}

struct DistanceEstimator {
  EstimatorKind kind = EstimatorKind::Oracle;
  std::shared_ptr<const GatParams> params;  // Learned and Mixture
  double sigma = 0.0;                        // NoisyOracle
  double p_replace = 0.0;                    // Mixture

  static DistanceEstimator learned(std::shared_ptr<const GatParams> p) {
    if (!p) throw ContractError("learned estimator needs parameters");
    return {EstimatorKind::Learned, std::move(p), 0.0, 0.0};
  }
  static DistanceEstimator oracle() { return {EstimatorKind::Oracle, nullptr, 0.0, 0.0}; }
  static DistanceEstimator noisy_oracle(double sigma) {
    if (!(sigma >= 0.0)) throw ContractError("noisy oracle sigma must be >= 0");
    return {EstimatorKind::NoisyOracle, nullptr, sigma, 0.0};
  }
  static DistanceEstimator mixture(double p_replace, std::shared_ptr<const GatParams> p) {
    if (!(p_replace >= 0.0 && p_replace <= 1.0)) throw ContractError("p_replace must lie in [0, 1]");
    if (!p) throw ContractError("mixture estimator needs learned parameters");
    return {EstimatorKind::Mixture, std::move(p), 0.0, p_replace};
  }

  bool needs_params() const { return kind == EstimatorKind::Learned || kind == EstimatorKind::Mixture; }
};

/// Ground-truth distances to the goal for episode-frame positions.
struct OracleContext {
  const DistanceField* field = nullptr;  // single-source field from the goal
  Vec2 origin;

  double distance_from(Vec2 rel) const {
    if (!field) throw ContractError("oracle context has no distance field");
    return field->at_or(origin + rel, kUnreachableDistance);
  }
};

/// Per-episode estimator state: the estimator choice plus inference caches.
class DistanceModel {
 public:
  DistanceModel(DistanceEstimator estimator, GoalDescriptor goal, OracleContext oracle)
      : estimator_(std::move(estimator)), goal_(goal), oracle_(oracle) {
    if (estimator_.needs_params()) gat_ = std::make_unique<GatEvaluator>(estimator_.params, goal_);
  }

  const DistanceEstimator& estimator() const { return estimator_; }
  const GoalDescriptor& goal() const { return goal_; }

  double estimate(const EnvGraph& g, const EGNode& node, Rng& rng) {
    switch (estimator_.kind) {
      case EstimatorKind::Oracle:
        return oracle_.distance_from(node.position);
      case EstimatorKind::NoisyOracle: {
        const double truth = oracle_.distance_from(node.position);
        if (truth >= kUnreachableDistance) return truth;
        return std::max(0.0, truth + draw(node, [&] { return std::normal_distribution<double>(0.0, estimator_.sigma)(rng); }));
      }
      case EstimatorKind::Learned:
        return std::min(gat_->evaluate_node(g, node), kUnreachableDistance);
      case EstimatorKind::Mixture: {
        const double u = draw(node, [&] { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); });
        if (u < estimator_.p_replace) return oracle_.distance_from(node.position);
        return std::min(gat_->evaluate_node(g, node), kUnreachableDistance);
      }
    }
    return kUnreachableDistance;
  }

  /// Starts a new decision: random draws are fixed per node position within a
  /// round so that a node keeps its estimate across the states of one search.
  void begin_round() { draws_.clear(); }

  /// One estimate per node of `g`, in node order.
  std::vector<double> estimate_all(const EnvGraph& g, Rng& rng) {
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = estimate(g, g.nodes()[i], rng);
    return out;
  }

 private:
  DistanceEstimator estimator_;
  GoalDescriptor goal_;
  OracleContext oracle_;
  std::unique_ptr<GatEvaluator> gat_;
  std::unordered_map<std::uint64_t, double> draws_;

  template <class F>
  double draw(const EGNode& node, F&& sample) {
    const std::uint64_t key = hash_combine(hash_double(node.position.x), hash_double(node.position.y));
    if (auto it = draws_.find(key); it != draws_.end()) return it->second;
    const double v = sample();
    draws_.emplace(key, v);
    return v;
  }
};

/// Stateless form of a single estimate.
inline double estimate(const DistanceEstimator& e, const EGNode& node, const EnvGraph& g, const GoalDescriptor& goal,
                       const OracleContext& oracle, Rng& rng) {
  DistanceModel model(e, goal, oracle);
  return model.estimate(g, node, rng);
}

/// Distance of a state: the smallest estimate over a node subset.
inline double min_estimate(std::span<const double> estimates) {
  double best = std::numeric_limits<double>::infinity();
  for (double e : estimates) best = std::min(best, e);
  return best;
}

}  // namespace wmnav
