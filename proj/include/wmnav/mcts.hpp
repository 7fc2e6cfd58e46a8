#pragma once

// Monte Carlo tree search with UCT selection, single-edge expansion,
// softmax rollouts over estimated distances, and the averaging back-up
//
//   N(s,a) = N(s')
//   Q(s,a) = R(s,a) + γ V(s')
//   N(s)   = 1 + Σ_a N(s,a)
//   V(s)   = Σ_a N(s,a) Q(s,a) / N(s)
//
// The search is generic over a Domain:
//
//   struct Domain {
//     using State = ...; using Action = ...;
//     std::vector<Action> actions(State&);
//     bool is_stop(const State&, const Action&) const;
//     Transition<State> step(State&, const Action&, Rng&);   // next state + reward
//     std::vector<double> rollout_scores(State&, std::span<const Action>, Rng&);
//     std::string action_label(const Action&) const;
//   };
//
// Stop actions lead to terminal children. A child at depth == horizon is
// terminal as well; rollouts from a leaf at depth d run at most horizon - d
// steps.

#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmnav/core.hpp"

namespace wmnav {

struct PlannerConfig {
  int iterations = 50;
  int horizon = 4;
  double exploration = 1.0;  // C
  double gamma = 0.98;
  double temperature = 1.0;  // rollout softmax, per meter
  std::uint64_t seed = 0;
  bool check_invariants = false;

  void validate() const {
    if (iterations < 1) throw ContractError("planner iterations must be >= 1");
    if (horizon < 0) throw ContractError("planner horizon must be >= 0");
    if (exploration < 0.0) throw ContractError("exploration constant must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractError("gamma must lie in (0, 1]");
    if (!(temperature > 0.0)) throw ContractError("rollout temperature must be positive");
  }
};

class DeadEndError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class State>
struct Transition {
  std::optional<State> next;  // nullopt for terminal outcomes (stop)
  double reward = 0.0;
};

template <class D>
concept SearchDomain = requires(D& d, typename D::State& s, const typename D::Action& a,
                                std::span<const typename D::Action> acts, Rng& rng) {
  { d.actions(s) } -> std::same_as<std::vector<typename D::Action>>;
  { d.is_stop(s, a) } -> std::convertible_to<bool>;
  { d.step(s, a, rng) } -> std::same_as<Transition<typename D::State>>;
  { d.rollout_scores(s, acts, rng) } -> std::same_as<std::vector<double>>;
  { d.action_label(a) } -> std::convertible_to<std::string>;
};

/// Q + C·sqrt(ln N(s) / N(s,a)); unvisited edges score +∞.
inline double uct(double q, long n_s, long n_sa, double c) {
  if (n_sa <= 0) return std::numeric_limits<double>::infinity();
  return q + c * std::sqrt(std::log(static_cast<double>(n_s)) / static_cast<double>(n_sa));
}

/// Σ_k γ^(k-1) R_k.
inline double leaf_value(std::span<const double> rewards, double gamma) {
  double v = 0.0;
  double g = 1.0;
  for (double r : rewards) {
    v += g * r;
    g *= gamma;
  }
  return v;
}

/// Softmax over negated scores: smaller score, higher probability.
inline std::vector<double> rollout_probabilities(std::span<const double> scores, double temperature) {
  std::vector<double> p(scores.size());
  if (scores.empty()) return p;
  double lo = std::numeric_limits<double>::infinity();
  for (double s : scores) lo = std::min(lo, s);
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(-(scores[i] - lo) / temperature);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

inline std::size_t sample_index(std::span<const double> probabilities, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    acc += probabilities[i];
    if (u < acc) return i;
  }
  return probabilities.size() - 1;
}

template <class State, class Action>
struct SearchTree {
  struct Edge {
    long visits = 0;
    double q = 0.0;
    double reward = 0.0;
    int child = -1;  // -1 while unexpanded
  };
  struct Node {
    std::optional<State> state;  // dropped for terminal nodes
    int depth = 0;
    bool terminal = false;
    long visits = 0;
    double value = 0.0;
    int parent = -1;
    int parent_edge = -1;
    std::vector<Action> actions;
    std::vector<Edge> edges;

    bool internal() const {
      for (const Edge& e : edges)
        if (e.child >= 0) return true;
      return false;
    }
  };

  std::vector<Node> nodes;  // nodes[0] is the root

  const Node& root() const { return nodes.front(); }
};

/// Path of (node, edge) steps from the root. `unexpanded` is true when the
/// last step names an edge without a child; otherwise the path ended at a
/// terminal node `leaf`.
struct SelectionPath {
  std::vector<std::pair<int, int>> steps;
  bool unexpanded = false;
  int leaf = 0;
};

/// Counts nodes violating the back-up identities (internal nodes only).
template <class Tree>
std::size_t count_invariant_violations(const Tree& tree, double tol = 1e-9) {
  std::size_t bad = 0;
  for (const auto& n : tree.nodes) {
    if (!n.internal()) continue;
    long sum_n = 0;
    double sum_nq = 0.0;
    for (const auto& e : n.edges) {
      sum_n += e.visits;
      sum_nq += static_cast<double>(e.visits) * e.q;
    }
    if (n.visits != 1 + sum_n) ++bad;
    else if (std::abs(n.value - sum_nq / static_cast<double>(n.visits)) > tol) ++bad;
  }
  return bad;
}

template <SearchDomain Domain>
class Mcts {
 public:
  using State = typename Domain::State;
  using Action = typename Domain::Action;
  using Tree = SearchTree<State, Action>;

  Mcts(Domain& domain, PlannerConfig cfg) : domain_(domain), cfg_(cfg) { cfg_.validate(); }

  const Tree& tree() const { return tree_; }
  Tree& mutable_tree() { return tree_; }
  const PlannerConfig& config() const { return cfg_; }
  std::size_t invariant_violations() const { return violations_; }
  std::size_t iterations_run() const { return iterations_run_; }

  /// Starts a fresh tree at `root`. The root counts as visited once.
  void reset(State root) {
    tree_.nodes.clear();
    typename Tree::Node n;
    n.depth = 0;
    n.visits = 1;
    n.actions = domain_.actions(root);
    n.edges.resize(n.actions.size());
    n.terminal = n.actions.empty() || cfg_.horizon == 0;
    n.state = std::move(root);
    tree_.nodes.push_back(std::move(n));
    violations_ = 0;
    iterations_run_ = 0;
  }

  SelectionPath select() const {
    SelectionPath path;
    int cur = 0;
    while (true) {
      const auto& n = tree_.nodes[static_cast<std::size_t>(cur)];
      if (n.terminal || n.edges.empty()) {
        path.leaf = cur;
        return path;
      }
      int best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < n.edges.size(); ++a) {
        const auto& e = n.edges[a];
        const double score = uct(e.q, n.visits, e.visits, cfg_.exploration);
        if (score > best_score) {
          best_score = score;
          best = static_cast<int>(a);
        }
      }
      path.steps.emplace_back(cur, best);
      const int child = n.edges[static_cast<std::size_t>(best)].child;
      if (child < 0) {
        path.unexpanded = true;
        path.leaf = -1;
        return path;
      }
      cur = child;
    }
  }

  /// Appends the child of (node, edge) with N = 1, records the edge reward and
  /// seeds the child's value with a rollout. Returns the child index.
  int expand(int node, int edge, Rng& rng) {
    auto& parent = tree_.nodes[static_cast<std::size_t>(node)];
    if (parent.terminal || !parent.state) throw ContractError("expand: node is terminal");
    auto& e = parent.edges.at(static_cast<std::size_t>(edge));
    if (e.child >= 0) throw ContractError("expand: edge already expanded");
    const Action action = parent.actions[static_cast<std::size_t>(edge)];
    const bool stop = domain_.is_stop(*parent.state, action);
    Transition<State> tr = domain_.step(*parent.state, action, rng);

    typename Tree::Node child;
    child.depth = parent.depth + 1;
    child.visits = 1;
    child.parent = node;
    child.parent_edge = edge;
    child.terminal = stop || !tr.next || child.depth >= cfg_.horizon;
    if (!child.terminal) {
      child.actions = domain_.actions(*tr.next);
      if (child.actions.empty()) child.terminal = true;
    }
    if (!child.terminal) {
      child.edges.resize(child.actions.size());
      const std::vector<double> rewards = rollout(*tr.next, cfg_.horizon - child.depth, rng);
      child.value = leaf_value(rewards, cfg_.gamma);
      child.state = std::move(tr.next);
    }
    const int idx = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(std::move(child));
    auto& pe = tree_.nodes[static_cast<std::size_t>(node)].edges[static_cast<std::size_t>(edge)];
    pe.child = idx;
    pe.reward = tr.reward;
    return idx;
  }

  /// Samples up to `max_steps` actions from the distance softmax; halts after
  /// a stop action or when no action is available.
  std::vector<double> rollout(const State& leaf, int max_steps, Rng& rng) {
    std::vector<double> rewards;
    if (max_steps <= 0) return rewards;
    State s = leaf;
    for (int k = 0; k < max_steps; ++k) {
      const std::vector<Action> acts = domain_.actions(s);
      if (acts.empty()) break;
      const std::vector<double> scores = domain_.rollout_scores(s, acts, rng);
      const std::vector<double> p = rollout_probabilities(scores, cfg_.temperature);
      const Action& a = acts[sample_index(p, rng)];
      const bool stop = domain_.is_stop(s, a);
      Transition<State> tr = domain_.step(s, a, rng);
      rewards.push_back(tr.reward);
      if (stop || !tr.next) break;
      s = std::move(*tr.next);
    }
    return rewards;
  }

  /// Re-applies the back-up identities from the deepest step to the root.
  void backup(const SelectionPath& path) {
    for (auto it = path.steps.rbegin(); it != path.steps.rend(); ++it) {
      auto& n = tree_.nodes[static_cast<std::size_t>(it->first)];
      auto& e = n.edges[static_cast<std::size_t>(it->second)];
      const auto& child = tree_.nodes[static_cast<std::size_t>(e.child)];
      e.visits = child.visits;
      e.q = e.reward + cfg_.gamma * child.value;
      long sum_n = 0;
      double sum_nq = 0.0;
      for (const auto& x : n.edges) {
        sum_n += x.visits;
        sum_nq += static_cast<double>(x.visits) * x.q;
      }
      n.visits = 1 + sum_n;
      n.value = sum_nq / static_cast<double>(n.visits);
    }
  }

  void iterate(Rng& rng) {
    SelectionPath path = select();
    if (path.unexpanded) {
      const auto [node, edge] = path.steps.back();
      path.leaf = expand(node, edge, rng);
    } else if (!path.steps.empty()) {
      ++tree_.nodes[static_cast<std::size_t>(path.leaf)].visits;
    }
    backup(path);
    ++iterations_run_;
    if (cfg_.check_invariants) violations_ += count_invariant_violations(tree_);
  }

  /// Index of argmax_a Q(root, a) over visited root edges (lowest index on ties).
  int best_root_edge() const {
    const auto& r = tree_.root();
    int best = -1;
    for (std::size_t a = 0; a < r.edges.size(); ++a) {
      const auto& e = r.edges[a];
      if (e.visits <= 0) continue;
      if (best < 0 || e.q > r.edges[static_cast<std::size_t>(best)].q) best = static_cast<int>(a);
    }
    return best;
  }

  /// Full search from `root`; returns the chosen root action.
  Action plan(State root, Rng& rng) {
    reset(std::move(root));
    if (tree_.root().actions.empty()) throw DeadEndError("planner: root state has no actions");
    if (tree_.root().terminal) throw ContractError("planner: horizon 0 leaves nothing to search");
    for (int i = 0; i < cfg_.iterations; ++i) iterate(rng);
    const int best = best_root_edge();
    return tree_.root().actions[static_cast<std::size_t>(best)];
  }

 private:
  Domain& domain_;
  PlannerConfig cfg_;
  Tree tree_;
  std::size_t violations_ = 0;
  std::size_t iterations_run_ = 0;
};

}  // namespace wmnav
