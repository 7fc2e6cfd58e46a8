#pragma once

// Search-tree snapshots and their Graphviz export. Nodes carry V(s) and N(s);
// edges carry Q(s,a), N(s,a) and R(s,a). Colors use a blue-to-red scale on
// values normalized to [0, 1] over the tree (min -> 0, max -> 1; a tree with a
// single distinct value maps everything to 1).

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <stdexcept>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmnav/mcts.hpp"

namespace wmnav {

struct TreeSnapshot {
  struct Node {
    int id = 0;
    int depth = 0;
    long visits = 0;
    double value = 0.0;
    bool terminal = false;
  };
  struct Edge {
    int parent = 0;
    int child = 0;
    std::string action;
    long visits = 0;
    double q = 0.0;
    double reward = 0.0;
  };
  std::vector<Node> nodes;
  std::vector<Edge> edges;
};

template <SearchDomain Domain>
TreeSnapshot snapshot(const Mcts<Domain>& search, const Domain& domain) {
  TreeSnapshot out;
  const auto& nodes = search.tree().nodes;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    out.nodes.push_back({static_cast<int>(i), n.depth, n.visits, n.value, n.terminal});
    for (std::size_t a = 0; a < n.edges.size(); ++a) {
      const auto& e = n.edges[a];
      if (e.child < 0) continue;
      out.edges.push_back({static_cast<int>(i), e.child, domain.action_label(n.actions[a]), e.visits, e.q, e.reward});
    }
  }
  return out;
}

inline nlohmann::json tree_to_json(const TreeSnapshot& t) {
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (const auto& n : t.nodes)
    nodes.push_back({{"id", n.id}, {"depth", n.depth}, {"N", n.visits}, {"V", n.value}, {"terminal", n.terminal}});
  for (const auto& e : t.edges)
    edges.push_back({{"parent", e.parent}, {"child", e.child}, {"action", e.action}, {"N", e.visits}, {"Q", e.q},
                     {"R", e.reward}});
  return {{"nodes", nodes}, {"edges", edges}};
}

inline TreeSnapshot tree_from_json(const nlohmann::json& j) {
  TreeSnapshot t;
  for (const auto& n : j.at("nodes"))
    t.nodes.push_back({n.at("id").get<int>(), n.at("depth").get<int>(), n.at("N").get<long>(), n.at("V").get<double>(),
                       n.at("terminal").get<bool>()});
  for (const auto& e : j.at("edges"))
    t.edges.push_back({e.at("parent").get<int>(), e.at("child").get<int>(), e.at("action").get<std::string>(),
                       e.at("N").get<long>(), e.at("Q").get<double>(), e.at("R").get<double>()});
  return t;
}

/// (x - lo) / (hi - lo); 1 when the range is degenerate.
inline double normalize(double x, double lo, double hi) { return hi > lo ? (x - lo) / (hi - lo) : 1.0; }

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Blue (0) to red (1).
inline std::string color_hex(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255.0 * t));
  const int b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x00%02x", r, b);
  return buf;
}

}  // namespace detail

inline std::string to_dot(const TreeSnapshot& t) {
  double vlo = 0, vhi = 0, qlo = 0, qhi = 0;
  if (!t.nodes.empty()) {
    auto [a, b] = std::minmax_element(t.nodes.begin(), t.nodes.end(),
                                      [](const auto& x, const auto& y) { return x.value < y.value; });
    vlo = a->value;
    vhi = b->value;
  }
  if (!t.edges.empty()) {
    auto [a, b] = std::minmax_element(t.edges.begin(), t.edges.end(), [](const auto& x, const auto& y) { return x.q < y.q; });
    qlo = a->q;
    qhi = b->q;
  }
  std::ostringstream os;
  os << "digraph search_tree {\n";
  os << "  // color_scale: value normalized to [0,1] over the tree, 0 = blue, 1 = red\n";
  os << "  node [shape=circle, style=filled, fontcolor=white];\n";
  for (const auto& n : t.nodes) {
    const double c = normalize(n.value, vlo, vhi);
    os << "  n" << n.id << " [label=\"V=" << detail::fmt_double(n.value) << "\\nN=" << n.visits
       << "\", V=" << detail::fmt_double(n.value) << ", N=" << n.visits << ", depth=" << n.depth
       << ", terminal=" << (n.terminal ? 1 : 0) << ", color_value=" << detail::fmt_double(c) << ", fillcolor=\""
       << detail::color_hex(c) << "\"];\n";
  }
  for (const auto& e : t.edges) {
    const double c = normalize(e.q, qlo, qhi);
    os << "  n" << e.parent << " -> n" << e.child << " [label=\"" << e.action << "\\nQ=" << detail::fmt_double(e.q)
       << "\", action=\"" << e.action << "\", Q=" << detail::fmt_double(e.q) << ", N=" << e.visits
       << ", R=" << detail::fmt_double(e.reward) << ", color_value=" << detail::fmt_double(c) << ", color=\""
       << detail::color_hex(c) << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

/// Parsed form of a DOT file written by to_dot: numeric attributes per node
/// and edge, in file order.
struct DotGraph {
  struct Element {
    int from = -1;
    int to = -1;  // -1 for nodes
    std::map<std::string, double> attrs;
  };
  std::vector<Element> nodes;
  std::vector<Element> edges;
};

inline DotGraph parse_dot(const std::string& text) {
  static const std::regex node_re(R"(^\s*n(\d+)\s*\[(.*)\];\s*$)");
  static const std::regex edge_re(R"(^\s*n(\d+)\s*->\s*n(\d+)\s*\[(.*)\];\s*$)");
  DotGraph g;
  std::istringstream in(text);
  std::string line;
  auto attrs = [](const std::string& body) {
    std::map<std::string, double> out;
    // Quoted values are skipped; only bare numeric attributes are kept.
    std::string stripped;
    bool quoted = false;
    for (char c : body) {
      if (c == '"') quoted = !quoted;
      else if (!quoted) stripped += c;
    }
    std::istringstream parts(stripped);
    std::string part;
    while (std::getline(parts, part, ',')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) continue;
      std::string key = part.substr(0, eq);
      key.erase(0, key.find_first_not_of(' '));
      key.erase(key.find_last_not_of(' ') + 1);
      const std::string val = part.substr(eq + 1);
      try {
        std::size_t used = 0;
        const double v = std::stod(val, &used);
        if (val.find_first_not_of(' ', used) == std::string::npos) out[key] = v;
      } catch (const std::exception&) {
      }
    }
    return out;
  };
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, edge_re)) g.edges.push_back({std::stoi(m[1]), std::stoi(m[2]), attrs(m[3])});
    else if (std::regex_match(line, m, node_re)) g.nodes.push_back({std::stoi(m[1]), -1, attrs(m[2])});
  }
  return g;
}

inline void write_dot(const TreeSnapshot& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_dot(t);
}

}  // namespace wmnav
