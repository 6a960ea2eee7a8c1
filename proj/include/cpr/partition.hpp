#pragma once

// Turns a dependency matrix into a weighted bipartite token graph, co-clusters
// it, and keeps the densest co-clusters as the explanation.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpr/causal.hpp"
#include "cpr/error.hpp"
#include "cpr/spectral.hpp"

namespace cpr {

enum class NodeRole { buggy_code, comment, repaired_code };

inline std::string_view to_string(NodeRole r) {
  switch (r) {
    case NodeRole::buggy_code: return "buggy_code";
    case NodeRole::comment: return "comment";
    case NodeRole::repaired_code: return "repaired_code";
  }
  return "?";
}

inline std::string_view fill_color(NodeRole r) {
  switch (r) {
    case NodeRole::buggy_code: return "green";
    case NodeRole::comment: return "yellow";
    case NodeRole::repaired_code: return "blue";
  }
  return "white";
}

struct LeftNode {
  Token token;              // original input token (stream gives the role)
  std::size_t input_index;  // column in the dependency matrix
};

struct RightNode {
  std::string text;
  std::size_t output_index;
};

struct BipartiteEdge {
  std::size_t left;
  std::size_t right;
  double weight;
};

struct BipartiteGraph {
  std::vector<LeftNode> left;
  std::vector<RightNode> right;
  std::vector<BipartiteEdge> edges;
  bool empty_warning = false;

  bool empty() const noexcept { return edges.empty(); }

  Eigen::MatrixXd adjacency() const {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(left.size()),
                                              static_cast<Eigen::Index>(right.size()));
    for (const auto& e : edges)
      A(static_cast<Eigen::Index>(e.left), static_cast<Eigen::Index>(e.right)) = e.weight;
    return A;
  }

  NodeRole left_role(std::size_t i) const {
    return left[i].token.stream == Stream::code ? NodeRole::buggy_code : NodeRole::comment;
  }
};

/// Linear-interpolation quantile of an ascending-sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Clips W at zero and keeps the edges at or above the tau-quantile of the
/// positive weights. Isolated nodes are dropped.
inline BipartiteGraph build_bipartite(const DependencyMatrix& dep, double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) throw InvalidConfigError("tau must lie in [0, 1)");
  std::vector<double> positive;
  for (Eigen::Index r = 0; r < dep.W.rows(); ++r)
    for (Eigen::Index c = 0; c < dep.W.cols(); ++c)
      if (dep.W(r, c) > 0.0) positive.push_back(dep.W(r, c));
  BipartiteGraph g;
  if (positive.empty()) {
    g.empty_warning = true;
    return g;
  }
  std::sort(positive.begin(), positive.end());
  const double threshold = quantile_sorted(positive, tau);

  std::map<std::size_t, std::size_t> left_of, right_of;
  for (Eigen::Index r = 0; r < dep.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < dep.W.cols(); ++c) {
      const double w = dep.W(r, c);
      if (!(w > 0.0) || w < threshold) continue;
      const auto ri = static_cast<std::size_t>(r), ci = static_cast<std::size_t>(c);
      auto [li, lnew] = left_of.try_emplace(ri, g.left.size());
      if (lnew) g.left.push_back({dep.input_vocab[ri], ri});
      auto [oi, onew] = right_of.try_emplace(ci, g.right.size());
      if (onew) g.right.push_back({dep.output_vocab[ci], ci});
      g.edges.push_back({li->second, oi->second, w});
    }
  }
  return g;
}

/// Co-clusters a bipartite graph; rows are input tokens, columns outputs.
inline CoClustering spectral_coclusters(const BipartiteGraph& g, std::size_t k,
                                        std::uint64_t seed) {
  if (g.empty()) throw ValidationError("co-clustering needs a non-empty graph");
  return spectral_coclusters(g.adjacency(), k, seed);
}

/// Default cluster count: min(8, ceil(sqrt(min(|left|, |right|)))).
inline std::size_t default_cluster_count(const BipartiteGraph& g) {
  const auto m = std::min(g.left.size(), g.right.size());
  return std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m)))), 1, 8);
}

struct ExplanationNode {
  std::string text;
  NodeRole role;
  int cluster;  // canonical id, -1 when unclustered
  std::size_t source_index;  // input or output vocabulary index
};

struct ExplanationEdge {
  std::size_t from;  // node index (input side)
  std::size_t to;    // node index (repaired_code)
  double weight;
};

struct ClusterScore {
  std::size_t cluster;  // canonical id
  double density;
};

struct ExplanationGraph {
  std::vector<ExplanationNode> nodes;
  std::vector<ExplanationEdge> edges;
  std::vector<ClusterScore> selected_clusters;  // by descending density
  bool empty_warning = false;
};

namespace detail {

struct ScoredCluster {
  std::size_t id;
  double density;
  std::size_t left_size, right_size;
};

inline std::vector<ScoredCluster> score_clusters(const CoClustering& cc,
                                                 const BipartiteGraph& g) {
  std::vector<double> weight(cc.k, 0.0);
  std::vector<std::size_t> lsize(cc.k, 0), rsize(cc.k, 0);
  for (auto a : cc.row_assign) ++lsize[a];
  for (auto a : cc.col_assign) ++rsize[a];
  for (const auto& e : g.edges)
    if (cc.row_assign[e.left] == cc.col_assign[e.right]) weight[cc.row_assign[e.left]] += e.weight;
  std::vector<ScoredCluster> out;
  for (std::size_t c = 0; c < cc.k; ++c) {
    if (lsize[c] == 0 || rsize[c] == 0 || weight[c] <= 0.0) continue;
    out.push_back({c, weight[c] / static_cast<double>(lsize[c] * rsize[c]), lsize[c], rsize[c]});
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredCluster& a, const ScoredCluster& b) {
    return a.density > b.density;
  });
  return out;
}

}  // namespace detail

/// Scores each co-cluster by density = intra-cluster weight / (|left| |right|),
/// keeps the top K (ties to the lower id) and emits their intra-cluster edges.
/// Kept clusters are renumbered 0..K-1 by descending density.
inline ExplanationGraph select_explanation(const CoClustering& cc, const BipartiteGraph& g,
                                           std::size_t K) {
  if (K < 1) throw InvalidConfigError("K must be at least 1");
  if (cc.row_assign.size() != g.left.size() || cc.col_assign.size() != g.right.size())
    throw AlignmentError("co-clustering does not match graph");
  ExplanationGraph eg;
  auto scored = detail::score_clusters(cc, g);
  if (scored.size() > K) scored.resize(K);
  if (scored.empty()) {
    eg.empty_warning = true;
    return eg;
  }
  std::map<std::size_t, int> canonical;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    canonical[scored[i].id] = static_cast<int>(i);
    eg.selected_clusters.push_back({i, scored[i].density});
  }
  std::vector<std::optional<std::size_t>> left_node(g.left.size()), right_node(g.right.size());
  for (std::size_t i = 0; i < g.left.size(); ++i) {
    auto it = canonical.find(cc.row_assign[i]);
    if (it == canonical.end()) continue;
    left_node[i] = eg.nodes.size();
    eg.nodes.push_back({g.left[i].token.text, g.left_role(i), it->second, g.left[i].input_index});
  }
  for (std::size_t j = 0; j < g.right.size(); ++j) {
    auto it = canonical.find(cc.col_assign[j]);
    if (it == canonical.end()) continue;
    right_node[j] = eg.nodes.size();
    eg.nodes.push_back({g.right[j].text, NodeRole::repaired_code, it->second,
                        g.right[j].output_index});
  }
  for (const auto& e : g.edges) {
    if (cc.row_assign[e.left] != cc.col_assign[e.right]) continue;
    if (!left_node[e.left] || !right_node[e.right]) continue;
    eg.edges.push_back({*left_node[e.left], *right_node[e.right], e.weight});
  }
  return eg;
}

/// The whole graph before selection; nodes carry canonical cluster ids when
/// a co-clustering is given (clusters without intra edges get -1).
inline ExplanationGraph raw_dependency_graph(const BipartiteGraph& g,
                                             const CoClustering* cc = nullptr) {
  ExplanationGraph eg;
  eg.empty_warning = g.empty();
  std::map<std::size_t, int> canonical;
  if (cc) {
    auto scored = detail::score_clusters(*cc, g);
    for (std::size_t i = 0; i < scored.size(); ++i) {
      canonical[scored[i].id] = static_cast<int>(i);
      eg.selected_clusters.push_back({i, scored[i].density});
    }
  }
  auto cluster_of = [&](std::size_t raw) {
    auto it = canonical.find(raw);
    return it == canonical.end() ? -1 : it->second;
  };
  for (std::size_t i = 0; i < g.left.size(); ++i)
    eg.nodes.push_back({g.left[i].token.text, g.left_role(i),
                        cc ? cluster_of(cc->row_assign[i]) : -1, g.left[i].input_index});
  for (std::size_t j = 0; j < g.right.size(); ++j)
    eg.nodes.push_back({g.right[j].text, NodeRole::repaired_code,
                        cc ? cluster_of(cc->col_assign[j]) : -1, g.right[j].output_index});
  for (const auto& e : g.edges) eg.edges.push_back({e.left, g.left.size() + e.right, e.weight});
  return eg;
}

inline nlohmann::ordered_json to_json(const ExplanationGraph& eg) {
  nlohmann::ordered_json j;
  auto nodes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < eg.nodes.size(); ++i) {
    const auto& n = eg.nodes[i];
    nodes.push_back({{"id", i},
                     {"text", n.text},
                     {"role", to_string(n.role)},
                     {"color", fill_color(n.role)},
                     {"cluster", n.cluster},
                     {"source_index", n.source_index}});
  }
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : eg.edges)
    edges.push_back({{"from", e.from}, {"to", e.to}, {"weight", e.weight}});
  auto clusters = nlohmann::ordered_json::array();
  for (const auto& c : eg.selected_clusters)
    clusters.push_back({{"cluster", c.cluster}, {"density", c.density}});
  j["nodes"] = nodes;
  j["edges"] = edges;
  j["selected_clusters"] = clusters;
  j["warning"] = eg.empty_warning ? nlohmann::ordered_json("empty explanation")
                                  : nlohmann::ordered_json(nullptr);
  return j;
}

namespace detail {

inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

/// Graphviz rendering: filled circles colored by role, gray edges whose pen
/// width scales with weight, one subgraph cluster per selected co-cluster.
inline std::string to_dot(const ExplanationGraph& eg, std::string_view name = "explanation") {
  std::ostringstream o;
  o << "graph " << detail::dot_quote(name) << " {\n";
  o << "  rankdir=LR;\n  node [shape=circle];\n";
  double max_w = 0.0;
  for (const auto& e : eg.edges) max_w = std::max(max_w, e.weight);
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < eg.nodes.size(); ++i) members[eg.nodes[i].cluster].push_back(i);
  auto emit_node = [&](std::size_t i, std::string_view indent) {
    const auto& n = eg.nodes[i];
    o << indent << 'n' << i << " [label=" << detail::dot_quote(n.text)
      << ", style=filled, fillcolor=" << fill_color(n.role) << "];\n";
  };
  for (const auto& [cluster, ids] : members) {
    if (cluster < 0) {
      for (auto i : ids) emit_node(i, "  ");
      continue;
    }
    double density = 0.0;
    for (const auto& c : eg.selected_clusters)
      if (static_cast<int>(c.cluster) == cluster) density = c.density;
    o << "  subgraph cluster_" << cluster << " {\n";
    o << "    label=" << detail::dot_quote("cluster " + std::to_string(cluster)) << ";\n";
    o << "    tooltip=" << detail::dot_quote("density " + std::to_string(density)) << ";\n";
    for (auto i : ids) emit_node(i, "    ");
    o << "  }\n";
  }
  char buf[32];
  for (const auto& e : eg.edges) {
    const double pen = 1.0 + 4.0 * (max_w > 0 ? e.weight / max_w : 0.0);
    std::snprintf(buf, sizeof buf, "%.3f", pen);
    o << "  n" << e.from << " -- n" << e.to << " [color=gray, penwidth=" << buf << "];\n";
  }
  o << "}\n";
  return o.str();
}

}  // namespace cpr
