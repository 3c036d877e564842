#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "temcgl/matrix.hpp"
#include "temcgl/sparse.hpp"

namespace temcgl {

enum class Split : std::uint8_t { kTrain, kValid, kTest };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& token) {
  if (token == "train") return Split::kTrain;
  if (token == "valid") return Split::kValid;
  if (token == "test") return Split::kTest;
  throw std::invalid_argument("unknown split token '" + token + "'");
}

/// Undirected, unweighted graph with node features, labels and split masks.
///
/// Adjacency is stored symmetrically in CSR form with strictly sorted
/// columns per row and no self-loops. Immutable after construction.
class Graph {
 public:
  Graph() = default;

  /// Takes a prepared CSR pattern and validates every structural invariant.
  Graph(std::vector<std::size_t> row_ptr, std::vector<NodeId> col, Matrix features,
        std::vector<ClassId> labels, std::vector<Split> split, std::size_t num_classes)
      : row_ptr_(std::move(row_ptr)),
        col_(std::move(col)),
        features_(std::move(features)),
        labels_(std::move(labels)),
        split_(std::move(split)),
        num_classes_(num_classes) {
    validate();
  }

  /// Builds a graph from an arbitrary edge list: directed pairs are
  /// symmetrized, duplicates merged and self-loops discarded.
  static Graph from_edges(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
                          Matrix features, std::vector<ClassId> labels, std::vector<Split> split,
                          std::size_t num_classes) {
    std::vector<std::vector<NodeId>> adj(num_nodes);
    for (auto [u, v] : edges) {
      if (u >= num_nodes || v >= num_nodes) {
        throw std::out_of_range("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                ") references a node outside [0, " + std::to_string(num_nodes) +
                                ")");
      }
      if (u == v) continue;
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    std::vector<std::size_t> row_ptr(num_nodes + 1, 0);
    std::vector<NodeId> col;
    for (std::size_t u = 0; u < num_nodes; ++u) {
      auto& nb = adj[u];
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      col.insert(col.end(), nb.begin(), nb.end());
      row_ptr[u + 1] = col.size();
    }
    return Graph(std::move(row_ptr), std::move(col), std::move(features), std::move(labels),
                 std::move(split), num_classes);
  }

  std::size_t num_nodes() const { return row_ptr_.size() - 1; }
  /// Number of undirected edges.
  std::size_t num_edges() const { return col_.size() / 2; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t feature_dim() const { return features_.cols(); }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {col_.data() + row_ptr_[v], row_ptr_[v + 1] - row_ptr_[v]};
  }
  std::size_t degree(NodeId v) const { return row_ptr_[v + 1] - row_ptr_[v]; }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<NodeId>& col() const { return col_; }
  const Matrix& features() const { return features_; }
  const std::vector<ClassId>& labels() const { return labels_; }
  ClassId label(NodeId v) const { return labels_[v]; }
  const std::vector<Split>& split() const { return split_; }
  Split split(NodeId v) const { return split_[v]; }

  /// Same nodes, features and labels, keeping only edges accepted by `keep(u, v)`.
  Graph filter_edges(const std::function<bool(NodeId, NodeId)>& keep) const {
    std::vector<std::size_t> row_ptr(num_nodes() + 1, 0);
    std::vector<NodeId> col;
    col.reserve(col_.size());
    for (NodeId u = 0; u < num_nodes(); ++u) {
      for (NodeId v : neighbors(u)) {
        if (keep(std::min(u, v), std::max(u, v))) col.push_back(v);
      }
      row_ptr[u + 1] = col.size();
    }
    return Graph(std::move(row_ptr), std::move(col), features_, labels_, split_, num_classes_);
  }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  void validate() const {
    const std::size_t n = row_ptr_.empty() ? 0 : row_ptr_.size() - 1;
    if (row_ptr_.empty() || row_ptr_.front() != 0 || row_ptr_.back() != col_.size()) {
      throw std::invalid_argument("Graph: malformed CSR row pointers");
    }
    for (std::size_t u = 0; u < n; ++u) {
      if (row_ptr_[u + 1] < row_ptr_[u]) {
        throw std::invalid_argument("Graph: row pointers decrease at row " + std::to_string(u));
      }
      for (std::size_t j = row_ptr_[u]; j < row_ptr_[u + 1]; ++j) {
        if (col_[j] >= n) throw std::invalid_argument("Graph: column index out of range");
        if (col_[j] == u) throw std::invalid_argument("Graph: raw graph contains a self-loop");
        if (j > row_ptr_[u] && col_[j] <= col_[j - 1]) {
          throw std::invalid_argument("Graph: columns not strictly sorted in row " +
                                      std::to_string(u));
        }
      }
    }
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t j = row_ptr_[u]; j < row_ptr_[u + 1]; ++j) {
        auto nb = neighbors(col_[j]);
        if (!std::binary_search(nb.begin(), nb.end(), static_cast<NodeId>(u))) {
          throw std::invalid_argument("Graph: adjacency is not symmetric");
        }
      }
    }
    if (features_.rows() != n) {
      throw std::invalid_argument("Graph: feature rows (" + std::to_string(features_.rows()) +
                                  ") != num_nodes (" + std::to_string(n) + ")");
    }
    if (labels_.size() != n) throw std::invalid_argument("Graph: label count != num_nodes");
    if (split_.size() != n) throw std::invalid_argument("Graph: split count != num_nodes");
    for (ClassId y : labels_) {
      if (y >= num_classes_) throw std::invalid_argument("Graph: label outside [0, num_classes)");
    }
  }

  std::vector<std::size_t> row_ptr_{0};
  std::vector<NodeId> col_;
  Matrix features_;
  std::vector<ClassId> labels_;
  std::vector<Split> split_;
  std::size_t num_classes_ = 0;
};

/// Symmetric-normalized adjacency D^{-1/2} (A [+ I]) D^{-1/2}.
struct NormalizedAdjacency {
  CsrMatrix matrix;
  bool self_loops_added = false;
  /// Degree used for normalization (including the self-loop when added).
  std::vector<double> degree;

  std::size_t size() const { return matrix.n_rows; }
};

inline NormalizedAdjacency normalize_adjacency(const Graph& g, bool add_self_loops) {
  const std::size_t n = g.num_nodes();
  NormalizedAdjacency out;
  out.self_loops_added = add_self_loops;
  out.degree.resize(n);
  std::vector<double> inv_sqrt(n, 0.0);
  for (NodeId v = 0; v < n; ++v) {
    out.degree[v] = static_cast<double>(g.degree(v) + (add_self_loops ? 1 : 0));
    inv_sqrt[v] = out.degree[v] > 0.0 ? 1.0 / std::sqrt(out.degree[v]) : 0.0;
  }
  CsrMatrix& m = out.matrix;
  m.n_rows = m.n_cols = n;
  m.row_ptr.assign(n + 1, 0);
  m.col.reserve(g.col().size() + (add_self_loops ? n : 0));
  m.val.reserve(m.col.capacity());
  for (NodeId u = 0; u < n; ++u) {
    bool diag_done = !add_self_loops;
    for (NodeId v : g.neighbors(u)) {
      if (!diag_done && v > u) {
        m.col.push_back(u);
        m.val.push_back(inv_sqrt[u] * inv_sqrt[u]);
        diag_done = true;
      }
      m.col.push_back(v);
      m.val.push_back(inv_sqrt[u] * inv_sqrt[v]);
    }
    if (!diag_done) {
      m.col.push_back(u);
      m.val.push_back(inv_sqrt[u] * inv_sqrt[u]);
    }
    m.row_ptr[u + 1] = m.col.size();
  }
  return out;
}

/// Nodes reachable from `v` within `hops` steps over a CSR pattern, sorted ascending.
inline std::vector<NodeId> bfs_ball(std::span<const std::size_t> row_ptr, std::span<const NodeId> col,
                                    NodeId v, std::size_t hops) {
  const std::size_t n = row_ptr.size() - 1;
  if (v >= n) {
    throw std::out_of_range("node " + std::to_string(v) + " outside [0, " + std::to_string(n) + ")");
  }
  std::vector<std::size_t> dist(n, static_cast<std::size_t>(-1));
  std::vector<NodeId> seen{v};
  std::deque<NodeId> frontier{v};
  dist[v] = 0;
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop_front();
    if (dist[u] == hops) continue;
    for (std::size_t j = row_ptr[u]; j < row_ptr[u + 1]; ++j) {
      NodeId w = col[j];
      if (dist[w] != static_cast<std::size_t>(-1)) continue;
      dist[w] = dist[u] + 1;
      seen.push_back(w);
      frontier.push_back(w);
    }
  }
  std::sort(seen.begin(), seen.end());
  return seen;
}

/// The node set of v's L-hop computation ego-subnetwork (v included).
inline std::vector<NodeId> l_hop_neighborhood(const Graph& g, NodeId v, std::size_t hops) {
  return bfs_ball(g.row_ptr(), g.col(), v, hops);
}

/// Fraction of undirected edges whose endpoints share a label.
inline double homophily_ratio(const Graph& g) {
  if (g.num_edges() == 0) {
    throw std::domain_error("homophily_ratio: graph has no edges");
  }
  std::size_t same = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    for (NodeId v : g.neighbors(u)) {
      if (v > u && g.label(u) == g.label(v)) ++same;
    }
  }
  return static_cast<double>(same) / static_cast<double>(g.num_edges());
}

}  // namespace temcgl
