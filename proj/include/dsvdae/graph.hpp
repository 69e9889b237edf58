#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dsvdae/sparse.hpp"
#include "dsvdae/tensor.hpp"

namespace dsvdae {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected attributed graph. Edges are stored once per unordered pair as (u, v)
/// with u < v, sorted ascending. Immutable once built.
class Graph {
 public:
  Graph() = default;

  std::size_t n_nodes() const { return n_nodes_; }
  std::size_t n_attrs() const { return static_cast<std::size_t>(attributes_.cols()); }
  std::size_t n_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Tensor2& attributes() const { return attributes_; }
  const std::vector<int>& labels() const { return labels_; }

  /// Symmetric adjacency in CSR form with unit weights, no self-loops.
  const SparseMatrix& adjacency() const { return adjacency_; }

  friend Graph build_graph(std::size_t, const std::vector<Edge>&, Tensor2, std::vector<int>);

 private:
  std::size_t n_nodes_ = 0;
  std::vector<Edge> edges_;
  Tensor2 attributes_;
  std::vector<int> labels_;
  SparseMatrix adjacency_;
};

/// Canonicalizes an edge list (orders endpoints, drops duplicates and self-loops)
/// and validates it against the attribute matrix. `labels` may be empty, in which
/// case every node gets class 0.
inline Graph build_graph(std::size_t n_nodes, const std::vector<Edge>& edge_list, Tensor2 attributes,
                         std::vector<int> labels = {}) {
  require(static_cast<std::size_t>(attributes.rows()) == n_nodes,
          "build_graph: attribute rows (" + std::to_string(attributes.rows()) + ") != node count (" +
              std::to_string(n_nodes) + ")");
  require(attributes.allFinite(), "build_graph: attributes must be finite");
  if (labels.empty()) labels.assign(n_nodes, 0);
  require(labels.size() == n_nodes, "build_graph: label count != node count");

  std::vector<Edge> edges;
  edges.reserve(edge_list.size());
  for (std::size_t i = 0; i < edge_list.size(); ++i) {
    auto [u, v] = edge_list[i];
    if (u >= n_nodes || v >= n_nodes) {
      throw InvalidArgument("build_graph: edge " + std::to_string(i) + " (" + std::to_string(u) + "," +
                            std::to_string(v) + ") has an endpoint outside [0," + std::to_string(n_nodes) + ")");
    }
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    edges.emplace_back(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  Graph g;
  g.n_nodes_ = n_nodes;
  g.edges_ = std::move(edges);
  g.attributes_ = std::move(attributes);
  g.labels_ = std::move(labels);

  std::vector<std::vector<std::size_t>> nbrs(n_nodes);
  for (const auto& [u, v] : g.edges_) {
    nbrs[u].push_back(v);
    nbrs[v].push_back(u);
  }
  SparseMatrix& a = g.adjacency_;
  a.rows = a.cols = n_nodes;
  a.row_offsets.assign(1, 0);
  for (auto& row : nbrs) {
    std::sort(row.begin(), row.end());
    for (std::size_t c : row) {
      a.col_indices.push_back(c);
      a.values.push_back(1.0);
    }
    a.row_offsets.push_back(a.values.size());
  }
  return g;
}

/// d_i = sum_j A_ij, plus one when self-loops are included.
inline Vector degree_vector(const Graph& g, bool self_loops) {
  Vector d(static_cast<Eigen::Index>(g.n_nodes()));
  const auto& a = g.adjacency();
  for (std::size_t i = 0; i < g.n_nodes(); ++i) {
    d(static_cast<Eigen::Index>(i)) =
        static_cast<double>(a.row_offsets[i + 1] - a.row_offsets[i]) + (self_loops ? 1.0 : 0.0);
  }
  return d;
}

/// D^{-1/2} A D^{-1/2}, with A (and D) optionally including self-loops. Degrees
/// below one are clamped to one, so isolated nodes never divide by zero.
inline SparseMatrix normalized_adjacency(const Graph& g, bool self_loops) {
  const std::size_t n = g.n_nodes();
  const Vector deg = degree_vector(g, self_loops);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = std::max(1.0, deg(static_cast<Eigen::Index>(i)));
  // integer degrees, so d_r * d_c is exact and the entry is symmetric
  const auto entry = [&](std::size_t r, std::size_t c) { return 1.0 / std::sqrt(d[r] * d[c]); };

  const SparseMatrix& a = g.adjacency();
  SparseMatrix out;
  out.rows = out.cols = n;
  out.row_offsets.assign(1, 0);
  out.col_indices.reserve(a.nnz() + (self_loops ? n : 0));
  out.values.reserve(a.nnz() + (self_loops ? n : 0));
  for (std::size_t r = 0; r < n; ++r) {
    bool diag_done = !self_loops;
    for (std::size_t k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k) {
      const std::size_t c = a.col_indices[k];
      if (!diag_done && c > r) {
        out.col_indices.push_back(r);
        out.values.push_back(entry(r, r));
        diag_done = true;
      }
      out.col_indices.push_back(c);
      out.values.push_back(entry(r, c));
    }
    if (!diag_done) {
      out.col_indices.push_back(r);
      out.values.push_back(entry(r, r));
    }
    out.row_offsets.push_back(out.values.size());
  }
  return out;
}

/// Subgraph induced by `nodes` (renumbered 0..k-1 in the given order).
inline Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& nodes) {
  std::vector<std::size_t> remap(g.n_nodes(), g.n_nodes());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    require(nodes[i] < g.n_nodes(), "induced_subgraph: node index out of range");
    require(remap[nodes[i]] == g.n_nodes(), "induced_subgraph: duplicate node index");
    remap[nodes[i]] = i;
  }
  std::vector<Edge> edges;
  for (const auto& [u, v] : g.edges()) {
    if (remap[u] != g.n_nodes() && remap[v] != g.n_nodes()) edges.emplace_back(remap[u], remap[v]);
  }
  std::vector<int> labels(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) labels[i] = g.labels()[nodes[i]];
  return build_graph(nodes.size(), edges, gather_rows(g.attributes(), nodes), std::move(labels));
}

/// Dense 0/1 adjacency restricted to `rows` x `rows` (all nodes when `rows` is empty).
inline Tensor2 dense_adjacency(const Graph& g, const std::vector<std::size_t>& rows = {}) {
  if (rows.empty()) return g.adjacency().to_dense();
  std::vector<std::size_t> remap(g.n_nodes(), g.n_nodes());
  for (std::size_t i = 0; i < rows.size(); ++i) remap[rows[i]] = i;
  const auto k = static_cast<Eigen::Index>(rows.size());
  Tensor2 out = Tensor2::Zero(k, k);
  for (const auto& [u, v] : g.edges()) {
    if (remap[u] != g.n_nodes() && remap[v] != g.n_nodes()) {
      out(static_cast<Eigen::Index>(remap[u]), static_cast<Eigen::Index>(remap[v])) = 1.0;
      out(static_cast<Eigen::Index>(remap[v]), static_cast<Eigen::Index>(remap[u])) = 1.0;
    }
  }
  return out;
}

}  // namespace dsvdae
