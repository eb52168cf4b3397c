#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include "graphattacker/matrix.hpp"

namespace gat {

enum class AttributeKind { binary, continuous };

// Undirected, unweighted graph with node attributes and optional node labels.
// Edges are stored once as (i, j) with i < j; the diagonal is never stored.
// Instances are immutable after construction.
class Graph {
 public:
  Graph() = default;

  // Canonicalizes the edge list: symmetrizes, drops self pairs, dedupes.
  static Graph from_edges(int n, std::vector<std::pair<int, int>> edges,
                          DenseMatrix attributes = {},
                          AttributeKind kind = AttributeKind::binary,
                          std::vector<int> node_labels = {}) {
    Graph g;
    g.n_ = n;
    if (n < 0) throw ContractError("Graph: negative node count");
    for (auto& [a, b] : edges) {
      if (a < 0 || a >= n || b < 0 || b >= n)
        throw DatasetError("Graph: node id out of range");
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      g.edges_.emplace_back(a, b);
    }
    std::sort(g.edges_.begin(), g.edges_.end());
    g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());

    if (attributes.rows == 0 && attributes.cols == 0) {
      attributes = identity_matrix(n);
      kind = AttributeKind::binary;
    }
    if (attributes.rows != n) throw ContractError("Graph: attribute row count != n");
    if (kind == AttributeKind::binary) {
      for (double v : attributes.data)
        if (v != 0.0 && v != 1.0)
          throw ContractError("Graph: binary attributes must be 0/1");
    }
    g.attributes_ = std::move(attributes);
    g.kind_ = kind;
    if (!node_labels.empty() && static_cast<int>(node_labels.size()) != n)
      throw ContractError("Graph: label count != n");
    g.labels_ = std::move(node_labels);
    g.build_neighbors();
    return g;
  }

  int n() const { return n_; }
  int attribute_dim() const { return attributes_.cols; }
  const DenseMatrix& attributes() const { return attributes_; }
  AttributeKind attribute_kind() const { return kind_; }
  bool has_labels() const { return !labels_.empty(); }
  const std::vector<int>& node_labels() const { return labels_; }
  int label_of(int v) const { return labels_.at(v); }
  int num_classes() const {
    int c = 0;
    for (int l : labels_) c = std::max(c, l + 1);
    return c;
  }

  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<int>& neighbors(int v) const { return neighbors_.at(v); }
  int degree(int v) const { return static_cast<int>(neighbors_.at(v).size()); }

  bool has_edge(int a, int b) const {
    if (a == b) return false;
    const auto& nb = neighbors_.at(a);
    return std::binary_search(nb.begin(), nb.end(), b);
  }

  DenseMatrix dense_adjacency() const {
    DenseMatrix a(n_, n_);
    for (const auto& [i, j] : edges_) {
      a(i, j) = 1.0;
      a(j, i) = 1.0;
    }
    return a;
  }

 private:
  void build_neighbors() {
    neighbors_.assign(n_, {});
    for (const auto& [i, j] : edges_) {
      neighbors_[i].push_back(j);
      neighbors_[j].push_back(i);
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
  }

  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> neighbors_;
  DenseMatrix attributes_;
  AttributeKind kind_ = AttributeKind::binary;
  std::vector<int> labels_;
};

// Ordered collection of graphs with one label per graph.
struct GraphSet {
  std::vector<Graph> graphs;
  std::vector<int> graph_labels;
  int num_classes = 0;

  void validate() const {
    if (graphs.size() != graph_labels.size())
      throw DatasetError("GraphSet: graph/label count mismatch");
    for (int l : graph_labels)
      if (l < 0 || l >= num_classes) throw DatasetError("GraphSet: label out of range");
  }
};

// Train/validation/test id lists; ids are nodes, graphs, or link-sample
// indices depending on the task.
struct LabeledSplit {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
};

struct LinkSample {
  std::vector<std::pair<int, int>> positives;
  std::vector<std::pair<int, int>> negatives;
};

enum class AugmentationMode { none, random_other_class, high_similarity };

// A K-hop induced subgraph plus the index map back into its parent.
// parent_index is ascending over the BFS ball, then ascending over any
// augmentation nodes appended after it.
struct SubgraphView {
  Graph sub;
  std::vector<int> parent_index;
  std::vector<int> target_local;
  AugmentationMode augmentation = AugmentationMode::none;
  int ball_size = 0;  // nodes found by BFS, before augmentation
  bool augmentation_fallback = false;

  int local_of_parent(int parent_id) const {
    for (std::size_t i = 0; i < parent_index.size(); ++i)
      if (parent_index[i] == parent_id) return static_cast<int>(i);
    throw ContractError("SubgraphView: parent id not in view");
  }
};

// ---------------------------------------------------------------------------
// Operations

inline std::vector<int> degree_sequence(const Graph& g) {
  std::vector<int> d(g.n(), 0);
  for (int v = 0; v < g.n(); ++v) d[v] = g.degree(v);
  return d;
}

// A_hat = D~^{-1/2} (A + I) D~^{-1/2} as a dense matrix.
inline DenseMatrix normalize_adjacency(const Graph& g) {
  const int n = g.n();
  std::vector<double> inv_sqrt(n);
  for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(1.0 + g.degree(i));
  DenseMatrix a(n, n);
  for (int i = 0; i < n; ++i) a(i, i) = inv_sqrt[i] * inv_sqrt[i];
  for (const auto& [i, j] : g.edges()) {
    const double w = inv_sqrt[i] * inv_sqrt[j];
    a(i, j) = w;
    a(j, i) = w;
  }
  return a;
}

// Same normalization applied to an arbitrary nonnegative dense matrix with
// zero diagonal (the continuous adjacency produced by the generator).
inline DenseMatrix normalize_dense_adjacency(const DenseMatrix& a) {
  if (a.rows != a.cols) throw ContractError("normalize_dense_adjacency: not square");
  const int n = a.rows;
  std::vector<double> inv_sqrt(n);
  for (int i = 0; i < n; ++i) {
    double d = 1.0;
    for (int j = 0; j < n; ++j) d += a(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(d);
  }
  DenseMatrix out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double tij = a(i, j) + (i == j ? 1.0 : 0.0);
      out(i, j) = tij * inv_sqrt[i] * inv_sqrt[j];
    }
  }
  return out;
}

// Sparse counterpart for parent-scale graphs: row-compressed (index, weight)
// pairs of A_hat, self-loops included.
struct SparseNormAdj {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> rows;

  static SparseNormAdj build(const Graph& g) {
    SparseNormAdj s;
    s.n = g.n();
    s.rows.assign(s.n, {});
    std::vector<double> inv_sqrt(s.n);
    for (int i = 0; i < s.n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(1.0 + g.degree(i));
    for (int i = 0; i < s.n; ++i) s.rows[i].emplace_back(i, inv_sqrt[i] * inv_sqrt[i]);
    for (const auto& [i, j] : g.edges()) {
      const double w = inv_sqrt[i] * inv_sqrt[j];
      s.rows[i].emplace_back(j, w);
      s.rows[j].emplace_back(i, w);
    }
    return s;
  }

  // out = A_hat * m   (A_hat is symmetric, so this also covers the transpose)
  DenseMatrix multiply(const DenseMatrix& m) const {
    if (m.rows != n) throw ContractError("SparseNormAdj::multiply: row mismatch");
    DenseMatrix out(n, m.cols);
    for (int i = 0; i < n; ++i) {
      double* orow = &out.data[static_cast<std::size_t>(i) * m.cols];
      for (const auto& [j, w] : rows[i]) {
        const double* mrow = &m.data[static_cast<std::size_t>(j) * m.cols];
        for (int c = 0; c < m.cols; ++c) orow[c] += w * mrow[c];
      }
    }
    return out;
  }
};

// Multi-source BFS distance (in hops) from the given sources, -1 = unreachable.
inline std::vector<int> bfs_hops(const Graph& g, const std::vector<int>& sources) {
  std::vector<int> dist(g.n(), -1);
  std::queue<int> q;
  for (int s : sources) {
    if (s < 0 || s >= g.n()) throw ContractError("bfs_hops: source out of range");
    if (dist[s] == 0) continue;
    dist[s] = 0;
    q.push(s);
  }
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int u : g.neighbors(v)) {
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        q.push(u);
      }
    }
  }
  return dist;
}

namespace detail {

inline Graph induced_subgraph(const Graph& g, const std::vector<int>& nodes) {
  const int m = static_cast<int>(nodes.size());
  std::vector<int> local(g.n(), -1);
  for (int i = 0; i < m; ++i) local[nodes[i]] = i;
  std::vector<std::pair<int, int>> edges;
  for (const auto& [a, b] : g.edges()) {
    if (local[a] >= 0 && local[b] >= 0) edges.emplace_back(local[a], local[b]);
  }
  DenseMatrix attrs(m, g.attribute_dim());
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < g.attribute_dim(); ++c) attrs(i, c) = g.attributes()(nodes[i], c);
  std::vector<int> labels;
  if (g.has_labels()) {
    labels.resize(m);
    for (int i = 0; i < m; ++i) labels[i] = g.label_of(nodes[i]);
  }
  return Graph::from_edges(m, std::move(edges), std::move(attrs), g.attribute_kind(),
                           std::move(labels));
}

}  // namespace detail

// Similarity provider used by high-similarity augmentation: (target, candidate)
// -> similarity score. Supplied by the caller from clean embeddings.
using SimilarityProvider = std::function<double(int, int)>;

// Builds the K-hop subgraph around the targets, optionally augmented with
// ceil(0.2 * ball size) extra parent nodes. Augmented nodes keep their parent
// attributes and all induced links to other members of the view.
inline SubgraphView k_hop_subgraph(const Graph& g, const std::vector<int>& targets, int k_hops,
                                   AugmentationMode augmentation, Rng& rng,
                                   const SimilarityProvider& sim = {}) {
  if (targets.empty()) throw ContractError("k_hop_subgraph: no targets");
  if (k_hops < 1) throw ContractError("k_hop_subgraph: K must be >= 1");
  if (augmentation == AugmentationMode::high_similarity && !sim)
    throw ContractError("k_hop_subgraph: high_similarity needs a similarity provider");

  const std::vector<int> dist = bfs_hops(g, targets);
  std::vector<int> ball;
  std::vector<char> in_view(g.n(), 0);
  for (int v = 0; v < g.n(); ++v)
    if (dist[v] >= 0 && dist[v] <= k_hops) {
      ball.push_back(v);
      in_view[v] = 1;
    }

  SubgraphView view;
  view.augmentation = augmentation;
  view.ball_size = static_cast<int>(ball.size());

  std::vector<int> extra;
  if (augmentation != AugmentationMode::none) {
    const int want = static_cast<int>(std::ceil(0.2 * static_cast<double>(ball.size())));
    std::vector<int> pool;
    if (augmentation == AugmentationMode::random_other_class) {
      if (!g.has_labels())
        throw ContractError("k_hop_subgraph: random_other_class needs node labels");
      const int target_label = g.label_of(targets.front());
      for (int v = 0; v < g.n(); ++v)
        if (!in_view[v] && g.label_of(v) != target_label) pool.push_back(v);
    } else {
      for (int v = 0; v < g.n(); ++v) {
        if (in_view[v]) continue;
        double best = -1.0;
        for (int t : targets) best = std::max(best, sim(t, v));
        if (best > 0.9) pool.push_back(v);
      }
      if (pool.empty()) {
        view.augmentation = AugmentationMode::none;
        view.augmentation_fallback = true;
      }
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    const int take = std::min<int>(want, static_cast<int>(pool.size()));
    extra.assign(pool.begin(), pool.begin() + take);
    std::sort(extra.begin(), extra.end());
  }

  std::vector<int> nodes = ball;
  nodes.insert(nodes.end(), extra.begin(), extra.end());
  view.parent_index = nodes;
  view.sub = detail::induced_subgraph(g, nodes);
  for (int t : targets) view.target_local.push_back(view.local_of_parent(t));
  return view;
}

// Writes adv_sub back into g over the view's footprint: every adjacency entry
// with both endpoints in the view and every attribute row of a view node is
// replaced; everything outside is untouched.
inline Graph splice_subgraph(const Graph& g, const SubgraphView& view, const Graph& adv_sub) {
  const int m = static_cast<int>(view.parent_index.size());
  if (adv_sub.n() != m || adv_sub.attribute_dim() != g.attribute_dim())
    throw ContractError("splice_subgraph: shape mismatch");

  std::vector<char> in_view(g.n(), 0);
  for (int p : view.parent_index) in_view[p] = 1;

  std::vector<std::pair<int, int>> edges;
  for (const auto& [a, b] : g.edges())
    if (!(in_view[a] && in_view[b])) edges.emplace_back(a, b);
  for (const auto& [a, b] : adv_sub.edges())
    edges.emplace_back(view.parent_index[a], view.parent_index[b]);

  DenseMatrix attrs = g.attributes();
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < g.attribute_dim(); ++c)
      attrs(view.parent_index[i], c) = adv_sub.attributes()(i, c);

  AttributeKind kind = g.attribute_kind();
  if (kind == AttributeKind::binary)
    for (double v : attrs.data)
      if (v != 0.0 && v != 1.0) kind = AttributeKind::continuous;

  std::vector<int> labels = g.node_labels();
  return Graph::from_edges(g.n(), std::move(edges), std::move(attrs), kind, std::move(labels));
}

}  // namespace gat
