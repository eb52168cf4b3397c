#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "graphattacker/graph.hpp"

using namespace gat;

namespace {

Graph random_graph(int n, double p, Rng& rng, bool with_labels = false, int classes = 2) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (coin(rng) < p) edges.emplace_back(i, j);
  std::vector<int> labels;
  if (with_labels) {
    std::uniform_int_distribution<int> lab(0, classes - 1);
    labels.resize(n);
    for (int& l : labels) l = lab(rng);
  }
  return Graph::from_edges(n, std::move(edges), {}, AttributeKind::binary, std::move(labels));
}

bool graphs_identical(const Graph& a, const Graph& b) {
  return a.n() == b.n() && a.edges() == b.edges() && a.attributes() == b.attributes() &&
         a.node_labels() == b.node_labels();
}

}  // namespace

TEST(GraphCore, EdgeCanonicalization) {
  // "0 1", "1 0", "1 1" collapses to a single undirected edge, no self loop.
  const Graph g = Graph::from_edges(2, {{0, 1}, {1, 0}, {1, 1}});
  ASSERT_EQ(g.edge_count(), 1);
  EXPECT_EQ(g.edges()[0], (std::pair<int, int>{0, 1}));
  EXPECT_FALSE(g.has_edge(1, 1));
}

TEST(GraphCore, IdentityAttributeFallback) {
  const Graph g = Graph::from_edges(3, {{0, 1}});
  EXPECT_EQ(g.attribute_dim(), 3);
  EXPECT_EQ(g.attributes(), identity_matrix(3));
}

TEST(GraphCore, DegreeSequence) {
  EXPECT_EQ(degree_sequence(Graph::from_edges(2, {{0, 1}})), (std::vector<int>{1, 1}));
  EXPECT_EQ(degree_sequence(Graph::from_edges(3, {})), (std::vector<int>{0, 0, 0}));
  const Graph star = Graph::from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  EXPECT_EQ(degree_sequence(star), (std::vector<int>{4, 1, 1, 1, 1}));
}

TEST(NormalizeAdjacency, SingleNode) {
  const DenseMatrix a = normalize_adjacency(Graph::from_edges(1, {}));
  EXPECT_DOUBLE_EQ(a(0, 0), 1.0);
}

TEST(NormalizeAdjacency, TwoNodeEdge) {
  const DenseMatrix a = normalize_adjacency(Graph::from_edges(2, {{0, 1}}));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(a(i, j), 0.5, 1e-12);
}

TEST(NormalizeAdjacency, PathGraph) {
  // degrees with self loops: diag(2,3,2)
  const DenseMatrix a = normalize_adjacency(Graph::from_edges(3, {{0, 1}, {1, 2}}));
  EXPECT_NEAR(a(0, 1), 1.0 / std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(a(1, 1), 1.0 / 3.0, 1e-12);
}

TEST(NormalizeAdjacency, SymmetricEntriesInUnitInterval) {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const Graph g = random_graph(10, 0.3, rng);
    const DenseMatrix a = normalize_adjacency(g);
    for (int i = 0; i < g.n(); ++i)
      for (int j = 0; j < g.n(); ++j) {
        EXPECT_DOUBLE_EQ(a(i, j), a(j, i));
        EXPECT_GE(a(i, j), 0.0);
        if (i == j || g.has_edge(i, j)) {
          EXPECT_GT(a(i, j), 0.0);
          EXPECT_LE(a(i, j), 1.0);
        }
      }
  }
}

TEST(NormalizeAdjacency, SparseMatchesDense) {
  Rng rng(22);
  const Graph g = random_graph(12, 0.25, rng);
  const DenseMatrix dense = normalize_adjacency(g);
  const SparseNormAdj sparse = SparseNormAdj::build(g);
  const DenseMatrix prod = sparse.multiply(identity_matrix(g.n()));
  for (std::size_t i = 0; i < dense.size(); ++i) EXPECT_NEAR(dense.data[i], prod.data[i], 1e-12);
}

TEST(NormalizeAdjacency, DenseContinuousMatchesGraphVersion) {
  Rng rng(23);
  const Graph g = random_graph(8, 0.4, rng);
  const DenseMatrix a = normalize_dense_adjacency(g.dense_adjacency());
  const DenseMatrix b = normalize_adjacency(g);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-12);
}

TEST(KHopSubgraph, StarWholeGraphAtOneHop) {
  const Graph star = Graph::from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  Rng rng(1);
  const SubgraphView v = k_hop_subgraph(star, {0}, 1, AugmentationMode::none, rng);
  EXPECT_EQ(v.sub.n(), 5);
  EXPECT_EQ(v.parent_index, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(KHopSubgraph, PathDepthLimit) {
  const Graph path = Graph::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  Rng rng(1);
  const SubgraphView v = k_hop_subgraph(path, {0}, 2, AugmentationMode::none, rng);
  EXPECT_EQ(v.parent_index, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(v.target_local, (std::vector<int>{0}));
}

TEST(KHopSubgraph, RandomOtherClassAddsTwentyPercent) {
  // 10-node ball plus plenty of other-class nodes to sample from.
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < 10; ++i) edges.emplace_back(0, i);
  std::vector<int> labels(30, 1);
  for (int i = 0; i < 10; ++i) labels[i] = 0;
  const Graph g = Graph::from_edges(30, std::move(edges), {}, AttributeKind::binary,
                                    std::move(labels));
  Rng rng(5);
  const SubgraphView v = k_hop_subgraph(g, {0}, 1, AugmentationMode::random_other_class, rng);
  EXPECT_EQ(v.ball_size, 10);
  EXPECT_EQ(v.sub.n(), 12);  // ceil(0.2 * 10) = 2 extras
  for (std::size_t i = v.ball_size; i < v.parent_index.size(); ++i)
    EXPECT_NE(g.label_of(v.parent_index[i]), g.label_of(0));
}

TEST(KHopSubgraph, HighSimilarityFallsBackWhenNoneQualify) {
  const Graph path = Graph::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  Rng rng(5);
  const auto sim = [](int, int) { return 0.0; };
  const SubgraphView v =
      k_hop_subgraph(path, {0}, 1, AugmentationMode::high_similarity, rng, sim);
  EXPECT_TRUE(v.augmentation_fallback);
  EXPECT_EQ(v.augmentation, AugmentationMode::none);
  EXPECT_EQ(v.sub.n(), 2);
}

TEST(KHopSubgraph, HighSimilarityPicksQualifyingNodes) {
  const Graph path = Graph::from_edges(6, {{0, 1}, {1, 2}});
  Rng rng(5);
  const auto sim = [](int, int v) { return v >= 4 ? 0.95 : 0.0; };
  const SubgraphView v =
      k_hop_subgraph(path, {0}, 2, AugmentationMode::high_similarity, rng, sim);
  EXPECT_FALSE(v.augmentation_fallback);
  ASSERT_EQ(v.sub.n(), 4);  // ball {0,1,2} + ceil(0.6)=1 extra
  EXPECT_GE(v.parent_index.back(), 4);
}

TEST(KHopSubgraph, InducedAdjacencyMatchesParentRestriction) {
  Rng rng(31);
  for (int rep = 0; rep < 30; ++rep) {
    const Graph g = random_graph(12, 0.25, rng);
    std::uniform_int_distribution<int> pick(0, g.n() - 1);
    const int target = pick(rng);
    const SubgraphView v = k_hop_subgraph(g, {target}, 2, AugmentationMode::none, rng);
    for (int i = 0; i < v.sub.n(); ++i)
      for (int j = 0; j < v.sub.n(); ++j)
        EXPECT_EQ(v.sub.has_edge(i, j), g.has_edge(v.parent_index[i], v.parent_index[j]));
  }
}

TEST(SpliceSubgraph, IdentityIsBitExact) {
  Rng rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    const Graph g = random_graph(10, 0.3, rng, true);
    const SubgraphView v = k_hop_subgraph(g, {0}, 2, AugmentationMode::none, rng);
    const Graph spliced = splice_subgraph(g, v, v.sub);
    EXPECT_TRUE(graphs_identical(g, spliced));
  }
}

TEST(SpliceSubgraph, SingleFlipTouchesExactlyOnePair) {
  Rng rng(43);
  const Graph g = random_graph(10, 0.3, rng);
  const SubgraphView v = k_hop_subgraph(g, {0}, 2, AugmentationMode::none, rng);
  ASSERT_GE(v.sub.n(), 2);
  // flip the (0,1) link inside the view
  std::vector<std::pair<int, int>> edges = v.sub.edges();
  const std::pair<int, int> flip{0, 1};
  const auto it = std::find(edges.begin(), edges.end(), flip);
  if (it == edges.end())
    edges.push_back(flip);
  else
    edges.erase(it);
  const Graph adv = Graph::from_edges(v.sub.n(), std::move(edges), v.sub.attributes(),
                                      v.sub.attribute_kind());
  const Graph spliced = splice_subgraph(g, v, adv);
  int diff = 0;
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.n(); ++j)
      if (g.has_edge(i, j) != spliced.has_edge(i, j)) ++diff;
  EXPECT_EQ(diff, 2);  // (i,j) and (j,i)
}

TEST(SpliceSubgraph, OutsideEntriesUntouched) {
  Rng rng(47);
  const Graph g = random_graph(14, 0.25, rng);
  const SubgraphView v = k_hop_subgraph(g, {0}, 1, AugmentationMode::none, rng);
  // empty the whole subgraph
  const Graph adv = Graph::from_edges(v.sub.n(), {}, v.sub.attributes(),
                                      v.sub.attribute_kind());
  const Graph spliced = splice_subgraph(g, v, adv);
  std::set<int> inside(v.parent_index.begin(), v.parent_index.end());
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.n(); ++j) {
      if (inside.count(i) && inside.count(j))
        EXPECT_FALSE(spliced.has_edge(i, j));
      else
        EXPECT_EQ(spliced.has_edge(i, j), g.has_edge(i, j));
    }
}

TEST(SpliceSubgraph, ShapeMismatchThrows) {
  Rng rng(53);
  const Graph g = random_graph(8, 0.3, rng);
  const SubgraphView v = k_hop_subgraph(g, {0}, 1, AugmentationMode::none, rng);
  const Graph wrong = Graph::from_edges(v.sub.n() + 1, {});
  EXPECT_THROW(splice_subgraph(g, v, wrong), ContractError);
}

TEST(Bfs, HopsFromMultipleSources) {
  const Graph path = Graph::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  const std::vector<int> d = bfs_hops(path, {0, 4});
  EXPECT_EQ(d, (std::vector<int>{0, 1, 2, 1, 0}));
}
