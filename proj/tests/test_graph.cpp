#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <utility>

#include "gcnseg/graph.hpp"
#include "gcnseg/spectral.hpp"
#include "gcnseg/verify.hpp"
#include "test_support.hpp"

namespace gcnseg {
namespace {

using testing::random_matrix;

Graph path_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (std::uint32_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return Graph(n, edges);
}

Graph cycle_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (std::uint32_t i = 0; i < n; ++i) edges.push_back({i, static_cast<std::uint32_t>((i + 1) % n), 1.0});
  return Graph(n, edges);
}

// Adjacent pixel pairs counted by scanning every pair of pixels.
std::set<std::pair<std::size_t, std::size_t>> enumerate_grid_pairs(std::size_t h, std::size_t w,
                                                                  bool diagonal) {
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < h * w; ++a)
    for (std::size_t b = a + 1; b < h * w; ++b) {
      const long dr = std::labs(static_cast<long>(a / w) - static_cast<long>(b / w));
      const long dc = std::labs(static_cast<long>(a % w) - static_cast<long>(b % w));
      const bool adjacent = diagonal ? (dr <= 1 && dc <= 1) : (dr + dc == 1);
      if (adjacent) pairs.insert({a, b});
    }
  return pairs;
}

TEST(Graph, RejectsSelfLoopsBadEndpointsAndWeights) {
  EXPECT_ERROR_KIND(Graph(2, {{1, 1, 1.0}}), ErrorKind::kInvalidArgument);
  EXPECT_ERROR_KIND(Graph(2, {{0, 2, 1.0}}), ErrorKind::kInvalidArgument);
  EXPECT_ERROR_KIND(Graph(2, {{0, 1, -0.5}}), ErrorKind::kInvalidArgument);
  EXPECT_ERROR_KIND(Graph(2, {{0, 1, std::nan("")}}), ErrorKind::kInvalidArgument);
}

TEST(Graph, NormalizesEdgeOrientation) {
  Graph g(3, {{2, 0, 1.5}});
  ASSERT_EQ(g.num_edges(), 1u);
  EXPECT_EQ(g.edges()[0].i, 0u);
  EXPECT_EQ(g.edges()[0].j, 2u);
  const DenseMatrix a = g.adjacency();
  EXPECT_EQ(a(0, 2), 1.5);
  EXPECT_EQ(a(2, 0), 1.5);
  EXPECT_EQ(a(0, 0), 0.0);
}

TEST(GridGraph, SmallExamples) {
  Graph single = build_grid_graph(1, 1, Connectivity::kFour);
  EXPECT_EQ(single.num_nodes(), 1u);
  EXPECT_EQ(single.num_edges(), 0u);

  Graph square = build_grid_graph(2, 2, Connectivity::kFour);
  EXPECT_EQ(square.num_nodes(), 4u);
  EXPECT_EQ(square.num_edges(), 4u);

  Graph eight = build_grid_graph(3, 3, Connectivity::kEight);
  EXPECT_EQ(eight.num_nodes(), 9u);
  EXPECT_EQ(eight.num_edges(), 20u);
}

TEST(GridGraph, ZeroExtentIsInvalid) {
  EXPECT_ERROR_KIND(build_grid_graph(0, 3), ErrorKind::kInvalidDimension);
  EXPECT_ERROR_KIND(build_grid_graph(3, 0), ErrorKind::kInvalidDimension);
}

TEST(GridGraph, EdgesMatchEnumerationUpTo8x8) {
  for (std::size_t h = 1; h <= 8; ++h)
    for (std::size_t w = 1; w <= 8; ++w)
      for (bool diagonal : {false, true}) {
        const Connectivity c = diagonal ? Connectivity::kEight : Connectivity::kFour;
        const Graph g = build_grid_graph(h, w, c);
        const auto expected = enumerate_grid_pairs(h, w, diagonal);
        std::set<std::pair<std::size_t, std::size_t>> got;
        for (const Edge& e : g.edges()) {
          EXPECT_EQ(e.weight, 1.0);
          got.insert({e.i, e.j});
        }
        EXPECT_EQ(got, expected) << h << "x" << w << " diag=" << diagonal;
        EXPECT_EQ(g.num_edges(), expected.size());
        EXPECT_EQ(grid_edge_count(h, w, c), expected.size());
        if (!diagonal) EXPECT_EQ(expected.size(), h * (w - 1) + w * (h - 1));
      }
}

TEST(Degree, PathsAndGrid) {
  EXPECT_EQ(degree_diagonal(path_graph(2)), (std::vector<double>{1, 1}));
  EXPECT_EQ(degree_diagonal(path_graph(3)), (std::vector<double>{1, 2, 1}));
  EXPECT_EQ(degree_diagonal(build_grid_graph(3, 3)),
            (std::vector<double>{2, 3, 2, 3, 4, 3, 2, 3, 2}));
}

TEST(Laplacian, Examples) {
  EXPECT_EQ(laplacian(path_graph(2)), DenseMatrix(2, 2, {1, -1, -1, 1}));
  EXPECT_EQ(laplacian(Graph(3, {})), DenseMatrix(3, 3));
}

TEST(Laplacian, FourCycleSpectrum) {
  const SpectralDecomposition dec = eig_sym(laplacian(cycle_graph(4)));
  const std::vector<double> expected = {0, 2, 2, 4};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(dec.lambda[k], expected[k], 1e-12);
}

TEST(Laplacian, SymmetricZeroRowSumsAndPsd) {
  std::mt19937_64 rng(11);
  for (std::size_t n = 1; n <= 32; ++n) {
    const Graph g = random_connected_graph(n, rng);
    const DenseMatrix l = laplacian(g);
    EXPECT_EQ(asymmetry(l), 0.0);
    const std::vector<double> ones(n, 1.0);
    for (double v : matvec(l, ones)) EXPECT_EQ(v, 0.0);
    const SpectralDecomposition dec = eig_sym(l);
    EXPECT_GE(dec.lambda.front(), -1e-10);
    if (n >= 2 && n <= 16) EXPECT_GT(dec.lambda[1], 1e-10) << "n=" << n;
  }
}

TEST(Laplacian, SparseOperatorMatchesDense) {
  std::mt19937_64 rng(5);
  const Graph g = random_connected_graph(20, rng);
  const DenseMatrix x = random_matrix(20, 3, rng);
  EXPECT_LE(max_abs_diff(laplacian_operator(g).apply(x), testing::naive_product(laplacian(g), x)),
            1e-14);
  EXPECT_EQ(laplacian_operator(g).to_dense(), laplacian(g));
}

TEST(RenormalizedAdjacency, Examples) {
  EXPECT_EQ(renormalized_adjacency(Graph(1, {})), DenseMatrix(1, 1, {1.0}));
  const DenseMatrix p2 = renormalized_adjacency(path_graph(2));
  for (double v : p2.data()) EXPECT_NEAR(v, 0.5, 1e-15);
  const DenseMatrix k3 = renormalized_adjacency(Graph(3, {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}}));
  for (double v : k3.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(RenormalizedAdjacency, IsolatedNodeKeepsUnitSelfLoop) {
  const DenseMatrix a = renormalized_adjacency(Graph(3, {{0, 1, 1.0}}));
  EXPECT_EQ(a(2, 2), 1.0);
  EXPECT_EQ(a(2, 0), 0.0);
}

TEST(RenormalizedAdjacency, OracleFromDefinition) {
  std::mt19937_64 rng(3);
  const Graph g = random_connected_graph(12, rng);
  DenseMatrix tilde = g.adjacency() + DenseMatrix::identity(12);
  std::vector<double> d(12, 0.0);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j) d[i] += tilde(i, j);
  DenseMatrix expected(12, 12);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j) expected(i, j) = tilde(i, j) / std::sqrt(d[i] * d[j]);
  EXPECT_LE(max_abs_diff(renormalized_adjacency(g), expected), 1e-15);
}

TEST(RenormalizedAdjacency, SymmetricWithSpectralRadiusAtMostOne) {
  std::mt19937_64 rng(17);
  std::vector<Graph> graphs;
  for (std::size_t h = 1; h <= 8; ++h)
    for (std::size_t w = 1; w <= 8; ++w) {
      graphs.push_back(build_grid_graph(h, w, Connectivity::kFour));
      graphs.push_back(build_grid_graph(h, w, Connectivity::kEight));
    }
  for (int t = 0; t < 20; ++t) graphs.push_back(random_connected_graph(2 + t, rng));
  for (const Graph& g : graphs) {
    const DenseMatrix a = renormalized_adjacency(g);
    EXPECT_LE(asymmetry(a), 1e-15);
    const SpectralDecomposition dec = eig_sym(a);
    EXPECT_GE(dec.lambda.front(), -1.0 - 1e-12);
    EXPECT_LE(dec.lambda.back(), 1.0 + 1e-12);
  }
}

TEST(SparseOperator, RowOrderIsSortedAndFromDenseRoundTrips) {
  std::mt19937_64 rng(8);
  const DenseMatrix m = random_matrix(6, 6, rng);
  EXPECT_EQ(SparseOperator::from_dense(m).to_dense(), m);
  EXPECT_ERROR_KIND(SparseOperator::from_dense(DenseMatrix(2, 3)), ErrorKind::kInvalidDimension);
}

}  // namespace
}  // namespace gcnseg
