#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gcnseg/matrix.hpp"

namespace gcnseg {

struct Edge {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Undirected weighted graph stored as an edge list. The adjacency it implies
// is symmetric with a zero diagonal. Edges are normalized so that i < j.
class Graph {
 public:
  Graph() = default;
  // Throws kInvalidArgument on self-loops, out-of-range endpoints, or
  // negative / non-finite weights.
  Graph(std::size_t num_nodes, std::vector<Edge> edges);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  DenseMatrix adjacency() const;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
};

enum class Connectivity { kFour = 4, kEight = 8 };

// Pixel-grid graph with row-major node ids (r * width + c) and unit weights.
Graph build_grid_graph(std::size_t height, std::size_t width,
                       Connectivity connectivity = Connectivity::kFour);

// Closed-form edge count of build_grid_graph.
std::size_t grid_edge_count(std::size_t height, std::size_t width, Connectivity connectivity);

std::vector<double> degree_diagonal(const Graph& g);

// L = D − A
DenseMatrix laplacian(const Graph& g);

// Â = D̃^(−1/2) (A + I) D̃^(−1/2), with D̃_ii = Σ_j (A + I)_ij.
DenseMatrix renormalized_adjacency(const Graph& g);

// Square sparse operator in CSR form. Row entries are kept in ascending
// column order, so apply() has a fixed summation order and is bitwise
// reproducible.
class SparseOperator {
 public:
  SparseOperator() = default;

  static SparseOperator from_dense(const DenseMatrix& m);

  std::size_t size() const noexcept { return n_; }
  std::size_t nonzeros() const noexcept { return values_.size(); }

  // Y = M·X for an n×d signal matrix X.
  DenseMatrix apply(const DenseMatrix& x) const;
  std::vector<double> apply(std::span<const double> x) const;

  DenseMatrix to_dense() const;

 private:
  friend SparseOperator laplacian_operator(const Graph& g);
  friend SparseOperator renormalized_adjacency_operator(const Graph& g);

  std::size_t n_ = 0;
  std::vector<std::size_t> row_start_;
  std::vector<std::uint32_t> col_;
  std::vector<double> values_;
};

SparseOperator laplacian_operator(const Graph& g);
SparseOperator renormalized_adjacency_operator(const Graph& g);

}  // namespace gcnseg
