#include "gcnseg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "gcnseg/error.hpp"

namespace gcnseg {

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges)
    : num_nodes_(num_nodes), edges_(std::move(edges)) {
  for (Edge& e : edges_) {
    if (e.i == e.j) {
      throw Error(ErrorKind::kInvalidArgument,
                  "self-loop at node " + std::to_string(e.i));
    }
    if (e.i >= num_nodes_ || e.j >= num_nodes_) {
      throw Error(ErrorKind::kInvalidArgument,
                  "edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                      ") out of range for " + std::to_string(num_nodes_) + " nodes");
    }
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw Error(ErrorKind::kInvalidArgument, "edge weight must be finite and >= 0");
    }
    if (e.i > e.j) std::swap(e.i, e.j);
  }
}

DenseMatrix Graph::adjacency() const {
  DenseMatrix a(num_nodes_, num_nodes_);
  for (const Edge& e : edges_) {
    a(e.i, e.j) += e.weight;
    a(e.j, e.i) += e.weight;
  }
  return a;
}

Graph build_grid_graph(std::size_t height, std::size_t width, Connectivity connectivity) {
  if (height == 0 || width == 0) {
    throw Error(ErrorKind::kInvalidDimension, "grid graph needs height and width >= 1");
  }
  std::vector<Edge> edges;
  edges.reserve(grid_edge_count(height, width, connectivity));
  auto id = [width](std::size_t r, std::size_t c) {
    return static_cast<std::uint32_t>(r * width + c);
  };
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c + 1 < width) edges.push_back({id(r, c), id(r, c + 1), 1.0});
      if (r + 1 < height) edges.push_back({id(r, c), id(r + 1, c), 1.0});
      if (connectivity == Connectivity::kEight && r + 1 < height) {
        if (c + 1 < width) edges.push_back({id(r, c), id(r + 1, c + 1), 1.0});
        if (c > 0) edges.push_back({id(r, c), id(r + 1, c - 1), 1.0});
      }
    }
  }
  return Graph(height * width, std::move(edges));
}

std::size_t grid_edge_count(std::size_t height, std::size_t width, Connectivity connectivity) {
  if (height == 0 || width == 0) return 0;
  std::size_t count = height * (width - 1) + width * (height - 1);
  if (connectivity == Connectivity::kEight) count += 2 * (height - 1) * (width - 1);
  return count;
}

std::vector<double> degree_diagonal(const Graph& g) {
  std::vector<double> d(g.num_nodes(), 0.0);
  for (const Edge& e : g.edges()) {
    d[e.i] += e.weight;
    d[e.j] += e.weight;
  }
  return d;
}

DenseMatrix laplacian(const Graph& g) {
  DenseMatrix l(g.num_nodes(), g.num_nodes());
  for (const Edge& e : g.edges()) {
    l(e.i, e.j) -= e.weight;
    l(e.j, e.i) -= e.weight;
    l(e.i, e.i) += e.weight;
    l(e.j, e.j) += e.weight;
  }
  return l;
}

DenseMatrix renormalized_adjacency(const Graph& g) {
  return renormalized_adjacency_operator(g).to_dense();
}

namespace {

// Merges (row, col) -> value triplets into CSR with sorted columns.
struct CsrBuilder {
  explicit CsrBuilder(std::size_t n) : rows(n) {}

  void add(std::size_t r, std::size_t c, double v) { rows[r][static_cast<std::uint32_t>(c)] += v; }

  std::vector<std::map<std::uint32_t, double>> rows;
};

}  // namespace

SparseOperator laplacian_operator(const Graph& g) {
  CsrBuilder b(g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) b.add(i, i, 0.0);
  for (const Edge& e : g.edges()) {
    b.add(e.i, e.j, -e.weight);
    b.add(e.j, e.i, -e.weight);
    b.add(e.i, e.i, e.weight);
    b.add(e.j, e.j, e.weight);
  }
  SparseOperator op;
  op.n_ = g.num_nodes();
  op.row_start_.push_back(0);
  for (const auto& row : b.rows) {
    for (const auto& [c, v] : row) {
      op.col_.push_back(c);
      op.values_.push_back(v);
    }
    op.row_start_.push_back(op.values_.size());
  }
  return op;
}

SparseOperator renormalized_adjacency_operator(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> deg = degree_diagonal(g);
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(deg[i] + 1.0);

  CsrBuilder b(n);
  for (std::size_t i = 0; i < n; ++i) b.add(i, i, 1.0);
  for (const Edge& e : g.edges()) {
    b.add(e.i, e.j, e.weight);
    b.add(e.j, e.i, e.weight);
  }
  SparseOperator op;
  op.n_ = n;
  op.row_start_.push_back(0);
  for (std::size_t r = 0; r < n; ++r) {
    for (const auto& [c, v] : b.rows[r]) {
      op.col_.push_back(c);
      op.values_.push_back(inv_sqrt[r] * v * inv_sqrt[c]);
    }
    op.row_start_.push_back(op.values_.size());
  }
  return op;
}

SparseOperator SparseOperator::from_dense(const DenseMatrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::kInvalidDimension, "sparse operator must be square");
  }
  SparseOperator op;
  op.n_ = m.rows();
  op.row_start_.push_back(0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (m(r, c) != 0.0) {
        op.col_.push_back(static_cast<std::uint32_t>(c));
        op.values_.push_back(m(r, c));
      }
    }
    op.row_start_.push_back(op.values_.size());
  }
  return op;
}

DenseMatrix SparseOperator::apply(const DenseMatrix& x) const {
  if (x.rows() != n_) {
    throw Error(ErrorKind::kInvalidDimension,
                "operator of size " + std::to_string(n_) + " applied to " +
                    std::to_string(x.rows()) + " rows");
  }
  const std::size_t d = x.cols();
  DenseMatrix y(n_, d);
  for (std::size_t r = 0; r < n_; ++r) {
    auto out = y.row(r);
    for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) {
      const double v = values_[k];
      auto in = x.row(col_[k]);
      for (std::size_t j = 0; j < d; ++j) out[j] += v * in[j];
    }
  }
  return y;
}

std::vector<double> SparseOperator::apply(std::span<const double> x) const {
  return apply(DenseMatrix::column(x)).data();
}

DenseMatrix SparseOperator::to_dense() const {
  DenseMatrix m(n_, n_);
  for (std::size_t r = 0; r < n_; ++r)
    for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) m(r, col_[k]) += values_[k];
  return m;
}

}  // namespace gcnseg
