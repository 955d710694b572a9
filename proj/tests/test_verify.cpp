#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gcnseg/graph.hpp"
#include "gcnseg/spectral.hpp"
#include "gcnseg/verify.hpp"
#include "test_support.hpp"

namespace gcnseg {
namespace {

TEST(RandomGraph, ConnectedWithExactWeights) {
  std::mt19937_64 rng(1);
  for (std::size_t n = 1; n <= 30; ++n) {
    const Graph g = random_connected_graph(n, rng);
    EXPECT_EQ(g.num_nodes(), n);
    EXPECT_GE(g.num_edges(), n - 1);
    for (const Edge& e : g.edges()) {
      EXPECT_GT(e.weight, 0.0);
      EXPECT_EQ(e.weight * 8.0, std::floor(e.weight * 8.0));
    }
    // Connectivity by flood fill.
    std::vector<std::vector<std::uint32_t>> adj(n);
    for (const Edge& e : g.edges()) {
      adj[e.i].push_back(e.j);
      adj[e.j].push_back(e.i);
    }
    std::vector<bool> seen(n, false);
    std::vector<std::uint32_t> stack = {0};
    seen[0] = true;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const std::uint32_t v = stack.back();
      stack.pop_back();
      for (std::uint32_t u : adj[v])
        if (!seen[u]) {
          seen[u] = true;
          ++reached;
          stack.push_back(u);
        }
    }
    EXPECT_EQ(reached, n);
  }
}

TEST(RunVerify, AllSuitesPass) {
  VerifyOptions o;
  o.trials = 5;
  const std::vector<SuiteResult> results = run_verify(o);
  ASSERT_EQ(results.size(), 6u);
  for (const SuiteResult& r : results) {
    EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
    EXPECT_LE(r.worst, r.tolerance) << r.name;
  }
}

TEST(RunVerify, CorruptedEigensolverIsCaught) {
  VerifyOptions o;
  o.trials = 3;
  o.eigensolver = [](const DenseMatrix& m) {
    SpectralDecomposition d = eig_sym(m);
    d.lambda[0] += 1e-3;
    return d;
  };
  bool eig_failed = false;
  for (const SuiteResult& r : run_verify(o))
    if (r.name == "eigensolver_fidelity") eig_failed = !r.passed;
  EXPECT_TRUE(eig_failed);
}

TEST(RunVerify, ZeroTrialsRejected) {
  VerifyOptions o;
  o.trials = 0;
  EXPECT_ERROR_KIND(run_verify(o), ErrorKind::kInvalidArgument);
}

}  // namespace
}  // namespace gcnseg
