#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gcnseg/graph.hpp"
#include "gcnseg/model.hpp"
#include "gcnseg/spectral.hpp"

namespace gcnseg {

// Random connected graph: a random spanning tree (node k attaches to a
// uniformly chosen earlier node) plus each remaining pair with probability
// extra_edge_prob. Weights are uniform in [0.1, 2].
Graph random_connected_graph(std::size_t n, std::mt19937_64& rng, double extra_edge_prob = 0.2);

// Random symmetric matrix with entries uniform in [−1, 1].
DenseMatrix random_symmetric(std::size_t n, std::mt19937_64& rng);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Central finite differences of the mean NLL for every parameter, step
// 1e−5·max(1, |w|). Relative error is (|a − f| − r) / max(|a|, |f|, floor),
// where r = 4·eps·max(|L₊|, |L₋|) / 2h bounds the rounding error of f.
GradientCheckResult gradient_check(const GcnModel& model, const Tensor3& patch,
                                   std::span<const std::uint8_t> labels,
                                   double relative_floor = 1e-8);

using Eigensolver = std::function<SpectralDecomposition(const DenseMatrix&)>;

struct VerifyOptions {
  std::size_t max_n = 32;
  std::size_t max_order = 8;
  std::size_t trials = 20;
  // Eigensolver fidelity runs on random symmetric matrices up to this size.
  std::size_t eig_max_n = 64;
  std::uint64_t seed = 1;
  // Replaces eig_sym everywhere in the suite (test hook).
  Eigensolver eigensolver;
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // worst observed value of the suite's error measure
  double tolerance = 0.0;  // bound that measure is held to
  std::string detail;
  double seconds = 0.0;
};

std::vector<SuiteResult> run_verify(const VerifyOptions& options);

// Individual suites; run_verify calls each of them.
SuiteResult verify_laplacian(const VerifyOptions& options);
SuiteResult verify_eigensolver(const VerifyOptions& options);
SuiteResult verify_chebyshev(const VerifyOptions& options);
SuiteResult verify_renormalized_spectrum(const VerifyOptions& options);
SuiteResult verify_gradients(const VerifyOptions& options);
SuiteResult verify_metrics(const VerifyOptions& options);

}  // namespace gcnseg
