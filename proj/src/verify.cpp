#include "gcnseg/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdio>

#include "gcnseg/chebyshev.hpp"
#include "gcnseg/error.hpp"
#include "gcnseg/metrics.hpp"
#include "gcnseg/training.hpp"

namespace gcnseg {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

Eigensolver solver_of(const VerifyOptions& o) {
  if (o.eigensolver) return o.eigensolver;
  return [](const DenseMatrix& m) { return eig_sym(m); };
}

// Times a suite body and catches library errors as failures, so a broken
// component shows up as a named failing suite.
template <typename Body>
SuiteResult run_suite(const std::string& name, double tolerance, Body&& body) {
  SuiteResult r;
  r.name = name;
  r.tolerance = tolerance;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

double orthonormality_error(const DenseMatrix& phi) {
  return max_abs_diff(matmul_tn(phi, phi), DenseMatrix::identity(phi.cols()));
}

}  // namespace

Graph random_connected_graph(std::size_t n, std::mt19937_64& rng, double extra_edge_prob) {
  // Weights are multiples of 1/8 so degree sums are exact and L·1 = 0 holds
  // bit for bit.
  auto weight = [&rng] { return static_cast<double>(uniform_int(rng, 1, 16)) / 8.0; };
  std::vector<Edge> edges;
  std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t parent = uniform_int(rng, 0, k - 1);
    edges.push_back({static_cast<std::uint32_t>(parent), static_cast<std::uint32_t>(k), weight()});
    used[parent][k] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (used[i][j]) continue;
      if (uniform(rng, 0.0, 1.0) < extra_edge_prob)
        edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), weight()});
    }
  }
  return Graph(n, std::move(edges));
}

DenseMatrix random_symmetric(std::size_t n, std::mt19937_64& rng) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = uniform(rng, -1.0, 1.0);
  return m;
}

namespace {
// Rounding error of one loss evaluation, in units of |loss|·eps.
constexpr double kQuotientNoise = 4.0 * std::numeric_limits<double>::epsilon();
}  // namespace

GradientCheckResult gradient_check(const GcnModel& model, const Tensor3& patch,
                                   std::span<const std::uint8_t> labels, double relative_floor) {
  const BackwardResult analytic = model_backward(model, model_forward(model, patch), labels);
  std::vector<std::span<const double>> grads;
  for_each_tensor(analytic.grads, [&grads](const std::string&, const std::vector<std::uint32_t>&,
                                           std::span<const double> v) { grads.push_back(v); });

  GcnModel probe = model;
  auto loss_at = [&probe, &patch, &labels] {
    return nll_loss(model_forward(probe, patch).log_probs, labels);
  };

  GradientCheckResult result;
  std::size_t tensor = 0;
  for_each_tensor(probe.params(), [&](const std::string& name, const std::vector<std::uint32_t>&,
                                      std::span<double> values) {
    const auto& g = grads[tensor++];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double w = values[i];
      const double h = 1e-5 * std::max(1.0, std::abs(w));
      values[i] = w + h;
      const double up = loss_at();
      values[i] = w - h;
      const double down = loss_at();
      values[i] = w;
      const double numeric = (up - down) / (2.0 * h);
      const double noise = kQuotientNoise * std::max(std::abs(up), std::abs(down)) / (2.0 * h);
      const double denom = std::max({std::abs(g[i]), std::abs(numeric), relative_floor});
      const double rel = std::max(0.0, std::abs(g[i] - numeric) - noise) / denom;
      if (rel > result.max_relative_error || result.checked == 0) {
        result.max_relative_error = rel;
        result.worst_tensor = name;
        result.worst_index = i;
      }
      ++result.checked;
    }
  });
  return result;
}

SuiteResult verify_laplacian(const VerifyOptions& o) {
  return run_suite("laplacian_psd", 1e-10, [&](SuiteResult& r) {
    std::mt19937_64 rng(o.seed ^ 0x1111);
    const Eigensolver solve = solver_of(o);
    double worst_neg = 0.0;
    double worst_row_sum = 0.0;
    double worst_asym = 0.0;
    double smallest_gap = INFINITY;
    for (std::size_t t = 0; t < o.trials; ++t) {
      const std::size_t n = uniform_int(rng, 2, std::max<std::size_t>(2, o.max_n));
      const Graph g = random_connected_graph(n, rng);
      const DenseMatrix l = laplacian(g);
      worst_asym = std::max(worst_asym, asymmetry(l));
      const std::vector<double> ones(n, 1.0);
      for (double v : matvec(l, ones)) worst_row_sum = std::max(worst_row_sum, std::abs(v));
      const SpectralDecomposition dec = solve(l);
      worst_neg = std::max(worst_neg, -dec.lambda.front());
      if (n <= 16) smallest_gap = std::min(smallest_gap, dec.lambda[1]);
    }
    r.worst = worst_neg;
    r.passed = worst_asym == 0.0 && worst_row_sum == 0.0 && worst_neg <= 1e-10 &&
               (smallest_gap == INFINITY || smallest_gap > 1e-10);
    r.detail = fmt("min eigenvalue >= %.3g, max |L*1| = %.3g", -worst_neg, worst_row_sum) +
               fmt(", smallest lambda_2 (n<=16) = %.3g", smallest_gap);
  });
}

SuiteResult verify_eigensolver(const VerifyOptions& o) {
  return run_suite("eigensolver_fidelity", 1e-10, [&](SuiteResult& r) {
    std::mt19937_64 rng(o.seed ^ 0x2222);
    const Eigensolver solve = solver_of(o);
    double worst_recon = 0.0;
    double worst_orth = 0.0;
    bool sorted = true;
    for (std::size_t t = 0; t < o.trials; ++t) {
      const std::size_t n = uniform_int(rng, 2, std::max<std::size_t>(2, o.eig_max_n));
      const DenseMatrix m = random_symmetric(n, rng);
      const SpectralDecomposition dec = solve(m);
      worst_recon = std::max(worst_recon, max_abs_diff(reconstruct(dec), m));
      worst_orth = std::max(worst_orth, orthonormality_error(dec.phi));
      sorted = sorted && std::is_sorted(dec.lambda.begin(), dec.lambda.end());
    }
    r.worst = std::max(worst_recon, worst_orth);
    r.passed = sorted && worst_recon < 1e-10 && worst_orth < 1e-10;
    r.detail = fmt("max |Phi Lambda Phi^T - M| = %.3g, max |Phi^T Phi - I| = %.3g", worst_recon,
                   worst_orth);
  });
}

SuiteResult verify_chebyshev(const VerifyOptions& o) {
  return run_suite("chebyshev_spectral_equivalence", 1e-8, [&](SuiteResult& r) {
    std::mt19937_64 rng(o.seed ^ 0x3333);
    const Eigensolver solve = solver_of(o);
    double worst = 0.0;
    for (std::size_t t = 0; t < o.trials; ++t) {
      const std::size_t n = uniform_int(rng, 2, std::max<std::size_t>(2, o.max_n));
      const Graph g = random_connected_graph(n, rng);
      const std::size_t order = uniform_int(rng, 0, o.max_order);
      std::vector<double> alpha(order + 1);
      for (double& a : alpha) a = uniform(rng, -1.0, 1.0);
      const ChebCoeffs coeffs(alpha);
      DenseMatrix f(n, 3);
      for (double& v : f.data()) v = uniform(rng, -1.0, 1.0);

      const double lam = lambda_max(g);
      const DenseMatrix fast = cheb_apply(scaled_laplacian(g, lam), coeffs, f);
      const SpectralDecomposition dec = solve(laplacian(g));
      const DenseMatrix exact =
          spectral_filter(dec, chebyshev_multipliers(coeffs, dec.lambda, lam), f);
      worst = std::max(worst, max_abs_diff(fast, exact));
    }
    r.worst = worst;
    r.passed = worst < 1e-8;
    r.detail = fmt("max |chebyshev - spectral| = %.3g", worst);
  });
}

SuiteResult verify_renormalized_spectrum(const VerifyOptions& o) {
  return run_suite("renormalized_adjacency_spectrum", 1e-12, [&](SuiteResult& r) {
    std::mt19937_64 rng(o.seed ^ 0x4444);
    const Eigensolver solve = solver_of(o);
    double worst_excess = -INFINITY;
    double worst_asym = 0.0;
    auto check = [&](const Graph& g) {
      const DenseMatrix a = renormalized_adjacency(g);
      worst_asym = std::max(worst_asym, asymmetry(a));
      const SpectralDecomposition dec = solve(a);
      const double radius = std::max(std::abs(dec.lambda.front()), std::abs(dec.lambda.back()));
      worst_excess = std::max(worst_excess, radius - 1.0);
    };
    for (std::size_t h = 1; h <= 8; ++h)
      for (std::size_t w = 1; w <= 8; ++w)
        for (Connectivity c : {Connectivity::kFour, Connectivity::kEight})
          check(build_grid_graph(h, w, c));
    for (std::size_t t = 0; t < o.trials; ++t)
      check(random_connected_graph(uniform_int(rng, 1, std::max<std::size_t>(1, o.max_n)), rng));
    r.worst = worst_excess;
    r.passed = worst_asym <= 1e-15 && worst_excess <= 1e-12;
    r.detail = fmt("max spectral radius - 1 = %.3g over grids up to 8x8 and random graphs",
                   worst_excess);
  });
}

SuiteResult verify_gradients(const VerifyOptions& o) {
  return run_suite("gradient_check", 1e-5, [&](SuiteResult& r) {
    std::mt19937_64 rng(o.seed ^ 0x5555);
    Architecture arch;
    arch.height = 8;
    arch.width = 8;
    arch.conv_channels = {4};
    arch.gcn_dims = {4, 2};
    GradientCheckResult worst;
    const std::size_t models = std::max<std::size_t>(1, std::min<std::size_t>(o.trials, 5));
    for (std::size_t t = 0; t < models; ++t) {
      const GcnModel model = init_model(rng(), arch);
      Tensor3 patch(3, 8, 8);
      for (double& v : patch.data) v = uniform(rng, 0.0, 1.0);
      std::vector<std::uint8_t> labels(64);
      for (auto& l : labels) l = static_cast<std::uint8_t>(rng() & 1u);
      const GradientCheckResult g = gradient_check(model, patch, labels);
      if (g.max_relative_error >= worst.max_relative_error) worst = g;
    }
    r.worst = worst.max_relative_error;
    r.passed = worst.max_relative_error < 1e-5;
    r.detail = fmt("max relative error %.3g", worst.max_relative_error) + " (" +
               worst.worst_tensor + "[" + std::to_string(worst.worst_index) + "])";
  });
}

SuiteResult verify_metrics(const VerifyOptions& o) {
  return run_suite("metric_identities", 1e-12, [&](SuiteResult& r) {
    std::mt19937_64 rng(o.seed ^ 0x6666);
    double worst = 0.0;
    bool ordered = true;
    for (int t = 0; t < 1000; ++t) {
      ConfusionMatrix cm{uniform_int(rng, 0, 1000), uniform_int(rng, 0, 1000),
                         uniform_int(rng, 0, 1000), uniform_int(rng, 0, 1000)};
      if (cm.tp + cm.fp + cm.fn == 0) cm.tp = 1;
      const Metrics m = compute_metrics(cm);
      worst = std::max(worst, std::abs(m.f1 - 2.0 * m.iou / (1.0 + m.iou)));
      ordered = ordered && m.iou <= m.f1 && m.oa >= 0.0 && m.oa <= 1.0 && m.f1 >= 0.0 &&
                m.f1 <= 1.0 && m.iou >= 0.0 && m.iou <= 1.0;
    }
    const Metrics hand = compute_metrics({6, 2, 2, 90});
    const bool exact = hand.oa == 0.96 && hand.f1 == 0.75 && hand.iou == 0.6 &&
                       format_metrics_line(hand) == "OA=0.9600 F1=0.7500 IoU=0.6000";
    r.worst = worst;
    r.passed = worst <= 1e-12 && ordered && exact;
    r.detail = fmt("max |F1 - 2IoU/(1+IoU)| = %.3g over 1000 matrices", worst) +
               "; tp=6 fp=2 fn=2 tn=90 -> " + format_metrics_line(hand);
  });
}

std::vector<SuiteResult> run_verify(const VerifyOptions& options) {
  if (options.trials == 0) {
    throw Error(ErrorKind::kInvalidArgument, "verify needs at least one trial");
  }
  if (options.max_n < 2) throw Error(ErrorKind::kInvalidArgument, "verify needs max_n >= 2");
  return {verify_laplacian(options),          verify_eigensolver(options),
          verify_chebyshev(options),          verify_renormalized_spectrum(options),
          verify_gradients(options),          verify_metrics(options)};
}

}  // namespace gcnseg
