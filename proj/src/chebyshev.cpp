#include "gcnseg/chebyshev.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace gcnseg {

ChebCoeffs::ChebCoeffs(std::vector<double> alpha) : alpha_(std::move(alpha)) {
  if (alpha_.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "Chebyshev filter needs at least one coefficient");
  }
  for (double a : alpha_) {
    if (!std::isfinite(a)) {
      throw Error(ErrorKind::kInvalidArgument, "Chebyshev coefficient is not finite");
    }
  }
}

double ChebCoeffs::response(double x) const {
  double prev = 1.0;
  double cur = x;
  double acc = alpha_[0] * prev;
  if (alpha_.size() > 1) acc += alpha_[1] * cur;
  for (std::size_t k = 2; k < alpha_.size(); ++k) {
    const double next = 2.0 * x * cur - prev;
    acc += alpha_[k] * next;
    prev = cur;
    cur = next;
  }
  return acc;
}

double chebyshev_t(std::size_t k, double x) {
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (std::size_t i = 2; i <= k; ++i) {
    const double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double lambda_max(const Graph& g, const PowerIterationOptions& options) {
  const std::size_t n = g.num_nodes();
  if (n == 0) throw Error(ErrorKind::kInvalidDimension, "lambda_max: empty graph");
  double total_weight = 0.0;
  for (const Edge& e : g.edges()) total_weight += e.weight;
  if (total_weight == 0.0) {
    throw Error(ErrorKind::kDegenerateSpectrum,
                "lambda_max: Laplacian is zero, 2/lambda_max scaling is undefined");
  }

  const SparseOperator lap = laplacian_operator(g);
  // splitmix64 of the index, mapped to [-0.5, 0.5).
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t z = (static_cast<std::uint64_t>(i) + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    v[i] = 1.0 + 1e-3 * (static_cast<double>(z >> 11) * 0x1.0p-53 - 0.5);
  }
  auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += e * e;
    const double norm = std::sqrt(s);
    for (double& e : x) e /= norm;
    return norm;
  };
  normalize(v);

  // Successive Rayleigh-quotient steps shrink geometrically with ratio q, so
  // step·q/(1 − q) estimates the distance still to go; it must stay within a
  // quarter of the bound.
  double rho = 0.0;
  double prev_step = 0.0;
  for (int it = 0; it < options.max_iter; ++it) {
    std::vector<double> w = lap.apply(v);
    double next_rho = 0.0;
    for (std::size_t i = 0; i < n; ++i) next_rho += v[i] * w[i];
    if (normalize(w) == 0.0) {
      throw Error(ErrorKind::kNumericalFailure, "lambda_max: iterate vanished");
    }
    v = std::move(w);
    if (it > 0) {
      const double step = std::abs(next_rho - rho);
      const double bound = options.tol * std::abs(next_rho);
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(next_rho);
      if (step <= noise) return next_rho * options.inflation;
      if (it > 1 && step <= bound && step < prev_step) {
        const double q = step / prev_step;
        if (step * q / (1.0 - q) <= 0.25 * bound) return next_rho * options.inflation;
      }
      prev_step = step;
    }
    rho = next_rho;
  }
  throw Error(ErrorKind::kNumericalFailure,
              "lambda_max: no convergence after " + std::to_string(options.max_iter) +
                  " iterations");
}

DenseOperator::DenseOperator(DenseMatrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) {
    throw Error(ErrorKind::kInvalidDimension, "operator matrix must be square");
  }
}

ScaledLaplacian::ScaledLaplacian(SparseOperator laplacian, double lam_max)
    : laplacian_(std::move(laplacian)), lam_max_(lam_max) {
  if (!(lam_max > 0.0) || !std::isfinite(lam_max)) {
    throw Error(ErrorKind::kInvalidArgument, "scaled Laplacian needs lam_max > 0");
  }
}

DenseMatrix ScaledLaplacian::apply(const DenseMatrix& x) const {
  DenseMatrix y = laplacian_.apply(x);
  const double scale = 2.0 / lam_max_;
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = scale * y.data()[i] - x.data()[i];
  return y;
}

DenseMatrix ScaledLaplacian::to_dense() const {
  return scaled_laplacian(laplacian_.to_dense(), lam_max_);
}

ScaledLaplacian scaled_laplacian(const Graph& g, double lam_max) {
  return ScaledLaplacian(laplacian_operator(g), lam_max);
}

DenseMatrix scaled_laplacian(const DenseMatrix& laplacian, double lam_max) {
  if (!(lam_max > 0.0) || !std::isfinite(lam_max)) {
    throw Error(ErrorKind::kInvalidArgument, "scaled Laplacian needs lam_max > 0");
  }
  if (laplacian.rows() != laplacian.cols()) {
    throw Error(ErrorKind::kInvalidDimension, "Laplacian must be square");
  }
  DenseMatrix out = (2.0 / lam_max) * laplacian;
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) -= 1.0;
  return out;
}

std::vector<double> chebyshev_multipliers(const ChebCoeffs& coeffs,
                                          std::span<const double> laplacian_eigenvalues,
                                          double lam_max) {
  if (!(lam_max > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "chebyshev_multipliers needs lam_max > 0");
  }
  std::vector<double> out;
  out.reserve(laplacian_eigenvalues.size());
  for (double lam : laplacian_eigenvalues) out.push_back(coeffs.response(2.0 * lam / lam_max - 1.0));
  return out;
}

}  // namespace gcnseg
