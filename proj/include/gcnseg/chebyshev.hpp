#pragma once

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "gcnseg/error.hpp"
#include "gcnseg/graph.hpp"
#include "gcnseg/matrix.hpp"

namespace gcnseg {

// Filter coefficients α_0..α_r of g(λ̃) = Σ α_k T_k(λ̃).
class ChebCoeffs {
 public:
  // Throws kInvalidArgument if empty or any entry is non-finite.
  explicit ChebCoeffs(std::vector<double> alpha);

  std::size_t order() const noexcept { return alpha_.size() - 1; }
  const std::vector<double>& alpha() const noexcept { return alpha_; }

  // Scalar frequency response Σ α_k T_k(x).
  double response(double x) const;

 private:
  std::vector<double> alpha_;
};

// T_k(x) by the three-term recurrence.
double chebyshev_t(std::size_t k, double x);

struct PowerIterationOptions {
  double tol = 1e-7;
  int max_iter = 10000;
  // Multiplies the converged estimate.
  double inflation = 1.0;
};

// Largest Laplacian eigenvalue by power iteration, started from the all-ones
// vector plus a small deterministic index-dependent perturbation. Stops when
// consecutive Rayleigh quotients differ by at most tol * estimate and the
// geometric extrapolation of the remaining change is within the same bound.
//
// Throws kDegenerateSpectrum when L = 0 and kNumericalFailure when
// max_iter is reached.
double lambda_max(const Graph& g, const PowerIterationOptions& options = {});

// Anything that maps an n×d signal matrix to another n×d signal matrix.
template <typename Op>
concept SignalOperator = requires(const Op& op, const DenseMatrix& x) {
  { op.size() } -> std::convertible_to<std::size_t>;
  { op.apply(x) } -> std::convertible_to<DenseMatrix>;
};

class DenseOperator {
 public:
  explicit DenseOperator(DenseMatrix m);
  std::size_t size() const noexcept { return m_.rows(); }
  DenseMatrix apply(const DenseMatrix& x) const { return matmul(m_, x); }
  const DenseMatrix& matrix() const noexcept { return m_; }

 private:
  DenseMatrix m_;
};

// L̃ = (2 / λ_max) L − I applied matrix-free on top of a sparse Laplacian.
class ScaledLaplacian {
 public:
  ScaledLaplacian(SparseOperator laplacian, double lam_max);

  std::size_t size() const noexcept { return laplacian_.size(); }
  double lam_max() const noexcept { return lam_max_; }
  DenseMatrix apply(const DenseMatrix& x) const;
  DenseMatrix to_dense() const;

 private:
  SparseOperator laplacian_;
  double lam_max_;
};

ScaledLaplacian scaled_laplacian(const Graph& g, double lam_max);
// Dense form, used by the oracle checks. Throws kInvalidArgument if lam_max <= 0.
DenseMatrix scaled_laplacian(const DenseMatrix& laplacian, double lam_max);

// Maps Laplacian eigenvalues through λ ↦ 2λ/λ_max − 1 and the filter response.
std::vector<double> chebyshev_multipliers(const ChebCoeffs& coeffs,
                                          std::span<const double> laplacian_eigenvalues,
                                          double lam_max);

// Σ α_k T_k(L̃) f by the recurrence T_0 f = f, T_1 f = L̃ f,
// T_k f = 2 L̃ T_{k−1} f − T_{k−2} f. Never forms T_k(L̃).
template <SignalOperator Op>
DenseMatrix cheb_apply(const Op& scaled_op, const ChebCoeffs& coeffs, const DenseMatrix& f) {
  if (f.rows() != scaled_op.size()) {
    throw Error(ErrorKind::kInvalidDimension, "cheb_apply: signal has " +
                                                  std::to_string(f.rows()) + " rows, operator " +
                                                  std::to_string(scaled_op.size()));
  }
  const auto& alpha = coeffs.alpha();
  auto axpy = [](DenseMatrix& acc, double a, const DenseMatrix& x) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += a * x.data()[i];
  };

  DenseMatrix out(f.rows(), f.cols());
  DenseMatrix prev = f;  // T_0 f
  axpy(out, alpha[0], prev);
  if (alpha.size() == 1) return out;

  DenseMatrix cur = scaled_op.apply(f);  // T_1 f
  axpy(out, alpha[1], cur);
  for (std::size_t k = 2; k < alpha.size(); ++k) {
    DenseMatrix next = scaled_op.apply(cur);
    for (std::size_t i = 0; i < next.size(); ++i)
      next.data()[i] = 2.0 * next.data()[i] - prev.data()[i];
    axpy(out, alpha[k], next);
    prev = std::move(cur);
    cur = std::move(next);
  }
  return out;
}

}  // namespace gcnseg
