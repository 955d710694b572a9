#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gcnseg/matrix.hpp"

namespace gcnseg {

// Orthonormal eigenvectors (columns of phi) and ascending eigenvalues of a
// symmetric matrix: M = Φ Λ Φᵀ.
struct SpectralDecomposition {
  DenseMatrix phi;
  std::vector<double> lambda;

  std::size_t size() const noexcept { return lambda.size(); }
};

struct EigOptions {
  // Sweeps stop once the off-diagonal Frobenius norm drops below
  // tol * max(1, ‖M‖_F).
  double tol = 1e-12;
  int max_sweeps = 100;
  std::size_t max_size = 4096;
  double symmetry_tol = 1e-12;
};

// Cyclic Jacobi eigensolver.
//
// Each eigenvector is sign-normalized so that its first nonzero component is
// nonnegative; ties in eigenvalue keep Jacobi output order (stable sort).
//
// Throws kContractViolation for an asymmetric or oversized input and
// kNumericalFailure if the sweep cap is reached.
SpectralDecomposition eig_sym(const DenseMatrix& m, const EigOptions& options = {});

// f̂ = Φᵀ f
std::vector<double> graph_fourier(const SpectralDecomposition& dec, std::span<const double> f);
// f = Φ f̂
std::vector<double> inverse_graph_fourier(const SpectralDecomposition& dec,
                                          std::span<const double> f_hat);

// Φ · diag(ĝ) · Φᵀ f
std::vector<double> spectral_filter(const SpectralDecomposition& dec,
                                    std::span<const double> g_hat, std::span<const double> f);
// Column-wise spectral_filter for an n×d signal matrix.
DenseMatrix spectral_filter(const SpectralDecomposition& dec, std::span<const double> g_hat,
                            const DenseMatrix& f);

// Φ Λ Φᵀ, used for reconstruction checks.
DenseMatrix reconstruct(const SpectralDecomposition& dec);

}  // namespace gcnseg
