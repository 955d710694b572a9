#include "gcnseg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gcnseg/error.hpp"

namespace gcnseg {

namespace {

double off_diagonal_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Applies the Jacobi rotation that zeroes a(p, q) to both a (two-sided) and
// the accumulated eigenvector matrix v (right side).
void rotate(DenseMatrix& a, DenseMatrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double app = a(p, p);
  const double aqq = a(q, q);
  const double theta = (aqq - app) / (2.0 * apq);
  const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const std::size_t n = a.rows();

  for (std::size_t k = 0; k < n; ++k) {
    if (k == p || k == q) continue;
    const double akp = a(k, p);
    const double akq = a(k, q);
    const double nkp = c * akp - s * akq;
    const double nkq = s * akp + c * akq;
    a(k, p) = a(p, k) = nkp;
    a(k, q) = a(q, k) = nkq;
  }
  a(p, p) = app - t * apq;
  a(q, q) = aqq + t * apq;
  a(p, q) = a(q, p) = 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorKind::kInvalidDimension, std::string(what) + ": length " +
                                                  std::to_string(got) + ", expected " +
                                                  std::to_string(want));
  }
}

}  // namespace

SpectralDecomposition eig_sym(const DenseMatrix& m, const EigOptions& options) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::kContractViolation, "eig_sym: matrix is not square");
  }
  const std::size_t n = m.rows();
  if (n > options.max_size) {
    throw Error(ErrorKind::kContractViolation,
                "eig_sym: size " + std::to_string(n) + " exceeds oracle limit " +
                    std::to_string(options.max_size));
  }
  if (const double asym = asymmetry(m); asym > options.symmetry_tol) {
    throw Error(ErrorKind::kContractViolation,
                "eig_sym: matrix is not symmetric (max |m - m^T| = " + std::to_string(asym) + ")");
  }

  DenseMatrix a = m;
  DenseMatrix v = DenseMatrix::identity(n);
  const double threshold = options.tol * std::max(1.0, frobenius_norm(m));

  bool converged = off_diagonal_norm(a) < threshold;
  for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) rotate(a, v, p, q);
    converged = off_diagonal_norm(a) < threshold;
  }
  if (!converged) {
    throw Error(ErrorKind::kNumericalFailure,
                "eig_sym: no convergence after " + std::to_string(options.max_sweeps) + " sweeps");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&a](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  SpectralDecomposition dec{DenseMatrix(n, n), std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    dec.lambda[k] = a(src, src);
    double sign = 1.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (v(r, src) != 0.0) {
        sign = v(r, src) < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
    for (std::size_t r = 0; r < n; ++r) dec.phi(r, k) = sign * v(r, src);
  }
  return dec;
}

std::vector<double> graph_fourier(const SpectralDecomposition& dec, std::span<const double> f) {
  require_length(f.size(), dec.size(), "graph_fourier");
  const std::size_t n = dec.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto phi_row = dec.phi.row(r);
    for (std::size_t k = 0; k < n; ++k) out[k] += phi_row[k] * f[r];
  }
  return out;
}

std::vector<double> inverse_graph_fourier(const SpectralDecomposition& dec,
                                          std::span<const double> f_hat) {
  require_length(f_hat.size(), dec.size(), "inverse_graph_fourier");
  return matvec(dec.phi, f_hat);
}

std::vector<double> spectral_filter(const SpectralDecomposition& dec,
                                    std::span<const double> g_hat, std::span<const double> f) {
  require_length(g_hat.size(), dec.size(), "spectral_filter multipliers");
  require_length(f.size(), dec.size(), "spectral_filter signal");
  std::vector<double> coeffs = graph_fourier(dec, f);
  for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[k] *= g_hat[k];
  return inverse_graph_fourier(dec, coeffs);
}

DenseMatrix spectral_filter(const SpectralDecomposition& dec, std::span<const double> g_hat,
                            const DenseMatrix& f) {
  require_length(f.rows(), dec.size(), "spectral_filter signal");
  DenseMatrix out(f.rows(), f.cols());
  for (std::size_t c = 0; c < f.cols(); ++c) {
    std::vector<double> col = spectral_filter(dec, g_hat, f.column_values(c));
    for (std::size_t r = 0; r < f.rows(); ++r) out(r, c) = col[r];
  }
  return out;
}

DenseMatrix reconstruct(const SpectralDecomposition& dec) {
  DenseMatrix scaled = dec.phi;
  for (std::size_t r = 0; r < scaled.rows(); ++r)
    for (std::size_t k = 0; k < scaled.cols(); ++k) scaled(r, k) *= dec.lambda[k];
  return matmul_nt(scaled, dec.phi);
}

}  // namespace gcnseg
