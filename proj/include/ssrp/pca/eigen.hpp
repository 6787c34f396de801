#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ssrp/error.hpp"
#include "ssrp/matrix.hpp"

namespace ssrp::pca {

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
  int sweeps = 0;
};

/// Flips each column so its largest-magnitude entry is positive (first such
/// entry on exact magnitude ties).
inline void canonicalize_signs(Matrix& vectors) {
  for (std::size_t j = 0; j < vectors.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < vectors.rows(); ++i)
      if (std::abs(vectors(i, j)) > std::abs(vectors(best, j))) best = i;
    if (vectors(best, j) < 0.0)
      for (std::size_t i = 0; i < vectors.rows(); ++i) vectors(i, j) = -vectors(i, j);
  }
}

/// Cyclic Jacobi eigensolver for a real symmetric matrix.
///
/// Sweeps rotate away every off-diagonal entry in row order until the
/// off-diagonal Frobenius norm drops below `rel_tol * ||A||_F` or
/// `max_sweeps` is reached. Eigenvalues come back sorted descending with
/// sign-canonical eigenvectors.
inline EigenDecomposition symmetric_eigendecomposition(const Matrix& sigma,
                                                       double rel_tol = 1e-10,
                                                       int max_sweeps = 100) {
  require(sigma.rows() == sigma.cols(), ErrorKind::kShape, "eigendecomposition needs a square matrix");
  const std::size_t n = sigma.rows();
  const double norm = frobenius_norm(sigma);
  if (max_asymmetry(sigma) > 1e-8 * std::max(1.0, norm))
    fail(ErrorKind::kContract, "eigendecomposition input is not symmetric");

  Matrix a = sigma;
  // Symmetrize exactly so rotations act on one consistent triangle.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
  Matrix v = Matrix::identity(n);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  EigenDecomposition out;
  const double target = rel_tol * norm;
  while (out.sweeps < max_sweeps && off_norm() > target) {
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;

        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  canonicalize_signs(out.vectors);
  return out;
}

}  // namespace ssrp::pca
