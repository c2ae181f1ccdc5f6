#pragma once

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cmsvkit/types.hpp"

namespace cmsvkit {

/// Largest singular value by power iteration on A^T A with a fixed
/// deterministic start vector.
template <typename Scalar>
Scalar spectral_norm(const MatrixX<Scalar>& A, int iterations = 100) {
  const Index n = A.cols();
  if (A.size() == 0) return Scalar(0);
  VectorX<Scalar> v = VectorX<Scalar>::LinSpaced(n, Scalar(1), Scalar(2));
  v.normalize();
  Scalar sigma = Scalar(0);
  for (int it = 0; it < iterations; ++it) {
    VectorX<Scalar> w = A.transpose() * (A * v);
    const Scalar norm = w.norm();
    if (norm == Scalar(0)) return Scalar(0);
    v = w / norm;
    sigma = std::sqrt(norm);
  }
  return (A * v).norm();
}

/// Euclidean projection onto the l1 ball of radius c (sort-based soft
/// threshold).
template <typename Scalar>
VectorX<Scalar> l1_ball_projection(const VectorX<Scalar>& v, Scalar c) {
  if (c < Scalar(0)) throw std::domain_error("l1_ball_projection: c must be >= 0");
  if (v.template lpNorm<1>() <= c) return v;
  const Index n = v.size();
  std::vector<Scalar> mags(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) mags[static_cast<std::size_t>(i)] = std::abs(v[i]);
  std::sort(mags.begin(), mags.end(), std::greater<Scalar>());
  Scalar cumulative = Scalar(0);
  Scalar tau = Scalar(0);
  for (Index j = 0; j < n; ++j) {
    cumulative += mags[static_cast<std::size_t>(j)];
    const Scalar candidate = (cumulative - c) / static_cast<Scalar>(j + 1);
    if (j + 1 == n || mags[static_cast<std::size_t>(j + 1)] <= candidate) {
      tau = candidate;
      break;
    }
  }
  VectorX<Scalar> out(n);
  for (Index i = 0; i < n; ++i) {
    const Scalar mag = std::abs(v[i]) - tau;
    out[i] = mag > Scalar(0) ? (v[i] > Scalar(0) ? mag : -mag) : Scalar(0);
  }
  return out;
}

/// Orthonormal basis of Ker A (columns), via full SVD with relative rank
/// threshold. Returns an N x 0 matrix for trivial kernels.
template <typename Scalar>
MatrixX<Scalar> kernel_basis(const MatrixX<Scalar>& A, Scalar rel_tol = Scalar(1e-12)) {
  const Index n = A.cols();
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(A, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const Scalar cutoff = sigma.size() > 0 ? sigma[0] * rel_tol * static_cast<Scalar>(std::max(A.rows(), n)) : Scalar(0);
  Index rank = 0;
  for (Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > cutoff) ++rank;
  return svd.matrixV().rightCols(n - rank);
}

/// Thin SVD bundle used by the solvers for repeated projections.
template <typename Scalar>
struct ThinSvd {
  MatrixX<Scalar> U;        // m x r
  MatrixX<Scalar> V;        // n x r
  VectorX<Scalar> sigma;    // r, descending, all > cutoff
  Index rank = 0;

  static ThinSvd compute(const MatrixX<Scalar>& A, Scalar rel_tol = Scalar(1e-13)) {
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const Scalar cutoff =
        s.size() > 0 ? s[0] * rel_tol * static_cast<Scalar>(std::max(A.rows(), A.cols())) : Scalar(0);
    Index r = 0;
    for (Index i = 0; i < s.size(); ++i)
      if (s[i] > cutoff) ++r;
    ThinSvd out;
    out.U = svd.matrixU().leftCols(r);
    out.V = svd.matrixV().leftCols(r);
    out.sigma = s.head(r);
    out.rank = r;
    return out;
  }
};

}  // namespace cmsvkit
