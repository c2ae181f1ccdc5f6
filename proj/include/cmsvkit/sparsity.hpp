#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cmsvkit/types.hpp"

namespace cmsvkit {

/// lq norm of a vector expression under the usual conventions:
/// q = 0 counts nonzeros, q = inf is the max magnitude, otherwise
/// (sum |z_i|^q)^{1/q}. Large and fractional q are evaluated with the
/// magnitudes factored by max|z_i| to avoid overflow/underflow.
template <typename Derived>
typename Derived::Scalar lq_norm(const Eigen::MatrixBase<Derived>& z, QExponent q) {
  using Scalar = typename Derived::Scalar;
  if (z.size() == 0) throw std::domain_error("lq_norm: empty vector");
  if (q.is_zero()) {
    Index count = 0;
    for (Index i = 0; i < z.size(); ++i)
      if (z.derived()(i) != Scalar(0)) ++count;
    return static_cast<Scalar>(count);
  }
  if (q.is_infinite()) return z.derived().cwiseAbs().maxCoeff();
  if (q.is_one()) return z.derived().template lpNorm<1>();
  if (q.value() == 2.0) return z.derived().norm();
  const Scalar peak = z.derived().cwiseAbs().maxCoeff();
  if (peak == Scalar(0)) return Scalar(0);
  Scalar sum = Scalar(0);
  for (Index i = 0; i < z.size(); ++i) {
    const Scalar r = std::abs(z.derived()(i)) / peak;
    if (r > Scalar(0)) sum += std::pow(r, static_cast<Scalar>(q.value()));
  }
  return peak * std::pow(sum, Scalar(1) / static_cast<Scalar>(q.value()));
}

template <typename Scalar>
struct SparsityValue {
  QExponent q;
  Scalar value = Scalar(1);
};

/// q-ratio sparsity s_q(z) = (||z||_1 / ||z||_q)^{q/(q-1)} with the limit
/// cases: s_0 = ||z||_0, s_1 = exp(H(pi(z))) for the Shannon entropy H in
/// nats with pi_i = |z_i|/||z||_1, and s_inf = ||z||_1 / ||z||_inf.
/// Scale-invariant; ranges over [1, N] for nonzero z of length N.
template <typename Derived>
SparsityValue<typename Derived::Scalar> q_ratio_sparsity(const Eigen::MatrixBase<Derived>& z,
                                                         QExponent q) {
  using Scalar = typename Derived::Scalar;
  if (z.size() == 0) throw std::domain_error("q_ratio_sparsity: empty vector");
  const Scalar l1 = z.derived().template lpNorm<1>();
  if (l1 == Scalar(0)) throw std::domain_error("q_ratio_sparsity: undefined at the origin");

  if (q.is_zero()) return {q, lq_norm(z, q)};
  if (q.is_one()) {
    Scalar entropy = Scalar(0);
    for (Index i = 0; i < z.size(); ++i) {
      const Scalar p = std::abs(z.derived()(i)) / l1;
      if (p > Scalar(0)) entropy -= p * std::log(p);  // 0*log 0 := 0
    }
    return {q, std::exp(entropy)};
  }
  if (q.is_infinite()) return {q, l1 / z.derived().cwiseAbs().maxCoeff()};

  const Scalar lq = lq_norm(z, q);
  const double exponent = q.value() / (q.value() - 1.0);
  return {q, std::pow(l1 / lq, static_cast<Scalar>(exponent))};
}

template <typename Scalar>
struct BestKTerm {
  Scalar sigma = Scalar(0);           // ||x_{S^c}||_1
  std::vector<Index> support;         // k indices, ascending
};

/// Best k-term approximation error sigma_k(x)_1 together with the retained
/// support. Magnitude ties are broken toward the lower index so the result
/// is deterministic.
template <typename Derived>
BestKTerm<typename Derived::Scalar> best_k_term_error(const Eigen::MatrixBase<Derived>& x,
                                                      Index k) {
  using Scalar = typename Derived::Scalar;
  const Index n = x.size();
  if (k < 1 || k > n) throw std::domain_error("best_k_term_error: k must satisfy 1 <= k <= N");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(x.derived()(a)) > std::abs(x.derived()(b));
  });

  BestKTerm<Scalar> result;
  result.support.assign(order.begin(), order.begin() + k);
  std::sort(result.support.begin(), result.support.end());
  for (Index i = k; i < n; ++i) result.sigma += std::abs(x.derived()(order[static_cast<std::size_t>(i)]));
  return result;
}

template <typename Scalar>
BestKTerm<Scalar> best_k_term_error(const Signal<Scalar>& x, Index k) {
  return best_k_term_error(x.entries, k);
}

}  // namespace cmsvkit
