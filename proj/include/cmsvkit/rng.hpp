#pragma once

#include <cstdint>
#include <random>

#include "cmsvkit/types.hpp"

namespace cmsvkit {

/// splitmix64 step; the de-facto standard 64-bit mixer.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Stable seed derivation: hashes the parts into one stream seed so that
/// per-restart / per-trial streams are reproducible independently of
/// execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t state = master;
  std::uint64_t h = splitmix64(state);
  state ^= a * 0xd6e8feb86659fd93ull;
  h ^= splitmix64(state);
  state ^= b * 0xa5a5a5a5a5a5a5a5ull;
  h ^= splitmix64(state);
  state ^= c * 0xc2b2ae3d27d4eb4full;
  h ^= splitmix64(state);
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

template <typename Scalar>
VectorX<Scalar> gaussian_vector(Rng& rng, Index n) {
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  VectorX<Scalar> v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

/// Sample on the unit lq sphere. For finite q the per-coordinate law is the
/// generalized normal exp(-|x|^q) (gamma transform), which is uniform on the
/// sphere after normalization; for q = inf coordinates are uniform on [-1,1].
template <typename Scalar>
VectorX<Scalar> lq_sphere_sample(Rng& rng, Index n, QExponent q) {
  VectorX<Scalar> v(n);
  if (q.is_infinite()) {
    std::uniform_real_distribution<Scalar> unif(Scalar(-1), Scalar(1));
    for (Index i = 0; i < n; ++i) v[i] = unif(rng);
    Scalar peak = v.cwiseAbs().maxCoeff();
    if (peak == Scalar(0)) { v.setZero(); v[0] = Scalar(1); peak = Scalar(1); }
    return v / peak;
  }
  std::gamma_distribution<Scalar> gamma(Scalar(1) / static_cast<Scalar>(q.value()), Scalar(1));
  std::uniform_int_distribution<int> coin(0, 1);
  for (Index i = 0; i < n; ++i) {
    const Scalar mag = std::pow(gamma(rng), Scalar(1) / static_cast<Scalar>(q.value()));
    v[i] = coin(rng) ? mag : -mag;
  }
  Scalar norm = Scalar(0);
  {
    const Scalar peak = v.cwiseAbs().maxCoeff();
    if (peak == Scalar(0)) { v.setZero(); v[0] = Scalar(1); return v; }
    Scalar sum = Scalar(0);
    for (Index i = 0; i < n; ++i) sum += std::pow(std::abs(v[i]) / peak, static_cast<Scalar>(q.value()));
    norm = peak * std::pow(sum, Scalar(1) / static_cast<Scalar>(q.value()));
  }
  return v / norm;
}

/// Random p-sparse +-1 pattern (support by partial Fisher-Yates).
template <typename Scalar>
VectorX<Scalar> sparse_sign_pattern(Rng& rng, Index n, Index p) {
  p = std::min(std::max<Index>(p, 1), n);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index(0));
  VectorX<Scalar> v = VectorX<Scalar>::Zero(n);
  std::uniform_int_distribution<int> coin(0, 1);
  for (Index j = 0; j < p; ++j) {
    std::uniform_int_distribution<Index> pick(j, n - 1);
    std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick(rng))]);
    v[idx[static_cast<std::size_t>(j)]] = coin(rng) ? Scalar(1) : Scalar(-1);
  }
  return v;
}

}  // namespace cmsvkit
