#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "cmsvkit/rng.hpp"
#include "cmsvkit/types.hpp"

namespace cmsvkit {

enum class Normalization { unit_row_l2, one_over_sqrt_m };

inline const char* to_string(Normalization n) {
  return n == Normalization::unit_row_l2 ? "unit_row_l2" : "one_over_sqrt_m";
}

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "unit_row_l2") return Normalization::unit_row_l2;
  if (s == "one_over_sqrt_m") return Normalization::one_over_sqrt_m;
  throw std::invalid_argument("unknown normalization: " + s);
}

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::gaussian;
  Index m = 1;
  Index n = 1;
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::unit_row_l2;

  void validate() const {
    if (m < 1 || n < 1) throw std::domain_error("EnsembleSpec: m >= 1 and N >= 1 required");
    if (kind == EnsembleKind::partial_hadamard && (n & (n - 1)) != 0)
      throw std::domain_error("EnsembleSpec: partial_hadamard requires N to be a power of 2");
    if (kind == EnsembleKind::unknown) throw std::domain_error("EnsembleSpec: kind required");
  }
};

/// Sylvester Hadamard matrix scaled by 1/sqrt(N): orthonormal rows with
/// |entries| = 1/sqrt(N), so the flatness constant is M = 1.
template <typename Scalar>
MatrixX<Scalar> hadamard_system(Index n) {
  if (n < 1 || (n & (n - 1)) != 0)
    throw std::domain_error("hadamard_system: N must be a power of 2");
  MatrixX<Scalar> H(1, 1);
  H(0, 0) = Scalar(1);
  for (Index size = 1; size < n; size *= 2) {
    MatrixX<Scalar> next(2 * size, 2 * size);
    next.topLeftCorner(size, size) = H;
    next.topRightCorner(size, size) = H;
    next.bottomLeftCorner(size, size) = H;
    next.bottomRightCorner(size, size) = -H;
    H = std::move(next);
  }
  return H / std::sqrt(static_cast<Scalar>(n));
}

/// Orthogonal DCT-II system scaled by 1/sqrt(2). The plain orthonormal
/// DCT-II has peak entries near sqrt(2/N); the extra 1/sqrt(2) brings every
/// entry under the 1/sqrt(N) flatness bound while keeping rows orthogonal
/// with common norm M = 1/sqrt(2).
template <typename Scalar>
MatrixX<Scalar> dct_system(Index n) {
  if (n < 1) throw std::domain_error("dct_system: N >= 1 required");
  MatrixX<Scalar> D(n, n);
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  const Scalar c0 = std::sqrt(Scalar(1) / static_cast<Scalar>(n));
  const Scalar ck = std::sqrt(Scalar(2) / static_cast<Scalar>(n));
  for (Index k = 0; k < n; ++k) {
    const Scalar scale = (k == 0 ? c0 : ck) * inv_sqrt2;
    for (Index j = 0; j < n; ++j) {
      const double angle = std::numbers::pi * static_cast<double>(k) *
                           (2.0 * static_cast<double>(j) + 1.0) / (2.0 * static_cast<double>(n));
      D(k, j) = scale * static_cast<Scalar>(std::cos(angle));
    }
  }
  return D;
}

/// Draws a measurement matrix. Row-sampled ensembles pick m parent rows
/// i.i.d. uniformly with replacement (duplicates may occur and are kept);
/// the draws are recorded in row_indices.
template <typename Scalar>
MeasurementMatrix<Scalar> generate(const EnsembleSpec& spec) {
  spec.validate();
  Rng rng = make_rng(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.kind) + 1));

  MeasurementMatrix<Scalar> out;
  out.kind = spec.kind;
  out.seed = spec.seed;

  switch (spec.kind) {
    case EnsembleKind::gaussian: {
      MatrixX<Scalar> A(spec.m, spec.n);
      std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
      for (Index i = 0; i < spec.m; ++i)
        for (Index j = 0; j < spec.n; ++j) A(i, j) = normal(rng);
      if (spec.normalization == Normalization::unit_row_l2) {
        for (Index i = 0; i < spec.m; ++i) A.row(i) /= A.row(i).norm();
        out.row_l2 = Scalar(1);
      } else {
        A /= std::sqrt(static_cast<Scalar>(spec.m));
        out.row_l2 = Scalar(0);  // rows not equal-norm
      }
      out.entries = std::move(A);
      break;
    }
    case EnsembleKind::rademacher: {
      MatrixX<Scalar> A(spec.m, spec.n);
      std::uniform_int_distribution<int> coin(0, 1);
      for (Index i = 0; i < spec.m; ++i)
        for (Index j = 0; j < spec.n; ++j) A(i, j) = coin(rng) ? Scalar(1) : Scalar(-1);
      if (spec.normalization == Normalization::unit_row_l2) {
        A /= std::sqrt(static_cast<Scalar>(spec.n));
        out.row_l2 = Scalar(1);
      } else {
        A /= std::sqrt(static_cast<Scalar>(spec.m));
        out.row_l2 = std::sqrt(static_cast<Scalar>(spec.n) / static_cast<Scalar>(spec.m));
      }
      out.entries = std::move(A);
      break;
    }
    case EnsembleKind::partial_hadamard:
    case EnsembleKind::partial_dct: {
      const MatrixX<Scalar> parent = spec.kind == EnsembleKind::partial_hadamard
                                         ? hadamard_system<Scalar>(spec.n)
                                         : dct_system<Scalar>(spec.n);
      // common row norms are known in closed form: 1 and 1/sqrt(2)
      Scalar row_norm = spec.kind == EnsembleKind::partial_hadamard
                            ? Scalar(1)
                            : Scalar(1) / std::sqrt(Scalar(2));
      std::uniform_int_distribution<Index> pick(0, spec.n - 1);
      MatrixX<Scalar> A(spec.m, spec.n);
      out.row_indices.reserve(static_cast<std::size_t>(spec.m));
      for (Index i = 0; i < spec.m; ++i) {
        const Index r = pick(rng);
        out.row_indices.push_back(r);
        A.row(i) = parent.row(r);
      }
      if (spec.normalization == Normalization::one_over_sqrt_m) {
        A /= std::sqrt(static_cast<Scalar>(spec.m));
        row_norm /= std::sqrt(static_cast<Scalar>(spec.m));
      }
      out.row_l2 = row_norm;
      out.entries = std::move(A);
      break;
    }
    default:
      throw std::domain_error("generate: unknown ensemble kind");
  }
  return out;
}

/// Sample-complexity query for the structured-ensemble threshold. C is the
/// unspecified absolute constant of the underlying concentration bound and is
/// a free input, never asserted.
struct ComplexityQuery {
  double delta = 2.0;
  Index k = 1;
  Index n = 2;
  double M = 1.0;
  double C = 1.0;
  QExponent q{2.0};

  void validate() const {
    if (!(delta >= 1.0)) throw std::domain_error("ComplexityQuery: delta >= 1 required");
    if (k < 1 || n < 1 || k > n) throw std::domain_error("ComplexityQuery: need 1 <= k <= N");
    if (!(M > 0.0) || !(C > 0.0)) throw std::domain_error("ComplexityQuery: M, C > 0 required");
    q.require_cmsv_domain();
  }
};

struct MinMeasurements {
  std::uint64_t m = 2;
  bool reachable = true;
  bool branch_q_below_2 = false;
};

inline constexpr std::uint64_t kMinMeasurementsCap = 1000000000ull;

namespace detail {

/// Right-hand side of the implicit threshold inequality; natural logs. The
/// q < 2 branch carries delta^{q/(q-1)} and k; the q >= 2 branch carries
/// delta^2 and k^{2(q-1)/q}. Both coincide at q = 2.
inline double sample_complexity_rhs(double m, const ComplexityQuery& query) {
  const double log_m = std::log(m);
  const double log_n = std::log(static_cast<double>(query.n));
  const double base = 9.0 * query.C * query.C * log_m * log_m * log_m * log_n / (query.M * query.M);
  if (query.q.value() < 2.0) {
    return base * std::pow(query.delta, query.q.theta()) * static_cast<double>(query.k);
  }
  return base * query.delta * query.delta *
         std::pow(static_cast<double>(query.k), 2.0 * query.q.one_minus_inv_q());
}

}  // namespace detail

/// Smallest integer m with m >= RHS(m), by the monotone fixed-point
/// iteration m <- max(2, ceil(RHS(m))) started at m = 2. RHS is increasing
/// in m, so the iteration climbs monotonically to the least solution; runs
/// past the cap signal an unreachable threshold.
inline MinMeasurements min_measurements(const ComplexityQuery& query) {
  query.validate();
  MinMeasurements out;
  out.branch_q_below_2 = query.q.value() < 2.0;
  std::uint64_t m = 2;
  for (int it = 0; it < 10000; ++it) {
    const double rhs = detail::sample_complexity_rhs(static_cast<double>(m), query);
    if (rhs > static_cast<double>(kMinMeasurementsCap)) {
      out.reachable = false;
      out.m = kMinMeasurementsCap;
      return out;
    }
    const std::uint64_t next = std::max<std::uint64_t>(2, static_cast<std::uint64_t>(std::ceil(rhs)));
    if (next <= m) {
      out.m = m;
      return out;
    }
    m = next;
  }
  out.reachable = false;
  out.m = kMinMeasurementsCap;
  return out;
}

enum class MagnitudeLaw { unit, gaussian, flat_decay };

inline const char* to_string(MagnitudeLaw law) {
  switch (law) {
    case MagnitudeLaw::unit: return "unit";
    case MagnitudeLaw::gaussian: return "gaussian";
    default: return "flat_decay";
  }
}

inline MagnitudeLaw magnitude_law_from_string(const std::string& s) {
  if (s == "unit") return MagnitudeLaw::unit;
  if (s == "gaussian") return MagnitudeLaw::gaussian;
  if (s == "flat_decay") return MagnitudeLaw::flat_decay;
  throw std::invalid_argument("unknown magnitude law: " + s);
}

/// Test-signal factory. unit/gaussian draw a uniformly random k-subset with
/// random signs; flat_decay(p) fills all N positions with sorted magnitudes
/// i^{-p} (compressible, not exactly sparse) at random positions, recording k
/// as the target sparsity only.
template <typename Scalar>
Signal<Scalar> sparse_signal(Index n, Index k, std::uint64_t seed, MagnitudeLaw law,
                             double decay_p = 1.0) {
  if (k < 1 || k > n) throw std::domain_error("sparse_signal: need 1 <= k <= N");
  Rng rng = make_rng(derive_seed(seed, 0x51c9a1ull));

  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index(0));
  for (Index j = 0; j < n - 1; ++j) {
    std::uniform_int_distribution<Index> pick(j, n - 1);
    std::swap(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(pick(rng))]);
  }

  std::uniform_int_distribution<int> coin(0, 1);
  Signal<Scalar> signal;
  signal.entries = VectorX<Scalar>::Zero(n);
  signal.k = k;

  if (law == MagnitudeLaw::flat_decay) {
    for (Index i = 0; i < n; ++i) {
      const Scalar mag = std::pow(static_cast<Scalar>(i + 1), static_cast<Scalar>(-decay_p));
      signal.entries[perm[static_cast<std::size_t>(i)]] = coin(rng) ? mag : -mag;
    }
    return signal;
  }

  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  std::vector<Index> support(perm.begin(), perm.begin() + k);
  std::sort(support.begin(), support.end());
  for (Index i : support) {
    const Scalar mag = law == MagnitudeLaw::unit ? Scalar(1) : std::abs(normal(rng));
    signal.entries[i] = coin(rng) ? mag : -mag;
  }
  signal.true_support = std::move(support);
  return signal;
}

}  // namespace cmsvkit
