#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cmsvkit/linalg.hpp"
#include "cmsvkit/rng.hpp"
#include "cmsvkit/sparsity.hpp"
#include "cmsvkit/types.hpp"

namespace cmsvkit {

enum class CmsvMethod { multistart, oracle };

/// Estimate of rho_{q,s}(A). The value is an upper bound on the true
/// minimum: any feasible witness bounds a minimum from above. The witness is
/// kept on the unit q-sphere so value = ||A w||_2.
template <typename Scalar>
struct CmsvEstimate {
  QExponent q;
  Scalar s = Scalar(1);
  Scalar value = Scalar(0);
  VectorX<Scalar> witness;
  CmsvMethod method = CmsvMethod::multistart;
  std::int64_t restarts = 0;
  Scalar converged_fraction = Scalar(0);
  Scalar matrix_scale = Scalar(0);  // spectral norm of A, used for positivity thresholds
};

template <typename Scalar>
struct WidthEstimate {
  QExponent q;
  Scalar r = Scalar(1);
  Scalar value = Scalar(0);
  VectorX<Scalar> witness;  // ||witness||_q = r, ||witness||_1 <= 1
};

template <typename Scalar>
struct RadiusEstimate {
  QExponent q;
  Scalar alpha = Scalar(0);
  Scalar value = Scalar(0);      // lower bound on the supremum
  VectorX<Scalar> witness;       // ||A witness||_2 <= alpha, ||witness||_1 <= 1
};

struct SearchBudget {
  int restarts = 64;
  int max_iters = 500;
  std::uint64_t seed = 0;
};

struct OracleOptions {
  std::uint64_t seed = 0x0c0ffee5eedull;
  int max_polish_sweeps = 160;
  int top_candidates = 8;
};

namespace detail {

// Smoothing surrogate for the nonsmooth l_inf sphere during local search;
// the reported value is always re-evaluated on the true set.
inline QExponent search_exponent(QExponent q) {
  return q.is_infinite() ? QExponent(64.0) : q;
}

template <typename Scalar>
Scalar l1_lq_ratio(const VectorX<Scalar>& v, QExponent q) {
  const Scalar lq = lq_norm(v, q);
  if (lq == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return v.template lpNorm<1>() / lq;
}

template <typename Scalar>
VectorX<Scalar> soft_threshold(const VectorX<Scalar>& v, Scalar tau) {
  VectorX<Scalar> out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const Scalar mag = std::abs(v[i]) - tau;
    out[i] = mag > Scalar(0) ? (v[i] > Scalar(0) ? mag : -mag) : Scalar(0);
  }
  return out;
}

/// Retraction onto {||z||_q = 1, ||z||_1 <= cap}. Normalizes to the q-sphere
/// and, when the l1 cap is violated, shrinks small entries by a bisected soft
/// threshold (the ratio ||.||_1/||.||_q is scale invariant, so thresholding
/// then renormalizing lands on the cap boundary). When the threshold path
/// stalls on tied peak magnitudes, the point is blended toward its dominant
/// coordinate instead, which always reaches ratio 1.
template <typename Scalar>
VectorX<Scalar> project_sphere_cap(const VectorX<Scalar>& v, QExponent q, Scalar cap) {
  const Index n = v.size();
  VectorX<Scalar> w = v;
  Scalar lq = lq_norm(w, q);
  if (!(lq > Scalar(0)) || !w.allFinite()) {
    w.setZero();
    w[0] = Scalar(1);
    return w;
  }
  w /= lq;
  if (w.template lpNorm<1>() <= cap) return w;

  const Scalar peak = w.cwiseAbs().maxCoeff();
  const Scalar hi_tau = peak * (Scalar(1) - Scalar(1e-12));
  if (l1_lq_ratio(soft_threshold(w, hi_tau), q) <= cap) {
    Scalar lo = Scalar(0), hi = hi_tau;
    for (int it = 0; it < 100; ++it) {
      const Scalar mid = (lo + hi) / Scalar(2);
      if (l1_lq_ratio(soft_threshold(w, mid), q) > cap)
        lo = mid;
      else
        hi = mid;
    }
    w = soft_threshold(w, hi);
  } else {
    // tie plateau: move toward the dominant coordinate
    Index j = 0;
    w.cwiseAbs().maxCoeff(&j);
    VectorX<Scalar> anchor = VectorX<Scalar>::Zero(n);
    anchor[j] = w[j] > Scalar(0) ? Scalar(1) : Scalar(-1);
    Scalar lo = Scalar(0), hi = Scalar(1);
    for (int it = 0; it < 100; ++it) {
      const Scalar mid = (lo + hi) / Scalar(2);
      const VectorX<Scalar> blend = (Scalar(1) - mid) * w + mid * anchor;
      if (l1_lq_ratio(blend, q) > cap)
        lo = mid;
      else
        hi = mid;
    }
    w = (Scalar(1) - hi) * w + hi * anchor;
  }
  w /= lq_norm(w, q);
  return w;
}

template <typename Scalar>
struct CoreResult {
  VectorX<Scalar> witness;
  Scalar value = Scalar(0);
  Scalar converged_fraction = Scalar(0);
};

/// Multi-start projected descent for min ||Az||_2 over the unit q-sphere
/// intersected with {||z||_1 <= cap}. Deterministic given the budget seed;
/// restart r draws from its own stream derive_seed(seed, r). Half of the
/// starts are sphere samples, half sparse sign patterns of size
/// `pattern_size`. All step/convergence thresholds scale with the spectral
/// norm, so scaled matrices trace scaled trajectories.
template <typename Scalar>
CoreResult<Scalar> cmsv_unit_search(const MatrixX<Scalar>& A, QExponent q_true, Scalar cap,
                                    Index pattern_size, const SearchBudget& budget,
                                    Scalar sigma_max) {
  const Index n = A.cols();
  const QExponent q_search = search_exponent(q_true);
  const Scalar sigma = std::max(sigma_max, std::numeric_limits<Scalar>::min());
  const Scalar step0 = Scalar(1) / sigma;
  const Scalar conv_tol = Scalar(1e-10) * sigma;

  CoreResult<Scalar> best;
  best.value = std::numeric_limits<Scalar>::infinity();
  int converged_count = 0;

  const int restarts = std::max(budget.restarts, 1);
  for (int r = 0; r < restarts; ++r) {
    Rng rng = make_rng(derive_seed(budget.seed, static_cast<std::uint64_t>(r)));
    VectorX<Scalar> z = (r % 2 == 0) ? lq_sphere_sample<Scalar>(rng, n, q_search)
                                     : sparse_sign_pattern<Scalar>(rng, n, pattern_size);
    z = project_sphere_cap(z, q_search, cap);
    Scalar obj = (A * z).norm();
    Scalar step = step0;
    bool converged = false;

    for (int iter = 0; iter < budget.max_iters; ++iter) {
      const VectorX<Scalar> residual = A * z;
      const Scalar rnorm = residual.norm();
      if (rnorm <= Scalar(1e-15) * sigma) {
        converged = true;
        break;
      }
      const VectorX<Scalar> grad = A.transpose() * residual / rnorm;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        const VectorX<Scalar> cand = project_sphere_cap<Scalar>(z - step * grad, q_search, cap);
        const Scalar cobj = (A * cand).norm();
        if (cobj < obj) {
          const Scalar drop = obj - cobj;
          z = cand;
          obj = cobj;
          step = std::min(step * Scalar(1.5), Scalar(100) * step0);
          accepted = true;
          if (drop < conv_tol) converged = true;
          break;
        }
        step /= Scalar(2);
        if (step < Scalar(1e-16) * step0) break;
      }
      if (!accepted) converged = true;  // stationary within step resolution
      if (!accepted || converged) break;
    }
    if (converged) ++converged_count;

    // evaluate on the true constraint set
    const VectorX<Scalar> w = project_sphere_cap(z, q_true, cap);
    const Scalar true_obj = (A * w).norm();
    if (true_obj < best.value) {
      best.value = true_obj;
      best.witness = w;
    }
  }

  best.converged_fraction = static_cast<Scalar>(converged_count) / static_cast<Scalar>(restarts);
  return best;
}

template <typename Scalar>
Scalar l1_cap_for_sparsity(QExponent q, Scalar s) {
  // s_q(z) <= s on the unit q-sphere is exactly ||z||_1 <= s^{1-1/q}
  return std::pow(s, static_cast<Scalar>(q.one_minus_inv_q()));
}

}  // namespace detail

/// Local multi-start estimate of rho_{q,s}(A) = min ||Az||_2 / ||z||_q over
/// s_q(z) <= s. By homogeneity the search runs on the unit q-sphere with the
/// l1 cap s^{1-1/q}.
template <typename Scalar>
CmsvEstimate<Scalar> estimate_cmsv(const MeasurementMatrix<Scalar>& A, QExponent q, Scalar s,
                                   const SearchBudget& budget = {}) {
  A.validate();
  q.require_cmsv_domain();
  const Index n = A.cols();
  if (!(s >= Scalar(1) - Scalar(1e-9)) || !(s <= static_cast<Scalar>(n) + Scalar(1e-9)))
    throw std::domain_error("estimate_cmsv: s must lie in [1, N]");
  s = std::min(std::max(s, Scalar(1)), static_cast<Scalar>(n));

  const Scalar sigma = spectral_norm(A.entries);
  const Scalar cap = detail::l1_cap_for_sparsity(q, s);
  const Index pattern = std::min<Index>(static_cast<Index>(std::ceil(s)), n);
  const auto core = detail::cmsv_unit_search(A.entries, q, cap, pattern, budget, sigma);

  CmsvEstimate<Scalar> est;
  est.q = q;
  est.s = s;
  est.witness = core.witness;
  est.value = core.value;
  est.method = CmsvMethod::multistart;
  est.restarts = std::max(budget.restarts, 1);
  est.converged_fraction = core.converged_fraction;
  est.matrix_scale = sigma;
  return est;
}

/// Brute-force reference: dense sampling of the unit q-sphere, rejection to
/// s_q(z) <= s, plus coordinate-descent polish of the best candidates.
/// Intended for small N (the CLI refuses N > 10). `warm_starts` lets callers
/// inject known feasible candidates (e.g. a witness from a smaller s); each
/// is re-projected before use, so upper-bound semantics are preserved.
template <typename Scalar>
CmsvEstimate<Scalar> cmsv_oracle(const MeasurementMatrix<Scalar>& A, QExponent q, Scalar s,
                                 std::int64_t n_samples, const OracleOptions& opts = {},
                                 const std::vector<VectorX<Scalar>>& warm_starts = {}) {
  A.validate();
  q.require_cmsv_domain();
  const Index n = A.cols();
  if (!(s >= Scalar(1) - Scalar(1e-9)) || !(s <= static_cast<Scalar>(n) + Scalar(1e-9)))
    throw std::domain_error("cmsv_oracle: s must lie in [1, N]");
  s = std::min(std::max(s, Scalar(1)), static_cast<Scalar>(n));
  if (n_samples < 1) throw std::domain_error("cmsv_oracle: n_samples >= 1 required");

  const Scalar cap = detail::l1_cap_for_sparsity(q, s);
  const Scalar sigma = spectral_norm(A.entries);

  struct Candidate {
    Scalar value;
    VectorX<Scalar> z;
  };
  std::vector<Candidate> pool;

  auto add_candidate = [&](const VectorX<Scalar>& z) {
    const VectorX<Scalar> w = detail::project_sphere_cap(z, q, cap);
    pool.push_back({(A.entries * w).norm(), w});
  };

  for (Index i = 0; i < n; ++i) {
    VectorX<Scalar> e = VectorX<Scalar>::Zero(n);
    e[i] = Scalar(1);
    add_candidate(e);
  }
  if (n <= 16 && detail::l1_lq_ratio(VectorX<Scalar>::Ones(2).eval(), q) <= cap) {
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j)
        for (int sgn = -1; sgn <= 1; sgn += 2) {
          VectorX<Scalar> e = VectorX<Scalar>::Zero(n);
          e[i] = Scalar(1);
          e[j] = static_cast<Scalar>(sgn);
          add_candidate(e);
        }
  }
  // null-space candidates: a feasible kernel vector decides rho = 0, and
  // samples alone resolve that region poorly
  {
    const MatrixX<Scalar> kernel = kernel_basis(A.entries);
    Rng kernel_rng = make_rng(derive_seed(opts.seed, 0x6e75ull));
    for (Index c = 0; c < kernel.cols(); ++c) add_candidate(kernel.col(c));
    for (Index extra = 0; kernel.cols() > 1 && extra < 8; ++extra)
      add_candidate(kernel * gaussian_vector<Scalar>(kernel_rng, kernel.cols()));
  }
  for (const auto& z : warm_starts)
    if (z.size() == n) add_candidate(z);

  Rng rng = make_rng(opts.seed);
  std::int64_t feasible = 0;
  std::vector<Candidate> top;
  const std::size_t keep = static_cast<std::size_t>(std::max(opts.top_candidates, 1));
  for (std::int64_t i = 0; i < n_samples; ++i) {
    VectorX<Scalar> z = lq_sphere_sample<Scalar>(rng, n, q);
    if (z.template lpNorm<1>() > cap * (Scalar(1) + Scalar(1e-12))) continue;
    ++feasible;
    const Scalar value = (A.entries * z).norm();
    if (top.size() < keep) {
      top.push_back({value, z});
      std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
    } else if (value < top.back().value) {
      top.back() = {value, z};
      std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
    }
  }
  pool.insert(pool.end(), top.begin(), top.end());
  if (pool.empty()) throw std::runtime_error("cmsv_oracle: internal error, no feasible candidate");

  // coordinate-descent polish; two-coordinate moves are tried once single
  // moves stall, which matters on the l_inf sphere where renormalization
  // flattens single-coordinate steps along narrow kernel valleys
  auto polish = [&](Candidate cand) {
    auto try_move = [&](VectorX<Scalar> trial) {
      const VectorX<Scalar> w = detail::project_sphere_cap(trial, q, cap);
      const Scalar value = (A.entries * w).norm();
      if (value < cand.value) {
        cand = {value, w};
        return true;
      }
      return false;
    };
    Scalar delta = Scalar(0.5);
    for (int sweep = 0; sweep < opts.max_polish_sweeps; ++sweep) {
      bool improved = false;
      for (Index j = 0; j < n; ++j)
        for (int sgn = -1; sgn <= 1; sgn += 2) {
          VectorX<Scalar> trial = cand.z;
          trial[j] += static_cast<Scalar>(sgn) * delta;
          improved = try_move(std::move(trial)) || improved;
        }
      if (!improved && n <= 16) {
        for (Index i = 0; i < n; ++i)
          for (Index j = i + 1; j < n; ++j)
            for (int si = -1; si <= 1; si += 2)
              for (int sj = -1; sj <= 1; sj += 2) {
                VectorX<Scalar> trial = cand.z;
                trial[i] += static_cast<Scalar>(si) * delta;
                trial[j] += static_cast<Scalar>(sj) * delta;
                improved = try_move(std::move(trial)) || improved;
              }
      }
      if (!improved) {
        delta /= Scalar(2);
        if (delta < Scalar(1e-9)) break;
      }
    }
    return cand;
  };

  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
  const std::size_t polish_count = std::min(pool.size(), keep + 4);
  Candidate best = pool.front();
  for (std::size_t i = 0; i < polish_count; ++i) {
    const Candidate refined = polish(pool[i]);
    if (refined.value < best.value) best = refined;
  }

  CmsvEstimate<Scalar> est;
  est.q = q;
  est.s = s;
  est.witness = best.z;
  est.value = best.value;
  est.method = CmsvMethod::oracle;
  est.restarts = n_samples;
  est.converged_fraction =
      n_samples > 0 ? static_cast<Scalar>(feasible) / static_cast<Scalar>(n_samples) : Scalar(0);
  est.matrix_scale = sigma;
  return est;
}

/// Oracle sweep over an ascending s grid. Later runs are warm-started with
/// the previous witness (feasible by nestedness of the constraint sets), so
/// the returned values are non-increasing by construction.
template <typename Scalar>
std::vector<CmsvEstimate<Scalar>> cmsv_oracle_grid(const MeasurementMatrix<Scalar>& A, QExponent q,
                                                   const std::vector<Scalar>& s_grid,
                                                   std::int64_t n_samples,
                                                   const OracleOptions& opts = {}) {
  std::vector<CmsvEstimate<Scalar>> out;
  std::vector<VectorX<Scalar>> warm;
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (i > 0 && s_grid[i] < s_grid[i - 1])
      throw std::invalid_argument("cmsv_oracle_grid: s grid must be ascending");
    out.push_back(cmsv_oracle(A, q, s_grid[i], n_samples, opts, warm));
    warm = {out.back().witness};
  }
  return out;
}

/// l1-truncated set q-width R_{q,r}(A) = min ||Au||_2 over the unit l1 ball
/// intersected with the radius-r q-sphere. The feasible set is nonempty only
/// for r <= 1 (||u||_q <= ||u||_1). By homogeneity the search runs on the
/// unit q-sphere with sparsity budget r^{-q/(q-1)} and rescales, which keeps
/// shared-seed runs of the two estimators consistent to machine precision.
template <typename Scalar>
WidthEstimate<Scalar> estimate_width(const MeasurementMatrix<Scalar>& A, QExponent q, Scalar r,
                                     const SearchBudget& budget = {}) {
  A.validate();
  q.require_cmsv_domain();
  if (!(r > Scalar(0))) throw std::domain_error("estimate_width: r must be > 0");
  if (r > Scalar(1) + Scalar(1e-12))
    throw std::domain_error("estimate_width: empty feasible set for r > 1 (||u||_q <= ||u||_1)");
  r = std::min(r, Scalar(1));

  const Scalar s_prime = std::pow(r, static_cast<Scalar>(-q.theta()));
  const Scalar sigma = spectral_norm(A.entries);
  const Scalar cap = detail::l1_cap_for_sparsity(q, s_prime);
  const Index pattern = std::min<Index>(static_cast<Index>(std::ceil(s_prime)), A.cols());
  const auto core = detail::cmsv_unit_search(A.entries, q, cap, pattern, budget, sigma);

  WidthEstimate<Scalar> est;
  est.q = q;
  est.r = r;
  est.value = r * core.value;
  est.witness = r * core.witness;
  return est;
}

/// Lower-bound estimate of rad_q(T_0 cap B_1^N) with T_0 = {z: ||Az||_2 <=
/// alpha}. For alpha = 0 the kernel is parametrized by an orthonormal basis
/// and the scale-invariant ratio ||Vw||_q / ||Vw||_1 is maximized; for alpha
/// > 0 the maximization runs over scaling rays, t*(d) = min(alpha/||Ad||_2,
/// 1/||d||_1), with multi-start coordinate ascent over directions.
template <typename Scalar>
RadiusEstimate<Scalar> estimate_radius(const MeasurementMatrix<Scalar>& A, QExponent q,
                                       Scalar alpha, const SearchBudget& budget = {}) {
  A.validate();
  q.require_cmsv_domain();
  if (!(alpha >= Scalar(0)) || !std::isfinite(static_cast<double>(alpha)))
    throw std::domain_error("estimate_radius: alpha must be finite and >= 0");
  const Index n = A.cols();

  RadiusEstimate<Scalar> est;
  est.q = q;
  est.alpha = alpha;

  const int restarts = std::max(budget.restarts, 1);

  if (alpha == Scalar(0)) {
    const MatrixX<Scalar> V = kernel_basis(A.entries);
    const Index d = V.cols();
    if (d == 0) {
      est.value = Scalar(0);
      est.witness = VectorX<Scalar>::Zero(n);
      return est;
    }
    auto ratio = [&](const VectorX<Scalar>& w) {
      const VectorX<Scalar> z = V * w;
      const Scalar l1 = z.template lpNorm<1>();
      if (l1 == Scalar(0)) return Scalar(0);
      return lq_norm(z, q) / l1;
    };
    VectorX<Scalar> best_w = VectorX<Scalar>::Zero(d);
    best_w[0] = Scalar(1);
    Scalar best_f = ratio(best_w);
    for (int r = 0; r < restarts; ++r) {
      Rng rng = make_rng(derive_seed(budget.seed, 0x7a0d1135ull, static_cast<std::uint64_t>(r)));
      VectorX<Scalar> w = gaussian_vector<Scalar>(rng, d).normalized();
      Scalar f = ratio(w);
      Scalar delta = Scalar(0.5);
      for (int sweep = 0; sweep < budget.max_iters / 5 + 20; ++sweep) {
        bool improved = false;
        for (Index j = 0; j < d; ++j)
          for (int sgn = -1; sgn <= 1; sgn += 2) {
            VectorX<Scalar> trial = w;
            trial[j] += static_cast<Scalar>(sgn) * delta;
            trial.normalize();
            const Scalar ft = ratio(trial);
            if (ft > f) {
              w = trial;
              f = ft;
              improved = true;
            }
          }
        if (!improved) {
          delta /= Scalar(2);
          if (delta < Scalar(1e-10)) break;
        }
      }
      if (f > best_f) {
        best_f = f;
        best_w = w;
      }
    }
    VectorX<Scalar> z = V * best_w;
    z /= z.template lpNorm<1>();
    z *= (Scalar(1) - Scalar(1e-13));
    est.witness = z;
    est.value = lq_norm(z, q);
    return est;
  }

  auto ray_value = [&](const VectorX<Scalar>& dir) {
    const Scalar l1 = dir.template lpNorm<1>();
    if (l1 == Scalar(0)) return Scalar(0);
    const Scalar adir = (A.entries * dir).norm();
    const Scalar t = adir > Scalar(0) ? std::min(alpha / adir, Scalar(1) / l1) : Scalar(1) / l1;
    return t * lq_norm(dir, q);
  };

  const MatrixX<Scalar> V = kernel_basis(A.entries);
  VectorX<Scalar> best_dir = VectorX<Scalar>::Zero(n);
  best_dir[0] = Scalar(1);
  Scalar best_val = ray_value(best_dir);
  for (int r = 0; r < restarts; ++r) {
    Rng rng = make_rng(derive_seed(budget.seed, 0xbada1ea5ull, static_cast<std::uint64_t>(r)));
    VectorX<Scalar> dir;
    switch (r % 3) {
      case 0:
        dir = gaussian_vector<Scalar>(rng, n);
        break;
      case 1:
        dir = sparse_sign_pattern<Scalar>(rng, n, std::max<Index>(1, n / 4));
        break;
      default:
        if (V.cols() > 0)
          dir = V * gaussian_vector<Scalar>(rng, V.cols()) +
                Scalar(0.2) * gaussian_vector<Scalar>(rng, n);
        else
          dir = gaussian_vector<Scalar>(rng, n);
        break;
    }
    dir.normalize();
    Scalar val = ray_value(dir);
    Scalar delta = Scalar(0.5);
    for (int sweep = 0; sweep < budget.max_iters / 5 + 20; ++sweep) {
      bool improved = false;
      for (Index j = 0; j < n; ++j)
        for (int sgn = -1; sgn <= 1; sgn += 2) {
          VectorX<Scalar> trial = dir;
          trial[j] += static_cast<Scalar>(sgn) * delta;
          trial.normalize();
          const Scalar vt = ray_value(trial);
          if (vt > val) {
            dir = trial;
            val = vt;
            improved = true;
          }
        }
      if (!improved) {
        delta /= Scalar(2);
        if (delta < Scalar(1e-10)) break;
      }
    }
    if (val > best_val) {
      best_val = val;
      best_dir = dir;
    }
  }

  const Scalar l1 = best_dir.template lpNorm<1>();
  const Scalar adir = (A.entries * best_dir).norm();
  Scalar t = adir > Scalar(0) ? std::min(alpha / adir, Scalar(1) / l1) : Scalar(1) / l1;
  t *= (Scalar(1) - Scalar(1e-13));
  est.witness = t * best_dir;
  est.value = lq_norm(est.witness, q);
  return est;
}

struct CmsvChainReport {
  double transform_exponent = 1.0;  // t = theta(q2)/theta(q1) >= 1
  double s_transformed = 1.0;       // s^t
  double first_margin = 0.0;        // rho_{q1,s} - rho_{q2,s^t}
  double second_margin = 0.0;       // rho_{q2,s^t} - s^{-t} rho_{q1,s^t}
};

/// Margins of the chained CMSV inequalities
///   rho_{q1,s} >= rho_{q2,s^t} >= s^{-t} rho_{q1,s^t},  t = theta(q2)/theta(q1),
/// valid for 1 < q2 <= q1 <= inf and 1 <= s <= N^{1/t}. The three estimates
/// must match the announced (q, s) pairs.
template <typename Scalar>
CmsvChainReport chained_cmsv_bounds(QExponent q1, QExponent q2, Scalar s, Index n,
                           const CmsvEstimate<Scalar>& rho_q1_s,
                           const CmsvEstimate<Scalar>& rho_q2_st,
                           const CmsvEstimate<Scalar>& rho_q1_st) {
  q1.require_cmsv_domain();
  q2.require_cmsv_domain();
  if (!(q2.value() <= q1.value()))
    throw std::domain_error("chained_cmsv_bounds: requires q2 <= q1");
  const double t = q2.theta() / q1.theta();
  const double s_max = std::pow(static_cast<double>(n), 1.0 / t);
  if (!(s >= Scalar(1) - Scalar(1e-9)) || !(static_cast<double>(s) <= s_max + 1e-9))
    throw std::domain_error("chained_cmsv_bounds: s outside [1, N^{1/t}]");
  const double st = std::pow(static_cast<double>(s), t);

  auto check = [](const CmsvEstimate<Scalar>& e, QExponent q, double sv, const char* which) {
    if (e.q != q || std::abs(static_cast<double>(e.s) - sv) > 1e-6 * std::max(1.0, sv))
      throw std::invalid_argument(std::string("chained_cmsv_bounds: estimate mismatch for ") + which);
  };
  check(rho_q1_s, q1, static_cast<double>(s), "rho_{q1,s}");
  check(rho_q2_st, q2, st, "rho_{q2,s^t}");
  check(rho_q1_st, q1, st, "rho_{q1,s^t}");

  CmsvChainReport report;
  report.transform_exponent = t;
  report.s_transformed = st;
  report.first_margin =
      static_cast<double>(rho_q1_s.value) - static_cast<double>(rho_q2_st.value);
  report.second_margin = static_cast<double>(rho_q2_st.value) -
                         std::pow(static_cast<double>(s), -t) * static_cast<double>(rho_q1_st.value);
  return report;
}

template <typename Scalar>
struct CmsvChainOracleResult {
  CmsvChainReport report;
  CmsvEstimate<Scalar> rho_q1_s, rho_q2_st, rho_q1_st;
};

/// Oracle-grade evaluation of the chained-inequality margins. The (q1, s)
/// witness is injected into both right-hand runs: it is feasible there
/// (s_{q2}(z) <= s_{q1}(z)^t and s^t >= s), which keeps the estimated margins
/// from flipping sign on estimator noise alone.
template <typename Scalar>
CmsvChainOracleResult<Scalar> chained_cmsv_oracle(const MeasurementMatrix<Scalar>& A, QExponent q1,
                                         QExponent q2, Scalar s, std::int64_t n_samples,
                                         const OracleOptions& opts = {}) {
  const double t = q2.theta() / q1.theta();
  const Scalar st = static_cast<Scalar>(std::pow(static_cast<double>(s), t));
  CmsvChainOracleResult<Scalar> out;
  out.rho_q1_s = cmsv_oracle(A, q1, s, n_samples, opts);
  const std::vector<VectorX<Scalar>> warm = {out.rho_q1_s.witness};
  out.rho_q2_st = cmsv_oracle(A, q2, st, n_samples, opts, warm);
  out.rho_q1_st = cmsv_oracle(A, q1, st, n_samples, opts, warm);
  out.report = chained_cmsv_bounds(q1, q2, s, A.cols(), out.rho_q1_s, out.rho_q2_st, out.rho_q1_st);
  return out;
}

}  // namespace cmsvkit
