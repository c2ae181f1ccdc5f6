#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cmsvkit/linalg.hpp"
#include "cmsvkit/types.hpp"

namespace cmsvkit {

/// Basis Pursuit instance: min ||z||_1 s.t. Az = y (epsilon = 0) or
/// ||Az - y||_2 <= epsilon.
template <typename Scalar>
struct BpProblem {
  MeasurementMatrix<Scalar> A;
  VectorX<Scalar> y;
  Scalar epsilon = Scalar(0);

  void validate() const {
    A.validate();
    if (y.size() != A.rows()) throw std::domain_error("BpProblem: dim(y) must equal m");
    if (!y.allFinite() || !std::isfinite(static_cast<double>(epsilon)) || epsilon < Scalar(0))
      throw std::domain_error("BpProblem: epsilon must be finite and >= 0");
  }
};

enum class SolveStatus { converged, max_iter, infeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    default: return "infeasible";
  }
}

template <typename Scalar>
struct RecoveryResult {
  VectorX<Scalar> x_hat;
  Scalar objective = Scalar(0);  // ||x_hat||_1
  Scalar residual = Scalar(0);   // ||A x_hat - y||_2
  int iterations = 0;
  SolveStatus status = SolveStatus::converged;
  VectorX<Scalar> dual;                 // dual iterate (m-dim), feeds verify_optimality
  std::vector<Scalar> objective_trace;  // best-so-far objective per iteration (when traced)
};

struct SolverOptions {
  double feas_tol = -1.0;  // <0: auto (1e-9 equality, 1e-8 noisy)
  double opt_tol = 1e-7;
  int max_iter = 50000;
  int power_iterations = 100;
  bool trace = false;
  bool debias = true;
};

template <typename Scalar>
struct OptimalityReport {
  Scalar primal_objective = Scalar(0);
  Scalar dual_objective = Scalar(0);
  Scalar gap = Scalar(0);
  Scalar primal_infeasibility = Scalar(0);
  bool flag = false;  // gap or infeasibility beyond tolerance
};

namespace detail {

/// Shared factorization state for the per-iteration set projections.
template <typename Scalar>
struct BpGeometry {
  ThinSvd<Scalar> svd;
  VectorX<Scalar> b;          // U^T y
  Scalar out_of_range = 0;    // || y - U U^T y ||
  VectorX<Scalar> ls_point;   // min-norm least squares solution

  static BpGeometry prepare(const MatrixX<Scalar>& A, const VectorX<Scalar>& y) {
    BpGeometry g;
    g.svd = ThinSvd<Scalar>::compute(A);
    g.b = g.svd.U.transpose() * y;
    g.out_of_range = (y - g.svd.U * g.b).norm();
    g.ls_point = g.svd.V * g.b.cwiseQuotient(g.svd.sigma);
    return g;
  }

  // Projection onto {x : Ax = y}; also yields the constraint multiplier eta
  // with v - x = A^T eta, used for the dual certificate.
  VectorX<Scalar> project_equality(const VectorX<Scalar>& v, VectorX<Scalar>& eta) const {
    const VectorX<Scalar> c = svd.V.transpose() * v;
    const VectorX<Scalar> target = b.cwiseQuotient(svd.sigma);
    eta = svd.U * (c - target).cwiseQuotient(svd.sigma);
    return v + svd.V * (target - c);
  }

  // Projection onto {x : ||Ax - y||_2 <= eps}; multiplier form
  // v - x = lambda A^T (Ax - y).
  VectorX<Scalar> project_ball(const VectorX<Scalar>& v, Scalar eps, VectorX<Scalar>& normal,
                               const MatrixX<Scalar>& A, const VectorX<Scalar>& y) const {
    const VectorX<Scalar> c = svd.V.transpose() * v;
    const VectorX<Scalar> d = svd.sigma.cwiseProduct(c) - b;
    const Scalar in_range_sq = d.squaredNorm();
    const Scalar total = std::sqrt(in_range_sq + out_of_range * out_of_range);
    normal = VectorX<Scalar>::Zero(y.size());
    if (total <= eps) return v;  // interior: lambda = 0

    const Scalar target_sq = std::max(Scalar(0), eps * eps - out_of_range * out_of_range);
    auto residual_sq = [&](Scalar lambda) {
      Scalar sum = Scalar(0);
      for (Index i = 0; i < d.size(); ++i) {
        const Scalar w = d[i] / (Scalar(1) + lambda * svd.sigma[i] * svd.sigma[i]);
        sum += w * w;
      }
      return sum;
    };
    Scalar hi = Scalar(1);
    while (residual_sq(hi) > target_sq && hi < Scalar(1e18)) hi *= Scalar(8);
    Scalar lo = Scalar(0);
    for (int it = 0; it < 120; ++it) {
      const Scalar mid = (lo + hi) / Scalar(2);
      if (residual_sq(mid) > target_sq)
        lo = mid;
      else
        hi = mid;
    }
    const Scalar lambda = hi;
    VectorX<Scalar> xt(d.size());
    for (Index i = 0; i < d.size(); ++i) {
      const Scalar s2 = svd.sigma[i] * svd.sigma[i];
      xt[i] = (c[i] + lambda * svd.sigma[i] * b[i]) / (Scalar(1) + lambda * s2);
    }
    const VectorX<Scalar> x = v + svd.V * (xt - c);
    normal = lambda * (A * x - y);
    return x;
  }
};

template <typename Scalar>
VectorX<Scalar> soft_shrink(const VectorX<Scalar>& v, Scalar tau) {
  VectorX<Scalar> out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const Scalar mag = std::abs(v[i]) - tau;
    out[i] = mag > Scalar(0) ? (v[i] > Scalar(0) ? mag : -mag) : Scalar(0);
  }
  return out;
}

}  // namespace detail

/// Duality-gap report for a candidate solution. The certificate scales the
/// dual iterate into the feasible dual region, so the reported gap is a true
/// (weak-duality) optimality bound.
template <typename Scalar>
OptimalityReport<Scalar> verify_optimality(const BpProblem<Scalar>& problem,
                                           const VectorX<Scalar>& x_hat,
                                           const VectorX<Scalar>& dual,
                                           double opt_tol = 1e-7, double feas_tol = -1.0) {
  problem.validate();
  if (!x_hat.allFinite()) throw std::domain_error("verify_optimality: x_hat must be finite");
  const double ftol = feas_tol > 0 ? feas_tol : (problem.epsilon == Scalar(0) ? 1e-9 : 1e-8);

  OptimalityReport<Scalar> report;
  report.primal_objective = x_hat.template lpNorm<1>();
  const Scalar residual = (problem.A.entries * x_hat - problem.y).norm();
  report.primal_infeasibility = std::max(Scalar(0), residual - problem.epsilon);

  VectorX<Scalar> nu = dual.size() == problem.y.size() ? dual : VectorX<Scalar>::Zero(problem.y.size());
  const Scalar dual_inf = (problem.A.entries.transpose() * nu).template lpNorm<Eigen::Infinity>();
  if (dual_inf > Scalar(1)) nu /= dual_inf;
  report.dual_objective = problem.y.dot(nu) - problem.epsilon * nu.norm();
  report.gap = report.primal_objective - report.dual_objective;
  report.flag = static_cast<double>(report.gap) > opt_tol ||
                static_cast<double>(report.primal_infeasibility) > ftol;
  return report;
}

template <typename Scalar>
OptimalityReport<Scalar> verify_optimality(const BpProblem<Scalar>& problem,
                                           const RecoveryResult<Scalar>& result,
                                           double opt_tol = 1e-7, double feas_tol = -1.0) {
  return verify_optimality(problem, result.x_hat, result.dual, opt_tol, feas_tol);
}

/// Basis Pursuit by alternating proximal splitting (ADMM): a projection step
/// onto the affine set Az = y (or the epsilon-ball around y), a
/// soft-threshold step for the l1 objective, and a dual update. The matrix is
/// normalized by its spectral norm (power iteration) once up front; the
/// penalty is rebalanced from the primal/dual residuals, and convergence is
/// declared from the duality gap. Deterministic given inputs.
template <typename Scalar>
RecoveryResult<Scalar> solve_bp(const BpProblem<Scalar>& problem, const SolverOptions& opts = {}) {
  problem.validate();
  const Index n = problem.A.cols();
  const double feas_tol = opts.feas_tol > 0 ? opts.feas_tol
                                            : (problem.epsilon == Scalar(0) ? 1e-9 : 1e-8);

  RecoveryResult<Scalar> result;
  result.x_hat = VectorX<Scalar>::Zero(n);
  result.dual = VectorX<Scalar>::Zero(problem.y.size());

  // zero is optimal whenever it is feasible
  if (problem.y.norm() <= problem.epsilon ||
      (problem.y.norm() == Scalar(0) && problem.epsilon == Scalar(0))) {
    result.residual = problem.y.norm();
    result.status = SolveStatus::converged;
    if (opts.trace) result.objective_trace.push_back(Scalar(0));
    return result;
  }

  const Scalar sigma = spectral_norm(problem.A.entries, opts.power_iterations);
  if (sigma == Scalar(0)) {  // zero matrix, nonzero y beyond epsilon
    result.residual = problem.y.norm();
    result.status = SolveStatus::infeasible;
    return result;
  }

  const MatrixX<Scalar> As = problem.A.entries / sigma;
  const VectorX<Scalar> ys = problem.y / sigma;
  const Scalar eps_s = problem.epsilon / sigma;
  const bool equality = problem.epsilon == Scalar(0);

  const auto geometry = detail::BpGeometry<Scalar>::prepare(As, ys);
  if (geometry.out_of_range > eps_s + Scalar(feas_tol) * std::max(Scalar(1), ys.norm())) {
    result.x_hat = geometry.ls_point;
    result.objective = result.x_hat.template lpNorm<1>();
    result.residual = (problem.A.entries * result.x_hat - problem.y).norm();
    result.status = SolveStatus::infeasible;
    return result;
  }

  VectorX<Scalar> z = geometry.ls_point;
  VectorX<Scalar> u = VectorX<Scalar>::Zero(n);
  VectorX<Scalar> normal = VectorX<Scalar>::Zero(ys.size());
  Scalar rho = Scalar(1);
  const Scalar relax = Scalar(1.7);

  VectorX<Scalar> best_x;
  Scalar best_obj = std::numeric_limits<Scalar>::infinity();
  VectorX<Scalar> best_dual = VectorX<Scalar>::Zero(ys.size());
  Scalar best_dual_obj = -std::numeric_limits<Scalar>::infinity();
  int iters_used = opts.max_iter;
  bool converged = false;

  // support detection + least-squares debias; accepted only when it does not
  // worsen feasibility or the objective, so the result stays a valid
  // minimizer candidate. For the equality problem the detected support also
  // yields a candidate dual certificate (minimal-norm solution of
  // A_S^T nu = sign(x_S)), which is exact when the support is right.
  auto attempt_debias = [&]() {
    if (!opts.debias) return;
    const Scalar peak = z.cwiseAbs().maxCoeff();
    if (peak <= Scalar(0)) return;
    const Scalar res_best = (As * best_x - ys).norm();
    const Scalar allowed = std::max(res_best, eps_s + Scalar(feas_tol));
    for (const Scalar rel : {Scalar(1e-2), Scalar(1e-4), Scalar(1e-6), Scalar(1e-8)}) {
      std::vector<Index> support;
      for (Index i = 0; i < n; ++i)
        if (std::abs(z[i]) > rel * peak) support.push_back(i);
      if (support.empty() || static_cast<Index>(support.size()) > As.rows()) continue;
      MatrixX<Scalar> Asub(As.rows(), static_cast<Index>(support.size()));
      for (std::size_t j = 0; j < support.size(); ++j)
        Asub.col(static_cast<Index>(j)) = As.col(support[j]);
      const VectorX<Scalar> w = Asub.colPivHouseholderQr().solve(ys);
      VectorX<Scalar> xd = VectorX<Scalar>::Zero(n);
      for (std::size_t j = 0; j < support.size(); ++j) xd[support[j]] = w[static_cast<Index>(j)];
      const Scalar res_d = (As * xd - ys).norm();
      const Scalar obj_d = xd.template lpNorm<1>();
      if (res_d <= allowed && obj_d <= best_obj + Scalar(1e-12) * std::max(Scalar(1), best_obj)) {
        best_x = xd;
        best_obj = obj_d;
        if (equality) {
          VectorX<Scalar> signs(static_cast<Index>(support.size()));
          for (std::size_t j = 0; j < support.size(); ++j)
            signs[static_cast<Index>(j)] = xd[support[j]] >= Scalar(0) ? Scalar(1) : Scalar(-1);
          const auto gram = (Asub.transpose() * Asub).eval();
          VectorX<Scalar> nu = Asub * gram.ldlt().solve(signs);
          const Scalar dual_inf = (As.transpose() * nu).template lpNorm<Eigen::Infinity>();
          if (dual_inf > Scalar(1)) nu /= dual_inf;
          const Scalar dual_obj = ys.dot(nu);
          if (dual_obj > best_dual_obj) {
            best_dual_obj = dual_obj;
            best_dual = nu;
          }
        }
      }
    }
  };

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    VectorX<Scalar> x;
    const VectorX<Scalar> v = z - u;
    if (equality) {
      VectorX<Scalar> eta;
      x = geometry.project_equality(v, eta);
      normal = eta;
    } else {
      x = geometry.project_ball(v, eps_s, normal, As, ys);
    }
    const VectorX<Scalar> z_prev = z;
    const VectorX<Scalar> xr = relax * x + (Scalar(1) - relax) * z_prev;
    z = detail::soft_shrink<Scalar>(xr + u, Scalar(1) / rho);
    u += xr - z;

    const Scalar obj_x = x.template lpNorm<1>();
    if (obj_x < best_obj) {
      best_obj = obj_x;
      best_x = x;
    }
    if (opts.trace) result.objective_trace.push_back(best_obj);
    if (iter % 512 == 511) {
      attempt_debias();
      if (best_obj - best_dual_obj <= Scalar(opts.opt_tol)) {
        converged = true;
        iters_used = iter + 1;
        break;
      }
    }

    // duality-gap convergence check; primal and dual certificates are
    // tracked independently (the x iterate is feasible by projection, the
    // scaled dual candidate is dual feasible)
    auto refresh_dual = [&]() {
      VectorX<Scalar> nu = -rho * normal;
      const Scalar dual_inf = (As.transpose() * nu).template lpNorm<Eigen::Infinity>();
      if (dual_inf > Scalar(1)) nu /= dual_inf;
      const Scalar dual_obj = ys.dot(nu) - eps_s * nu.norm();
      if (dual_obj > best_dual_obj) {
        best_dual_obj = dual_obj;
        best_dual = nu;
      }
    };
    if (iter % 16 == 15 || iter + 1 == opts.max_iter) {
      refresh_dual();
      if (best_obj - best_dual_obj <= Scalar(opts.opt_tol)) {
        converged = true;
        iters_used = iter + 1;
        break;
      }
    }

    const Scalar primal_res = (x - z).norm();
    const Scalar dual_res = rho * (z - z_prev).norm();
    if (iter % 8 == 7) {
      if (primal_res > Scalar(10) * dual_res && rho < Scalar(1e8)) {
        rho *= Scalar(2);
        u /= Scalar(2);
      } else if (dual_res > Scalar(10) * primal_res && rho > Scalar(1e-8)) {
        rho /= Scalar(2);
        u *= Scalar(2);
      }
    }

    if (primal_res < Scalar(1e-14) * std::max(Scalar(1), z.norm()) &&
        dual_res < Scalar(1e-14) * std::max(Scalar(1), rho * u.norm())) {
      refresh_dual();
      converged = true;
      iters_used = iter + 1;
      break;
    }
  }

  if (best_x.size() == 0) {
    best_x = geometry.ls_point;
    best_obj = best_x.template lpNorm<1>();
  }
  attempt_debias();

  result.x_hat = best_x;
  result.objective = best_obj;
  result.residual = (problem.A.entries * best_x - problem.y).norm();
  result.iterations = iters_used;
  result.status = converged ? SolveStatus::converged : SolveStatus::max_iter;
  result.dual = best_dual / sigma;
  return result;
}

}  // namespace cmsvkit
