#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "json.hpp"

#include "cmsvkit/bp.hpp"
#include "cmsvkit/cmsv.hpp"
#include "cmsvkit/ensembles.hpp"
#include "cmsvkit/sparsity.hpp"

namespace cmsvkit {

/// "rho > 0" is decided against local-search noise: the threshold is 1e-6
/// relative to the spectral scale of A.
inline double positivity_tolerance(double matrix_scale) { return 1e-6 * matrix_scale; }

struct ExactRecoveryCheck {
  bool ok = false;
  double s_required = 0.0;  // 2^{q/(q-1)} k
  double s_used = 0.0;
  double rho = 0.0;
  bool empirical = false;  // local-search rho, not a certificate of rho > 0
};

/// Exact-recovery sufficient condition: rho_{q,s}(A) > 0 with
/// s >= 2^{q/(q-1)} k.
template <typename Scalar>
ExactRecoveryCheck check_exact(QExponent q, Index k, const CmsvEstimate<Scalar>& rho) {
  if (k < 1) throw std::domain_error("check_exact: k >= 1 required");
  q.require_cmsv_domain();
  ExactRecoveryCheck check;
  check.s_required = std::pow(2.0, q.theta()) * static_cast<double>(k);
  check.s_used = static_cast<double>(rho.s);
  check.rho = static_cast<double>(rho.value);
  check.empirical = rho.method == CmsvMethod::multistart;
  check.ok = check.s_used >= check.s_required * (1.0 - 1e-12) &&
             check.rho > positivity_tolerance(static_cast<double>(rho.matrix_scale));
  return check;
}

struct StableBounds {
  double l1 = 0.0;  // 4 sigma_k
  double lq = 0.0;  // k^{1/q-1} sigma_k
};

/// Noise-free error bounds under the condition s >= 4^{q/(q-1)} k.
inline StableBounds stable_bounds(QExponent q, Index k, double sigma_k) {
  if (k < 1) throw std::domain_error("stable_bounds: k >= 1 required");
  q.require_cmsv_domain();
  StableBounds b;
  b.l1 = 4.0 * sigma_k;
  b.lq = std::pow(static_cast<double>(k), q.inv_q_minus_one()) * sigma_k;
  return b;
}

struct RobustBounds {
  double l1 = 0.0;           // 4 sigma_k + (8 eps / rho) k^{1-1/q}
  double lq = 0.0;           // k^{1/q-1} sigma_k + 2 eps / rho
  double l1_improved = 0.0;  // 4 sigma_k + (4 eps / rho) k^{1-1/q}
};

/// Noisy error bounds under the same condition; rho must be positive for the
/// bounds to be defined.
inline RobustBounds robust_bounds(QExponent q, Index k, double sigma_k, double epsilon,
                                  double rho_value) {
  if (k < 1) throw std::domain_error("robust_bounds: k >= 1 required");
  if (!(epsilon >= 0.0)) throw std::domain_error("robust_bounds: epsilon >= 0 required");
  q.require_cmsv_domain();
  if (!(rho_value > 0.0))
    throw std::domain_error("robust_bounds: condition not met (rho <= 0), bounds undefined");
  const double k_pow = std::pow(static_cast<double>(k), q.one_minus_inv_q());
  RobustBounds b;
  b.l1 = 4.0 * sigma_k + 8.0 * epsilon / rho_value * k_pow;
  b.lq = std::pow(static_cast<double>(k), q.inv_q_minus_one()) * sigma_k + 2.0 * epsilon / rho_value;
  b.l1_improved = 4.0 * sigma_k + 4.0 * epsilon / rho_value * k_pow;
  return b;
}

/// Certificate of the sufficient conditions and error bounds for one
/// (matrix, signal class, CMSV estimate) configuration. Field names are the
/// serialization contract.
struct BoundCertificate {
  QExponent q{2.0};
  Index k = 1;
  double s_required = 0.0;
  double s_used = 0.0;
  double rho = 0.0;
  double epsilon = 0.0;
  double sigma_k = 0.0;
  bool exact_ok = false;
  bool stable_ok = false;
  bool robust_ok = false;
  double l1_bound = 0.0;
  double lq_bound = 0.0;
  double l1_bound_improved = 0.0;
  bool empirical_flag = false;
};

inline nlohmann::ordered_json to_json(const BoundCertificate& cert) {
  nlohmann::ordered_json j;
  j["q"] = cert.q.is_infinite() ? nlohmann::ordered_json("inf")
                                : nlohmann::ordered_json(cert.q.value());
  j["k"] = cert.k;
  j["s_required"] = cert.s_required;
  j["s_used"] = cert.s_used;
  j["rho"] = cert.rho;
  j["epsilon"] = cert.epsilon;
  j["sigma_k"] = cert.sigma_k;
  j["exact_ok"] = cert.exact_ok;
  j["stable_ok"] = cert.stable_ok;
  j["robust_ok"] = cert.robust_ok;
  j["l1_bound"] = cert.l1_bound;
  j["lq_bound"] = cert.lq_bound;
  j["l1_bound_improved"] = cert.l1_bound_improved;
  j["empirical_flag"] = cert.empirical_flag;
  return j;
}

inline QExponent q_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return QExponent::infinity();
    return QExponent(std::stod(j.get<std::string>()));
  }
  return QExponent(j.get<double>());
}

inline BoundCertificate bound_certificate_from_json(const nlohmann::json& j) {
  BoundCertificate cert;
  cert.q = q_from_json(j.at("q"));
  cert.k = j.at("k").get<Index>();
  cert.s_required = j.at("s_required").get<double>();
  cert.s_used = j.at("s_used").get<double>();
  cert.rho = j.at("rho").get<double>();
  cert.epsilon = j.at("epsilon").get<double>();
  cert.sigma_k = j.at("sigma_k").get<double>();
  cert.exact_ok = j.at("exact_ok").get<bool>();
  cert.stable_ok = j.at("stable_ok").get<bool>();
  cert.robust_ok = j.at("robust_ok").get<bool>();
  cert.l1_bound = j.at("l1_bound").get<double>();
  cert.lq_bound = j.at("lq_bound").get<double>();
  cert.l1_bound_improved = j.at("l1_bound_improved").get<double>();
  cert.empirical_flag = j.at("empirical_flag").get<bool>();
  return cert;
}

/// Builds a certificate from an estimate taken at s >= 4^{q/(q-1)} k (the
/// stable/robust requirement; the exact requirement 2^{q/(q-1)} k is implied
/// for it by monotonicity of rho in s).
template <typename Scalar>
BoundCertificate make_certificate(QExponent q, Index k, double sigma_k, double epsilon,
                                  const CmsvEstimate<Scalar>& rho) {
  BoundCertificate cert;
  cert.q = q;
  cert.k = k;
  cert.s_required = std::pow(4.0, q.theta()) * static_cast<double>(k);
  cert.s_used = static_cast<double>(rho.s);
  cert.rho = static_cast<double>(rho.value);
  cert.epsilon = epsilon;
  cert.sigma_k = sigma_k;
  cert.empirical_flag = rho.method == CmsvMethod::multistart;

  const double pos_tol = positivity_tolerance(static_cast<double>(rho.matrix_scale));
  const bool positive = cert.rho > pos_tol;
  const double s_exact = std::pow(2.0, q.theta()) * static_cast<double>(k);
  cert.exact_ok = positive && cert.s_used >= s_exact * (1.0 - 1e-12);
  cert.stable_ok = positive && cert.s_used >= cert.s_required * (1.0 - 1e-12);
  cert.robust_ok = cert.stable_ok;

  if (positive) {
    const RobustBounds b = robust_bounds(q, k, sigma_k, epsilon, cert.rho);
    cert.l1_bound = b.l1;
    cert.lq_bound = b.lq;
    cert.l1_bound_improved = b.l1_improved;
  }
  return cert;
}

/// Noise draw with ||e||_2 <= epsilon: uniform direction on the sphere,
/// radius epsilon times a uniform factor.
template <typename Scalar>
VectorX<Scalar> noise_vector(Index m, Scalar epsilon, std::uint64_t seed) {
  VectorX<Scalar> e = VectorX<Scalar>::Zero(m);
  if (epsilon <= Scalar(0)) return e;
  Rng rng = make_rng(derive_seed(seed, 0x4015eull));
  VectorX<Scalar> dir = gaussian_vector<Scalar>(rng, m);
  const Scalar norm = dir.norm();
  std::uniform_real_distribution<Scalar> unif(Scalar(0), Scalar(1));
  const Scalar radius = epsilon * unif(rng);
  if (norm > Scalar(0)) e = dir / norm * radius;
  return e;
}

/// One end-to-end bound-validation trial.
template <typename Scalar>
struct ValidationRecord {
  BoundCertificate certificate;
  double err_l1 = 0.0;
  double err_lq = 0.0;
  double err_l2 = 0.0;
  double slack = 0.0;  // solver slack added to the bounds (10 * opt_tol)
  SolveStatus solver_status = SolveStatus::converged;
  int iterations = 0;
  bool conclusive = false;      // solver converged
  bool bounds_checked = false;  // condition met and solve conclusive
  bool l1_ok = true;
  bool lq_ok = true;
  bool l1_improved_ok = true;
  bool violation = false;
  RecoveryResult<Scalar> recovery;
};

/// Builds y = Ax + e with ||e||_2 <= epsilon (uniform direction, uniform
/// radius factor, seeded), runs the solver, and compares the measured errors
/// against the certified bounds with solver slack added. Non-convergence is
/// reported as inconclusive, never as a bound violation.
template <typename Scalar>
ValidationRecord<Scalar> validate_run(const MeasurementMatrix<Scalar>& A, const Signal<Scalar>& x,
                                      QExponent q, Index k, Scalar epsilon,
                                      std::uint64_t noise_seed, const SolverOptions& solver_opts,
                                      const CmsvEstimate<Scalar>& rho) {
  A.validate();
  x.validate();
  if (x.size() != A.cols()) throw std::domain_error("validate_run: signal length must equal N");
  const double s_needed = std::pow(4.0, q.theta()) * static_cast<double>(k);
  if (static_cast<double>(rho.s) < s_needed * (1.0 - 1e-9))
    throw std::invalid_argument("validate_run: CMSV estimate must be taken at s = 4^{q/(q-1)} k");

  ValidationRecord<Scalar> record;
  const double sigma_k = static_cast<double>(best_k_term_error(x.entries, k).sigma);
  record.certificate = make_certificate(q, k, sigma_k, static_cast<double>(epsilon), rho);
  record.slack = 10.0 * solver_opts.opt_tol;

  const VectorX<Scalar> e = noise_vector<Scalar>(A.rows(), epsilon, noise_seed);
  BpProblem<Scalar> problem{A, A.entries * x.entries + e, epsilon};
  record.recovery = solve_bp(problem, solver_opts);
  record.solver_status = record.recovery.status;
  record.iterations = record.recovery.iterations;
  record.conclusive = record.recovery.status == SolveStatus::converged;

  const VectorX<Scalar> h = record.recovery.x_hat - x.entries;
  record.err_l1 = static_cast<double>(h.template lpNorm<1>());
  record.err_lq = static_cast<double>(lq_norm(h, q));
  record.err_l2 = static_cast<double>(h.norm());

  record.bounds_checked = record.conclusive && record.certificate.stable_ok;
  if (record.bounds_checked) {
    record.l1_ok = record.err_l1 <= record.certificate.l1_bound + record.slack;
    record.lq_ok = record.err_lq <= record.certificate.lq_bound + record.slack;
    record.l1_improved_ok = record.err_l1 <= record.certificate.l1_bound_improved + record.slack;
    record.violation = !(record.l1_ok && record.lq_ok && record.l1_improved_ok);
  }
  return record;
}

}  // namespace cmsvkit
