// Command-line front end: matrix generation, CMSV estimation, BP solves,
// bound certification, Monte Carlo campaigns, sample-complexity thresholds.
//
// Exit codes: 0 success, 2 usage/domain error, 3 threshold unreachable,
// 4 bound violation in an experiment.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cmsvkit/certify.hpp"
#include "cmsvkit/harness.hpp"
#include "cmsvkit/io.hpp"

namespace {

using namespace cmsvkit;

QExponent parse_q(const std::string& text) {
  if (text == "inf" || text == "Inf" || text == "INF") return QExponent::infinity();
  return QExponent(std::stod(text));
}

nlohmann::ordered_json estimate_to_json(const CmsvEstimate<double>& est) {
  nlohmann::ordered_json j;
  j["q"] = est.q.is_infinite() ? nlohmann::ordered_json("inf")
                               : nlohmann::ordered_json(est.q.value());
  j["s"] = est.s;
  j["value"] = est.value;
  j["method"] = est.method == CmsvMethod::oracle ? "oracle" : "multistart";
  j["restarts"] = est.restarts;
  j["converged_fraction"] = est.converged_fraction;
  j["matrix_scale"] = est.matrix_scale;
  std::vector<double> witness(est.witness.data(), est.witness.data() + est.witness.size());
  j["witness"] = witness;
  return j;
}

int cmd_gen_matrix(const std::string& kind, Index n, Index m, std::uint64_t seed,
                   const std::string& normalization, const std::string& out) {
  EnsembleSpec spec;
  spec.kind = ensemble_kind_from_string(kind);
  spec.n = n;
  spec.m = m;
  spec.seed = seed;
  spec.normalization = normalization_from_string(normalization);
  const auto A = generate<double>(spec);
  save_matrix(out, A);
  std::cout << matrix_header(A).dump(2) << "\n";
  return 0;
}

int cmd_cmsv(const std::string& matrix_path, const std::string& q_text, double s, bool oracle,
             std::int64_t samples, int restarts, int iters, std::uint64_t seed) {
  const auto A = load_matrix<double>(matrix_path);
  const QExponent q = parse_q(q_text);
  CmsvEstimate<double> est;
  if (oracle) {
    if (A.cols() > 10) {
      std::cerr << "cmsv: --oracle is a dense sampler and is only trustworthy for N <= 10 "
                   "(got N = "
                << A.cols() << "); use the multistart estimator instead\n";
      return 2;
    }
    OracleOptions opts;
    opts.seed = seed;
    est = cmsv_oracle(A, q, s, samples, opts);
  } else {
    SearchBudget budget;
    budget.restarts = restarts;
    budget.max_iters = iters;
    budget.seed = seed;
    est = estimate_cmsv(A, q, s, budget);
  }
  std::cout << estimate_to_json(est).dump(2) << "\n";
  return 0;
}

int cmd_solve(const std::string& matrix_path, const std::string& y_path, double epsilon,
              int max_iter, double opt_tol, double feas_tol, const std::string& out) {
  BpProblem<double> problem;
  problem.A = load_matrix<double>(matrix_path);
  problem.y = vector_from_csv<double>(read_text_file(y_path));
  problem.epsilon = epsilon;
  SolverOptions opts;
  opts.max_iter = max_iter;
  opts.opt_tol = opt_tol;
  opts.feas_tol = feas_tol;
  const auto result = solve_bp(problem, opts);
  const auto report = verify_optimality(problem, result, opt_tol, feas_tol);

  nlohmann::ordered_json j;
  j["objective"] = result.objective;
  j["residual"] = result.residual;
  j["iterations"] = result.iterations;
  j["status"] = to_string(result.status);
  j["duality_gap"] = report.gap;
  j["gap_flag"] = report.flag;
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) write_text_file(out, vector_to_csv(result.x_hat));
  return 0;
}

int cmd_certify(const std::string& matrix_path, const std::string& q_text, Index k, double epsilon,
                double sigma_k, bool oracle, std::int64_t samples, int restarts, int iters,
                std::uint64_t seed) {
  const auto A = load_matrix<double>(matrix_path);
  const QExponent q = parse_q(q_text);
  const double s = std::pow(4.0, q.theta()) * static_cast<double>(k);
  if (s > static_cast<double>(A.cols()) + 1e-9)
    throw std::domain_error("certify: required s = 4^{q/(q-1)} k exceeds N; condition cannot hold");
  CmsvEstimate<double> rho;
  if (oracle) {
    OracleOptions opts;
    opts.seed = seed;
    rho = cmsv_oracle(A, q, s, samples, opts);
  } else {
    SearchBudget budget;
    budget.restarts = restarts;
    budget.max_iters = iters;
    budget.seed = seed;
    rho = estimate_cmsv(A, q, s, budget);
  }
  const BoundCertificate cert = make_certificate(q, k, sigma_k, epsilon, rho);
  std::cout << to_json(cert).dump(2) << "\n";
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir, int threads) {
  const auto config_json = nlohmann::json::parse(read_text_file(config_path));
  const ExperimentConfig cfg = experiment_config_from_json(config_json);

  const auto start = std::chrono::steady_clock::now();
  const ExperimentResult result = run_experiment<double>(cfg, threads);
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  std::cerr << "experiment: " << result.records.size() << " trials in " << elapsed.count()
            << " ms\n";

  std::filesystem::create_directories(out_dir);
  write_text_file((std::filesystem::path(out_dir) / "results.csv").string(), result.results_csv());
  const auto summary = result.summary(cfg);
  write_text_file((std::filesystem::path(out_dir) / "summary.json").string(),
                  summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";

  if (result.violations > 0 && cfg.rho_mode == RhoMode::oracle) {
    std::cerr << "experiment: " << result.violations
              << " bound violation(s) with oracle-grade rho\n";
    return 4;
  }
  return 0;
}

int cmd_min_measurements(double delta, Index k, Index n, double m_norm, double c,
                         const std::string& q_text) {
  ComplexityQuery query;
  query.delta = delta;
  query.k = k;
  query.n = n;
  query.M = m_norm;
  query.C = c;
  query.q = parse_q(q_text);
  const MinMeasurements result = min_measurements(query);
  if (!result.reachable) {
    std::cerr << "min-measurements: threshold unreachable below cap " << kMinMeasurementsCap
              << "\n";
    return 3;
  }
  std::cout << result.m << " (branch: " << (result.branch_q_below_2 ? "1<q<2" : "2<=q<=inf")
            << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"q-ratio CMSV toolkit: sparsity measures, CMSV estimation, basis pursuit, "
               "recovery-bound certification"};
  app.require_subcommand(1);

  // gen-matrix
  auto* gen = app.add_subcommand("gen-matrix", "generate a measurement matrix (CSV + JSON header)");
  std::string gen_kind, gen_norm = "unit_row_l2", gen_out = "matrix";
  Index gen_n = 0, gen_m = 0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--kind", gen_kind, "gaussian | rademacher | partial_hadamard | partial_dct")
      ->required();
  gen->add_option("--n", gen_n, "signal dimension N")->required();
  gen->add_option("--m", gen_m, "number of rows m")->required();
  gen->add_option("--seed", gen_seed, "ensemble seed");
  gen->add_option("--normalization", gen_norm, "unit_row_l2 | one_over_sqrt_m");
  gen->add_option("--out", gen_out, "output base path (writes <out>.csv and <out>.json)");

  // cmsv
  auto* cmsv = app.add_subcommand("cmsv", "estimate rho_{q,s}(A)");
  std::string cmsv_matrix, cmsv_q = "2";
  double cmsv_s = 1.0;
  bool cmsv_oracle_flag = false;
  std::int64_t cmsv_samples = 100000;
  int cmsv_restarts = 64, cmsv_iters = 500;
  std::uint64_t cmsv_seed = 0;
  cmsv->add_option("--matrix", cmsv_matrix, "matrix CSV path")->required();
  cmsv->add_option("--q", cmsv_q, "norm exponent in (1, inf], e.g. 2 or inf")->required();
  cmsv->add_option("--s", cmsv_s, "sparsity level in [1, N]")->required();
  cmsv->add_flag("--oracle", cmsv_oracle_flag, "use the brute-force sampler (N <= 10)");
  cmsv->add_option("--samples", cmsv_samples, "oracle sample count");
  cmsv->add_option("--restarts", cmsv_restarts, "multistart restarts");
  cmsv->add_option("--iters", cmsv_iters, "descent iterations per restart");
  cmsv->add_option("--seed", cmsv_seed, "search seed");

  // solve
  auto* solve = app.add_subcommand("solve", "solve basis pursuit (noise-free or noisy)");
  std::string solve_matrix, solve_y, solve_out;
  double solve_eps = 0.0, solve_opt_tol = 1e-7, solve_feas_tol = -1.0;
  int solve_max_iter = 50000;
  solve->add_option("--matrix", solve_matrix, "matrix CSV path")->required();
  solve->add_option("--y", solve_y, "measurement vector CSV path")->required();
  solve->add_option("--epsilon", solve_eps, "noise level (0 = equality constraint)");
  solve->add_option("--max-iter", solve_max_iter, "iteration cap");
  solve->add_option("--opt-tol", solve_opt_tol, "optimality tolerance");
  solve->add_option("--feas-tol", solve_feas_tol, "feasibility tolerance (<0: auto)");
  solve->add_option("--out", solve_out, "write the solution vector CSV here");

  // certify
  auto* certify = app.add_subcommand("certify", "evaluate recovery conditions and error bounds");
  std::string cert_matrix, cert_q = "2";
  Index cert_k = 1;
  double cert_eps = 0.0, cert_sigma_k = 0.0;
  bool cert_oracle = false;
  std::int64_t cert_samples = 100000;
  int cert_restarts = 64, cert_iters = 500;
  std::uint64_t cert_seed = 0;
  certify->add_option("--matrix", cert_matrix, "matrix CSV path")->required();
  certify->add_option("--q", cert_q, "norm exponent")->required();
  certify->add_option("--k", cert_k, "target sparsity")->required();
  certify->add_option("--epsilon", cert_eps, "noise level");
  certify->add_option("--sigma-k", cert_sigma_k, "best k-term approximation error of the signal");
  certify->add_flag("--oracle", cert_oracle, "oracle-grade rho (N <= 10)");
  certify->add_option("--samples", cert_samples, "oracle sample count");
  certify->add_option("--restarts", cert_restarts, "multistart restarts");
  certify->add_option("--iters", cert_iters, "descent iterations per restart");
  certify->add_option("--seed", cert_seed, "search seed");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run a seeded Monte Carlo campaign");
  std::string exp_config, exp_out = "experiment_out";
  int exp_threads = 0;
  experiment->add_option("--config", exp_config, "experiment config JSON")->required();
  experiment->add_option("--out", exp_out, "output directory (results.csv, summary.json)");
  experiment->add_option("--threads", exp_threads, "worker override (default: CMSVKIT_THREADS)");

  // min-measurements
  auto* minm = app.add_subcommand("min-measurements", "sample-complexity threshold");
  double mm_delta = 2.0, mm_M = 1.0, mm_C = 1.0;
  Index mm_k = 1, mm_n = 2;
  std::string mm_q = "2";
  minm->add_option("--delta", mm_delta, "delta >= 1 (2 exact, 4 stable/robust)")->required();
  minm->add_option("--k", mm_k, "target sparsity")->required();
  minm->add_option("--n", mm_n, "signal dimension N")->required();
  minm->add_option("--m-norm", mm_M, "row norm M of the orthogonal system");
  minm->add_option("--c", mm_C, "concentration constant C");
  minm->add_option("--q", mm_q, "norm exponent")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed())
      return cmd_gen_matrix(gen_kind, gen_n, gen_m, gen_seed, gen_norm, gen_out);
    if (cmsv->parsed())
      return cmd_cmsv(cmsv_matrix, cmsv_q, cmsv_s, cmsv_oracle_flag, cmsv_samples, cmsv_restarts,
                      cmsv_iters, cmsv_seed);
    if (solve->parsed())
      return cmd_solve(solve_matrix, solve_y, solve_eps, solve_max_iter, solve_opt_tol,
                       solve_feas_tol, solve_out);
    if (certify->parsed())
      return cmd_certify(cert_matrix, cert_q, cert_k, cert_eps, cert_sigma_k, cert_oracle,
                         cert_samples, cert_restarts, cert_iters, cert_seed);
    if (experiment->parsed()) return cmd_experiment(exp_config, exp_out, exp_threads);
    if (minm->parsed()) return cmd_min_measurements(mm_delta, mm_k, mm_n, mm_M, mm_C, mm_q);
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
