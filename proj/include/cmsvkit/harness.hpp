#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "cmsvkit/certify.hpp"
#include "cmsvkit/io.hpp"

namespace cmsvkit {

enum class RhoMode { none, oracle, estimate };

inline const char* to_string(RhoMode mode) {
  switch (mode) {
    case RhoMode::oracle: return "oracle";
    case RhoMode::estimate: return "estimate";
    default: return "none";
  }
}

inline RhoMode rho_mode_from_string(const std::string& s) {
  if (s == "none") return RhoMode::none;
  if (s == "oracle") return RhoMode::oracle;
  if (s == "estimate") return RhoMode::estimate;
  throw std::invalid_argument("unknown rho_mode: " + s);
}

/// Monte Carlo campaign description. Parsed from a single JSON file; the
/// grid is the cartesian product m_grid x k_grid x q_grid x epsilon_grid in
/// that nesting order.
struct ExperimentConfig {
  EnsembleKind kind = EnsembleKind::gaussian;
  Index n = 32;
  Normalization normalization = Normalization::unit_row_l2;
  std::vector<Index> m_grid;
  MagnitudeLaw signal_law = MagnitudeLaw::gaussian;
  double decay_p = 1.0;
  std::vector<Index> k_grid;
  std::vector<QExponent> q_grid;
  std::vector<double> epsilon_grid;
  int trials = 1;
  std::uint64_t master_seed = 0;
  RhoMode rho_mode = RhoMode::none;
  std::int64_t oracle_samples = 50000;
  SearchBudget estimator;
  SolverOptions solver;
  double success_threshold = 1e-4;

  void validate() const {
    if (trials < 1) throw std::domain_error("ExperimentConfig: trials >= 1 required");
    if (m_grid.empty() || k_grid.empty() || q_grid.empty() || epsilon_grid.empty())
      throw std::domain_error("ExperimentConfig: grids must be nonempty");
    for (Index m : m_grid)
      if (m < 1) throw std::domain_error("ExperimentConfig: m >= 1 required");
    for (Index k : k_grid)
      if (k < 1 || k > n) throw std::domain_error("ExperimentConfig: need 1 <= k <= N");
    for (const QExponent& q : q_grid) q.require_cmsv_domain();
    for (double eps : epsilon_grid)
      if (!(eps >= 0.0)) throw std::domain_error("ExperimentConfig: epsilon >= 0 required");
  }
};

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  const auto& ensemble = j.at("ensemble");
  cfg.kind = ensemble_kind_from_string(ensemble.at("kind").get<std::string>());
  cfg.n = ensemble.at("n").get<Index>();
  if (ensemble.contains("normalization"))
    cfg.normalization = normalization_from_string(ensemble["normalization"].get<std::string>());
  cfg.m_grid = j.at("m_grid").get<std::vector<Index>>();
  const auto& signal = j.at("signal");
  cfg.signal_law = magnitude_law_from_string(signal.at("law").get<std::string>());
  cfg.decay_p = signal.value("decay_p", 1.0);
  cfg.k_grid = j.at("k_grid").get<std::vector<Index>>();
  for (const auto& entry : j.at("q_grid")) cfg.q_grid.push_back(q_from_json(entry));
  cfg.epsilon_grid = j.at("epsilon_grid").get<std::vector<double>>();
  cfg.trials = j.at("trials").get<int>();
  cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("rho_mode")) cfg.rho_mode = rho_mode_from_string(j["rho_mode"].get<std::string>());
  cfg.oracle_samples = j.value("oracle_samples", std::int64_t(50000));
  if (j.contains("estimator")) {
    const auto& est = j["estimator"];
    cfg.estimator.restarts = est.value("restarts", 64);
    cfg.estimator.max_iters = est.value("max_iters", 500);
  }
  if (j.contains("solver")) {
    const auto& solver = j["solver"];
    cfg.solver.max_iter = solver.value("max_iter", 50000);
    cfg.solver.opt_tol = solver.value("opt_tol", 1e-7);
    cfg.solver.feas_tol = solver.value("feas_tol", -1.0);
  }
  cfg.success_threshold = j.value("success_threshold", 1e-4);
  return cfg;
}

/// One row per (parameter tuple, trial). Timing is deliberately not part of
/// the record: outputs must be byte-identical across reruns.
struct TrialRecord {
  int schema_version = 1;
  Index tuple_index = 0;
  int trial_index = 0;
  std::uint64_t trial_seed = 0;
  EnsembleKind kind = EnsembleKind::gaussian;
  Index m = 0;
  Index n = 0;
  Index k = 0;
  QExponent q{2.0};
  double epsilon = 0.0;
  MagnitudeLaw signal_law = MagnitudeLaw::gaussian;
  double decay_p = 1.0;
  RhoMode rho_mode = RhoMode::none;
  double rho_value = 0.0;
  double rho_s = 0.0;
  double s_required = 0.0;
  double sigma_k = 0.0;
  bool cond_exact = false;
  bool cond_stable = false;
  double l1_bound = 0.0;
  double lq_bound = 0.0;
  double l1_bound_improved = 0.0;
  double err_l1 = 0.0;
  double err_lq = 0.0;
  double err_l2 = 0.0;
  bool success = false;
  bool bounds_checked = false;
  bool violation = false;
  SolveStatus solver_status = SolveStatus::converged;
  int iterations = 0;
};

inline const char* trial_record_csv_header() {
  return "schema_version,tuple_index,trial_index,trial_seed,kind,m,n,k,q,epsilon,signal_law,"
         "decay_p,rho_mode,rho_value,rho_s,s_required,sigma_k,cond_exact,cond_stable,l1_bound,"
         "lq_bound,l1_bound_improved,err_l1,err_lq,err_l2,success,bounds_checked,violation,"
         "solver_status,iterations";
}

inline std::string to_csv_row(const TrialRecord& r) {
  std::string out;
  auto add = [&](const std::string& field) {
    if (!out.empty()) out += ',';
    out += field;
  };
  add(std::to_string(r.schema_version));
  add(std::to_string(r.tuple_index));
  add(std::to_string(r.trial_index));
  add(std::to_string(r.trial_seed));
  add(to_string(r.kind));
  add(std::to_string(r.m));
  add(std::to_string(r.n));
  add(std::to_string(r.k));
  add(r.q.is_infinite() ? "inf" : format_double(r.q.value()));
  add(format_double(r.epsilon));
  add(to_string(r.signal_law));
  add(format_double(r.decay_p));
  add(to_string(r.rho_mode));
  add(format_double(r.rho_value));
  add(format_double(r.rho_s));
  add(format_double(r.s_required));
  add(format_double(r.sigma_k));
  add(r.cond_exact ? "1" : "0");
  add(r.cond_stable ? "1" : "0");
  add(format_double(r.l1_bound));
  add(format_double(r.lq_bound));
  add(format_double(r.l1_bound_improved));
  add(format_double(r.err_l1));
  add(format_double(r.err_lq));
  add(format_double(r.err_l2));
  add(r.success ? "1" : "0");
  add(r.bounds_checked ? "1" : "0");
  add(r.violation ? "1" : "0");
  add(to_string(r.solver_status));
  add(std::to_string(r.iterations));
  return out;
}

struct ExperimentResult {
  std::vector<TrialRecord> records;  // deterministic grid order
  int violations = 0;
  int inconclusive = 0;

  std::string results_csv() const {
    std::string out = trial_record_csv_header();
    out += '\n';
    for (const auto& r : records) {
      out += to_csv_row(r);
      out += '\n';
    }
    return out;
  }

  nlohmann::ordered_json summary(const ExperimentConfig& cfg) const;
};

inline int worker_count(std::size_t tasks) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("CMSVKIT_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
  }
  return static_cast<int>(std::min<std::size_t>(hw, std::max<std::size_t>(tasks, 1)));
}

namespace detail {

struct TupleParams {
  Index tuple_index;
  Index m;
  Index k;
  QExponent q;
  double epsilon;
};

template <typename Scalar>
TrialRecord run_trial(const ExperimentConfig& cfg, const TupleParams& tuple, int trial) {
  TrialRecord record;
  record.tuple_index = tuple.tuple_index;
  record.trial_index = trial;
  record.trial_seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(tuple.tuple_index),
                                  static_cast<std::uint64_t>(trial));
  record.kind = cfg.kind;
  record.m = tuple.m;
  record.n = cfg.n;
  record.k = tuple.k;
  record.q = tuple.q;
  record.epsilon = tuple.epsilon;
  record.signal_law = cfg.signal_law;
  record.decay_p = cfg.decay_p;
  record.rho_mode = cfg.rho_mode;

  EnsembleSpec spec;
  spec.kind = cfg.kind;
  spec.m = tuple.m;
  spec.n = cfg.n;
  spec.seed = derive_seed(record.trial_seed, 1);
  spec.normalization = cfg.normalization;
  const MeasurementMatrix<Scalar> A = generate<Scalar>(spec);

  const Signal<Scalar> x =
      sparse_signal<Scalar>(cfg.n, tuple.k, derive_seed(record.trial_seed, 2), cfg.signal_law,
                            cfg.decay_p);
  const std::uint64_t noise_seed = derive_seed(record.trial_seed, 3);

  record.s_required = std::pow(4.0, tuple.q.theta()) * static_cast<double>(tuple.k);
  record.sigma_k = static_cast<double>(best_k_term_error(x.entries, tuple.k).sigma);

  const bool want_rho = cfg.rho_mode != RhoMode::none &&
                        record.s_required <= static_cast<double>(cfg.n) + 1e-9;
  if (want_rho) {
    const Scalar s_used = static_cast<Scalar>(record.s_required);
    CmsvEstimate<Scalar> rho;
    if (cfg.rho_mode == RhoMode::oracle) {
      OracleOptions opts;
      opts.seed = derive_seed(record.trial_seed, 4);
      rho = cmsv_oracle(A, tuple.q, s_used, cfg.oracle_samples, opts);
    } else {
      SearchBudget budget = cfg.estimator;
      budget.seed = derive_seed(record.trial_seed, 4);
      rho = estimate_cmsv(A, tuple.q, s_used, budget);
    }
    const auto run = validate_run(A, x, tuple.q, tuple.k, static_cast<Scalar>(tuple.epsilon),
                                  noise_seed, cfg.solver, rho);
    record.rho_value = run.certificate.rho;
    record.rho_s = run.certificate.s_used;
    record.cond_exact = run.certificate.exact_ok;
    record.cond_stable = run.certificate.stable_ok;
    record.l1_bound = run.certificate.l1_bound;
    record.lq_bound = run.certificate.lq_bound;
    record.l1_bound_improved = run.certificate.l1_bound_improved;
    record.err_l1 = run.err_l1;
    record.err_lq = run.err_lq;
    record.err_l2 = run.err_l2;
    record.bounds_checked = run.bounds_checked;
    record.violation = run.violation;
    record.solver_status = run.solver_status;
    record.iterations = run.iterations;
    record.success = run.err_l2 <= cfg.success_threshold *
                                       std::max(1.0, static_cast<double>(x.entries.norm()));
    return record;
  }

  const VectorX<Scalar> e =
      noise_vector<Scalar>(tuple.m, static_cast<Scalar>(tuple.epsilon), noise_seed);
  BpProblem<Scalar> problem{A, A.entries * x.entries + e, static_cast<Scalar>(tuple.epsilon)};
  const RecoveryResult<Scalar> recovery = solve_bp(problem, cfg.solver);
  const VectorX<Scalar> h = recovery.x_hat - x.entries;
  record.err_l1 = static_cast<double>(h.template lpNorm<1>());
  record.err_lq = static_cast<double>(lq_norm(h, tuple.q));
  record.err_l2 = static_cast<double>(h.norm());
  record.solver_status = recovery.status;
  record.iterations = recovery.iterations;
  record.success =
      record.err_l2 <= cfg.success_threshold * std::max(1.0, static_cast<double>(x.entries.norm()));
  return record;
}

}  // namespace detail

/// Runs the full campaign. Trials execute in a work pool (CMSVKIT_THREADS
/// caps the worker count); every record lands in its preassigned slot, so the
/// output order and content are independent of scheduling.
template <typename Scalar = double>
ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 0) {
  cfg.validate();

  std::vector<detail::TupleParams> tuples;
  Index tuple_index = 0;
  for (Index m : cfg.m_grid)
    for (Index k : cfg.k_grid)
      for (const QExponent& q : cfg.q_grid)
        for (double eps : cfg.epsilon_grid)
          tuples.push_back({tuple_index++, m, k, q, eps});

  const std::size_t total = tuples.size() * static_cast<std::size_t>(cfg.trials);
  ExperimentResult result;
  result.records.resize(total);

  const int workers = threads > 0 ? threads : worker_count(total);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= total) break;
      const std::size_t tuple = task / static_cast<std::size_t>(cfg.trials);
      const int trial = static_cast<int>(task % static_cast<std::size_t>(cfg.trials));
      result.records[task] = detail::run_trial<Scalar>(cfg, tuples[tuple], trial);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& thread : pool) thread.join();
  }

  for (const auto& record : result.records) {
    if (record.violation) ++result.violations;
    if (record.solver_status != SolveStatus::converged) ++result.inconclusive;
  }
  return result;
}

inline nlohmann::ordered_json ExperimentResult::summary(const ExperimentConfig& cfg) const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["records"] = records.size();
  j["trials_per_tuple"] = cfg.trials;
  j["bound_violations"] = violations;
  j["inconclusive_solves"] = inconclusive;

  nlohmann::ordered_json tuple_stats = nlohmann::ordered_json::array();
  Index current = -1;
  int count = 0, successes = 0, tuple_violations = 0;
  double sum_l1 = 0.0, sum_l2 = 0.0;
  const TrialRecord* head = nullptr;
  auto flush = [&]() {
    if (count == 0) return;
    nlohmann::ordered_json t;
    t["tuple_index"] = head->tuple_index;
    t["m"] = head->m;
    t["k"] = head->k;
    t["q"] = head->q.is_infinite() ? nlohmann::ordered_json("inf")
                                   : nlohmann::ordered_json(head->q.value());
    t["epsilon"] = head->epsilon;
    t["trials"] = count;
    t["success_rate"] = static_cast<double>(successes) / static_cast<double>(count);
    t["mean_err_l1"] = sum_l1 / static_cast<double>(count);
    t["mean_err_l2"] = sum_l2 / static_cast<double>(count);
    t["violations"] = tuple_violations;
    tuple_stats.push_back(std::move(t));
  };
  for (const auto& record : records) {
    if (record.tuple_index != current) {
      flush();
      current = record.tuple_index;
      head = &record;
      count = successes = tuple_violations = 0;
      sum_l1 = sum_l2 = 0.0;
    }
    ++count;
    if (record.success) ++successes;
    if (record.violation) ++tuple_violations;
    sum_l1 += record.err_l1;
    sum_l2 += record.err_l2;
  }
  flush();
  j["tuples"] = std::move(tuple_stats);
  return j;
}

}  // namespace cmsvkit
