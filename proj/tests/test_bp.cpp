#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "cmsvkit/bp.hpp"
#include "cmsvkit/certify.hpp"
#include "cmsvkit/ensembles.hpp"

using namespace cmsvkit;

namespace {

MeasurementMatrixd gaussian_matrix(Index m, Index n, std::uint64_t seed,
                                   Normalization norm = Normalization::unit_row_l2) {
  EnsembleSpec spec;
  spec.kind = EnsembleKind::gaussian;
  spec.m = m;
  spec.n = n;
  spec.seed = seed;
  spec.normalization = norm;
  return generate<double>(spec);
}

// Independent reference for tiny equality-constrained instances: enumerate
// all candidate supports (LP vertices are basic solutions), solve each
// square/overdetermined subsystem, and track the l1-minimal consistent one.
struct VertexScan {
  VectorX<double> argmin;
  double min_l1 = std::numeric_limits<double>::infinity();
  double second_l1 = std::numeric_limits<double>::infinity();
};

VertexScan enumerate_bp_vertices(const MatrixX<double>& A, const VectorX<double>& y) {
  const Index m = A.rows(), n = A.cols();
  VertexScan scan;
  const Index max_support = std::min(m, n);
  std::vector<Index> support;
  auto recurse = [&](auto&& self, Index start) -> void {
    if (!support.empty()) {
      MatrixX<double> sub(m, static_cast<Index>(support.size()));
      for (std::size_t j = 0; j < support.size(); ++j)
        sub.col(static_cast<Index>(j)) = A.col(support[j]);
      const VectorX<double> w = sub.completeOrthogonalDecomposition().solve(y);
      if ((sub * w - y).norm() < 1e-10) {
        VectorX<double> z = VectorX<double>::Zero(n);
        for (std::size_t j = 0; j < support.size(); ++j) z[support[j]] = w[static_cast<Index>(j)];
        const double l1 = z.lpNorm<1>();
        if (l1 < scan.min_l1 - 1e-12) {
          scan.second_l1 = scan.min_l1;
          scan.min_l1 = l1;
          scan.argmin = z;
        } else if (l1 > scan.min_l1 + 1e-12 && l1 < scan.second_l1) {
          scan.second_l1 = l1;
        }
      }
    }
    if (static_cast<Index>(support.size()) == max_support) return;
    for (Index i = start; i < n; ++i) {
      support.push_back(i);
      self(self, i + 1);
      support.pop_back();
    }
  };
  recurse(recurse, 0);
  return scan;
}

}  // namespace

TEST_CASE("identity measurements recover the signal") {
  MeasurementMatrixd A;
  A.entries = MatrixX<double>::Identity(5, 5);
  VectorX<double> x(5);
  x << 0, -2, 0, 0.5, 0;
  BpProblem<double> problem{A, x, 0.0};
  SolverOptions opts;
  opts.opt_tol = 1e-10;  // the trivial instance certifies essentially exactly
  const auto result = solve_bp(problem, opts);
  CHECK(result.status == SolveStatus::converged);
  CHECK((result.x_hat - x).norm() < 1e-9);
  CHECK(verify_optimality(problem, result).gap < 1e-9);
}

TEST_CASE("zero is returned when feasible") {
  MeasurementMatrixd A = gaussian_matrix(3, 6, 1);
  VectorX<double> y = VectorX<double>::Zero(3);

  BpProblem<double> trivial{A, y, 0.0};
  CHECK(solve_bp(trivial).x_hat.norm() == 0.0);

  y << 0.1, -0.2, 0.05;
  BpProblem<double> big_ball{A, y, y.norm() * 1.5};
  const auto result = solve_bp(big_ball);
  CHECK(result.x_hat.norm() == 0.0);
  CHECK(result.status == SolveStatus::converged);
}

TEST_CASE("2x3 instance with enumerated vertex oracle") {
  MeasurementMatrixd A;
  A.entries.resize(2, 3);
  A.entries << 1, 0, 1, 0, 1, 1;
  A.entries /= std::sqrt(2.0);
  VectorX<double> x(3);
  x << 0, 0, 1;
  const VectorX<double> y = A.entries * x;

  const VertexScan scan = enumerate_bp_vertices(A.entries, y);
  REQUIRE(scan.min_l1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((scan.argmin - x).norm() < 1e-12);
  CHECK(scan.second_l1 > scan.min_l1 + 0.5);  // unique minimizer with a real gap

  BpProblem<double> problem{A, y, 0.0};
  const auto result = solve_bp(problem);
  CHECK((result.x_hat - x).norm() < 1e-8);
}

TEST_CASE("feasibility at convergence on random instances") {
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index m = 5 + trial % 6;
    const Index n = m + 4 + trial % 9;
    MeasurementMatrixd A = gaussian_matrix(m, n, 100 + trial);
    const auto x = sparse_signal<double>(n, 2, 900 + trial, MagnitudeLaw::gaussian);
    const double epsilon = (trial % 3 == 0) ? 0.0 : 0.05;
    const VectorX<double> e = noise_vector<double>(m, epsilon, trial) ;
    BpProblem<double> problem{A, A.entries * x.entries + e, epsilon};
    const auto result = solve_bp(problem);
    if (result.status != SolveStatus::converged) continue;
    ++checked;
    CHECK(result.residual <= epsilon + 1e-8);
  }
  CHECK(checked >= 95);
}

TEST_CASE("duality gap at convergence and perturbation flag") {
  for (int trial = 0; trial < 10; ++trial) {
    MeasurementMatrixd A = gaussian_matrix(10, 30, 50 + trial);
    const auto x = sparse_signal<double>(30, 3, 70 + trial, MagnitudeLaw::gaussian);
    BpProblem<double> problem{A, A.entries * x.entries, 0.0};
    const auto result = solve_bp(problem);
    REQUIRE(result.status == SolveStatus::converged);
    const auto report = verify_optimality(problem, result);
    CHECK(report.gap >= -1e-12);  // weak duality: certificate never overshoots
    CHECK(report.gap <= 1e-6);
    CHECK_FALSE(report.flag);

    VectorX<double> perturbed = result.x_hat;
    perturbed[4] += 0.1;
    const auto bad = verify_optimality(problem, perturbed, result.dual);
    CHECK(bad.flag);
  }
}

TEST_CASE("objective epsilon-monotonicity") {
  for (int trial = 0; trial < 20; ++trial) {
    MeasurementMatrixd A = gaussian_matrix(8, 24, 200 + trial);
    const auto x = sparse_signal<double>(24, 3, 300 + trial, MagnitudeLaw::gaussian);
    const VectorX<double> y = A.entries * x.entries;
    double previous = -std::numeric_limits<double>::infinity();
    for (double epsilon : {0.1, 0.01, 0.0}) {
      BpProblem<double> problem{A, y, epsilon};
      const auto result = solve_bp(problem);
      REQUIRE(result.status == SolveStatus::converged);
      CHECK(result.objective >= previous - 1e-7);
      previous = result.objective;
    }
  }
}

TEST_CASE("best-so-far objective trace is non-increasing") {
  MeasurementMatrixd A = gaussian_matrix(10, 40, 8);
  const auto x = sparse_signal<double>(40, 4, 9, MagnitudeLaw::gaussian);
  SolverOptions opts;
  opts.trace = true;
  BpProblem<double> problem{A, A.entries * x.entries, 0.0};
  const auto result = solve_bp(problem, opts);
  REQUIRE(result.objective_trace.size() > 1);
  for (std::size_t i = 1; i < result.objective_trace.size(); ++i)
    CHECK(result.objective_trace[i] <= result.objective_trace[i - 1] + 1e-12);
}

TEST_CASE("exact recovery rate in the classical regime") {
  // 20x100 with k = 3 sits on the empirical 95% phase contour, so a few
  // instances genuinely have an l1 minimizer different from x. Those carry a
  // duality certificate (optimum provably below ||x||_1) and are counted as
  // model failures; the solver itself must recover every recoverable
  // instance.
  int recovered = 0, certified_model_failures = 0, solver_failures = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    MeasurementMatrixd A = gaussian_matrix(20, 100, 1000 + trial);
    const auto x = sparse_signal<double>(100, 3, 5000 + trial, MagnitudeLaw::gaussian);
    BpProblem<double> problem{A, A.entries * x.entries, 0.0};
    const auto result = solve_bp(problem);
    if ((result.x_hat - x.entries).norm() <= 1e-6) {
      ++recovered;
      continue;
    }
    const auto report = verify_optimality(problem, result);
    const bool certified_lower = report.gap <= 1e-5 &&
                                 result.objective < x.entries.lpNorm<1>() - 1e-8 - report.gap;
    if (certified_lower)
      ++certified_model_failures;
    else
      ++solver_failures;
  }
  MESSAGE("recovered ", recovered, "/", trials, ", certified model failures ",
          certified_model_failures);
  CHECK(solver_failures == 0);
  const int recoverable = trials - certified_model_failures;
  CHECK(recovered >= (recoverable * 95 + 99) / 100);  // >= 95% of recoverable instances
  CHECK(recovered >= 180);                            // and the regime itself stays classical
}

TEST_CASE("infeasible equality system is reported") {
  MeasurementMatrixd A;
  A.entries.resize(2, 2);
  A.entries << 1, 0, 1, 0;  // rank 1
  VectorX<double> y(2);
  y << 1, -1;  // off the range
  BpProblem<double> problem{A, y, 0.0};
  const auto result = solve_bp(problem);
  CHECK(result.status == SolveStatus::infeasible);

  BpProblem<double> noisy{A, y, 0.1};  // distance to range is 1/sqrt(2) > 0.1
  CHECK(solve_bp(noisy).status == SolveStatus::infeasible);
}

TEST_CASE("iteration cap yields max_iter status with the best iterate") {
  MeasurementMatrixd A = gaussian_matrix(10, 40, 31);
  const auto x = sparse_signal<double>(40, 4, 32, MagnitudeLaw::gaussian);
  SolverOptions opts;
  opts.max_iter = 3;
  opts.debias = false;
  BpProblem<double> problem{A, A.entries * x.entries, 0.0};
  const auto result = solve_bp(problem, opts);
  CHECK(result.status == SolveStatus::max_iter);
  CHECK(result.x_hat.allFinite());
  CHECK(result.residual < 1e-8);  // the projected iterate is always feasible
}

TEST_CASE("problem validation") {
  MeasurementMatrixd A = gaussian_matrix(3, 5, 2);
  BpProblem<double> bad_dim{A, VectorX<double>::Zero(4), 0.0};
  CHECK_THROWS_AS(solve_bp(bad_dim), std::domain_error);
  BpProblem<double> bad_eps{A, VectorX<double>::Zero(3), -0.5};
  CHECK_THROWS_AS(solve_bp(bad_eps), std::domain_error);
}
