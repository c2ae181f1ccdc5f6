#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "cmsvkit/io.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

const std::string& binary_path() {
  static const std::string path = [] {
    const char* env = std::getenv("CMSVKIT_BIN");
    REQUIRE_MESSAGE(env != nullptr, "CMSVKIT_BIN must point at the cmsvkit binary");
    return std::string(env);
  }();
  return path;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "cmsvkit_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  std::ostringstream out;
  out << file.rdbuf();
  return out.str();
}

CliResult run_cli(const std::string& args, const std::string& tag) {
  const fs::path out_file = work_dir() / (tag + ".out");
  const fs::path err_file = work_dir() / (tag + ".err");
  const std::string command = binary_path() + " " + args + " > " + out_file.string() + " 2> " +
                              err_file.string();
  const int raw = std::system(command.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(raw);
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

}  // namespace

TEST_CASE("no subcommand is a usage error") {
  CHECK(run_cli("", "noargs").exit_code == 2);
  CHECK(run_cli("bogus-subcommand", "bogus").exit_code == 2);
}

TEST_CASE("gen-matrix writes deterministic files and records the header") {
  const std::string base_a = (work_dir() / "had_a").string();
  const std::string base_b = (work_dir() / "had_b").string();
  const auto a = run_cli("gen-matrix --kind partial_hadamard --n 8 --m 4 --seed 1 --out " + base_a,
                         "gen_a");
  REQUIRE(a.exit_code == 0);
  const auto b = run_cli("gen-matrix --kind partial_hadamard --n 8 --m 4 --seed 1 --out " + base_b,
                         "gen_b");
  REQUIRE(b.exit_code == 0);

  CHECK(slurp(base_a + ".csv") == slurp(base_b + ".csv"));  // byte identical
  CHECK(slurp(base_a + ".json") == slurp(base_b + ".json"));

  const auto header = nlohmann::json::parse(slurp(base_a + ".json"));
  CHECK(header.at("kind") == "partial_hadamard");
  CHECK(header.at("row_l2") == 1.0);
  CHECK(header.at("m") == 4);
}

TEST_CASE("gen-matrix rejects a non power-of-2 Hadamard size with exit 2") {
  const auto result = run_cli("gen-matrix --kind partial_hadamard --n 6 --m 3 --seed 1 --out " +
                                  (work_dir() / "bad").string(),
                              "gen_bad");
  CHECK(result.exit_code == 2);
  CHECK(result.err.find("power of 2") != std::string::npos);
}

TEST_CASE("cmsv on the identity matrix") {
  const std::string base = (work_dir() / "eye").string();
  cmsvkit::MeasurementMatrixd I;
  I.entries = cmsvkit::MatrixX<double>::Identity(3, 3);
  cmsvkit::save_matrix(base, I);

  const auto result =
      run_cli("cmsv --matrix " + base + ".csv --q 2 --s 3 --restarts 16 --iters 200", "cmsv_eye");
  REQUIRE(result.exit_code == 0);
  const auto j = nlohmann::json::parse(result.out);
  CHECK(j.at("value").get<double>() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(j.at("method") == "multistart");

  const auto oracle = run_cli("cmsv --matrix " + base + ".csv --q 2 --s 3 --oracle --samples 5000",
                              "cmsv_eye_oracle");
  REQUIRE(oracle.exit_code == 0);
  CHECK(nlohmann::json::parse(oracle.out).at("method") == "oracle");
}

TEST_CASE("cmsv near-kernel instance and oracle size refusal") {
  const std::string base = (work_dir() / "ones").string();
  cmsvkit::MeasurementMatrixd A;
  A.entries = cmsvkit::MatrixX<double>::Ones(1, 2);
  cmsvkit::save_matrix(base, A);
  const auto result = run_cli("cmsv --matrix " + base + ".csv --q 2 --s 2", "cmsv_ones");
  REQUIRE(result.exit_code == 0);
  CHECK(nlohmann::json::parse(result.out).at("value").get<double>() <= 1e-6);

  const std::string big = (work_dir() / "big").string();
  cmsvkit::MeasurementMatrixd B;
  B.entries = cmsvkit::MatrixX<double>::Identity(12, 12);
  cmsvkit::save_matrix(big, B);
  const auto refusal = run_cli("cmsv --matrix " + big + ".csv --q 2 --s 3 --oracle", "cmsv_refuse");
  CHECK(refusal.exit_code == 2);
  CHECK(refusal.err.find("N <= 10") != std::string::npos);
}

TEST_CASE("solve and certify round trip") {
  const std::string base = (work_dir() / "solve_mat").string();
  const auto gen = run_cli("gen-matrix --kind gaussian --n 12 --m 6 --seed 5 --out " + base,
                           "gen_solve");
  REQUIRE(gen.exit_code == 0);

  const auto A = cmsvkit::load_matrix<double>(base + ".csv");
  cmsvkit::VectorX<double> x = cmsvkit::VectorX<double>::Zero(12);
  x[3] = 1.0;
  const std::string y_path = (work_dir() / "y.csv").string();
  cmsvkit::write_text_file(y_path, cmsvkit::vector_to_csv((A.entries * x).eval()));

  const std::string sol_path = (work_dir() / "sol.csv").string();
  const auto solve = run_cli("solve --matrix " + base + ".csv --y " + y_path +
                                 " --epsilon 0 --out " + sol_path,
                             "solve");
  REQUIRE(solve.exit_code == 0);
  const auto report = nlohmann::json::parse(solve.out);
  CHECK(report.at("status") == "converged");
  CHECK(report.at("duality_gap").get<double>() <= 1e-6);
  const auto solution = cmsvkit::vector_from_csv<double>(slurp(sol_path));
  CHECK((solution - x).norm() <= 1e-6);

  const auto certify = run_cli("certify --matrix " + base + ".csv --q inf --k 1 --epsilon 0.01 " +
                                   "--sigma-k 0 --restarts 16 --iters 200",
                               "certify");
  REQUIRE(certify.exit_code == 0);
  const auto cert = nlohmann::json::parse(certify.out);
  CHECK(cert.at("q") == "inf");
  CHECK(cert.at("s_required").get<double>() == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(cert.at("empirical_flag") == true);
  CHECK(cert.contains("l1_bound_improved"));
}

TEST_CASE("min-measurements output and exit codes") {
  const auto small = run_cli("min-measurements --delta 2 --k 2 --n 256 --m-norm 1 --c 1 --q 2",
                             "mm_small");
  REQUIRE(small.exit_code == 0);
  CHECK(small.out.find("1067897") != std::string::npos);

  const auto delta2 = run_cli("min-measurements --delta 2 --k 1 --n 64 --m-norm 1 --c 0.2 --q 2",
                              "mm_d2");
  const auto delta4 = run_cli("min-measurements --delta 4 --k 1 --n 64 --m-norm 1 --c 0.2 --q 2",
                              "mm_d4");
  REQUIRE(delta2.exit_code == 0);
  REQUIRE(delta4.exit_code == 0);
  CHECK(std::stoll(delta4.out) > std::stoll(delta2.out));

  const auto unreachable =
      run_cli("min-measurements --delta 2 --k 2 --n 256 --m-norm 1 --c 1e6 --q 2", "mm_cap");
  CHECK(unreachable.exit_code == 3);
}

TEST_CASE("experiment determinism end to end") {
  nlohmann::json config = {
      {"ensemble", {{"kind", "gaussian"}, {"n", 10}}},
      {"m_grid", {5, 8}},
      {"signal", {{"law", "gaussian"}}},
      {"k_grid", {1}},
      {"q_grid", {"inf"}},
      {"epsilon_grid", {0.0, 0.01}},
      {"trials", 2},
      {"master_seed", 7},
      {"rho_mode", "oracle"},
      {"oracle_samples", 2000},
      {"solver", {{"max_iter", 20000}}},
  };
  const std::string cfg_path = (work_dir() / "cfg.json").string();
  cmsvkit::write_text_file(cfg_path, config.dump(2));

  const std::string out_a = (work_dir() / "exp_a").string();
  const std::string out_b = (work_dir() / "exp_b").string();
  const auto a = run_cli("experiment --config " + cfg_path + " --out " + out_a, "exp_a");
  REQUIRE(a.exit_code == 0);
  const auto b = run_cli("experiment --config " + cfg_path + " --out " + out_b + " --threads 2",
                         "exp_b");
  REQUIRE(b.exit_code == 0);

  CHECK(slurp(fs::path(out_a) / "results.csv") == slurp(fs::path(out_b) / "results.csv"));
  CHECK(slurp(fs::path(out_a) / "summary.json") == slurp(fs::path(out_b) / "summary.json"));

  const auto summary = nlohmann::json::parse(slurp(fs::path(out_a) / "summary.json"));
  CHECK(summary.at("records") == 8);
  CHECK(summary.at("bound_violations") == 0);
}
