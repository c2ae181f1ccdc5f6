#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "cmsvkit/ensembles.hpp"
#include "cmsvkit/types.hpp"

namespace cmsvkit {

/// Shortest round-trip decimal form of a double (locale independent).
inline std::string format_double(double value) {
  char buffer[40];
  const auto res = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, res.ptr);
}

inline double parse_double(std::string_view text) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc()) throw std::invalid_argument("parse_double: bad number: " + std::string(text));
  return value;
}

/// Row-major CSV at full decimal precision; round-trips bit-exactly.
template <typename Derived>
std::string matrix_to_csv(const Eigen::MatrixBase<Derived>& A) {
  std::string out;
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(static_cast<double>(A.derived()(i, j)));
    }
    out += '\n';
  }
  return out;
}

template <typename Scalar>
MatrixX<Scalar> matrix_from_csv(const std::string& text) {
  std::vector<std::vector<Scalar>> rows;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    if (line.empty()) continue;
    std::vector<Scalar> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = line.find(',', start);
      const std::size_t end = comma == std::string::npos ? line.size() : comma;
      row.push_back(static_cast<Scalar>(parse_double(std::string_view(line).substr(start, end - start))));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("matrix_from_csv: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("matrix_from_csv: empty input");
  MatrixX<Scalar> A(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j) A(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return A;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open for writing: " + path);
  file << content;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream out;
  out << file.rdbuf();
  return out.str();
}

/// Matrix header: provenance alongside the CSV payload.
template <typename Scalar>
nlohmann::ordered_json matrix_header(const MeasurementMatrix<Scalar>& A) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = to_string(A.kind);
  j["m"] = A.rows();
  j["n"] = A.cols();
  j["seed"] = A.seed;
  j["row_l2"] = static_cast<double>(A.row_l2);
  return j;
}

/// Writes <base>.csv and <base>.json.
template <typename Scalar>
void save_matrix(const std::string& base_path, const MeasurementMatrix<Scalar>& A) {
  write_text_file(base_path + ".csv", matrix_to_csv(A.entries));
  write_text_file(base_path + ".json", matrix_header(A).dump(2) + "\n");
}

/// Loads from a CSV path; a sibling .json header is honored when present.
template <typename Scalar>
MeasurementMatrix<Scalar> load_matrix(const std::string& csv_path) {
  MeasurementMatrix<Scalar> A;
  A.entries = matrix_from_csv<Scalar>(read_text_file(csv_path));
  std::string header_path = csv_path;
  const std::size_t dot = header_path.rfind(".csv");
  if (dot != std::string::npos) header_path = header_path.substr(0, dot);
  header_path += ".json";
  std::ifstream header(header_path);
  if (header) {
    const nlohmann::json j = nlohmann::json::parse(header);
    A.kind = ensemble_kind_from_string(j.value("kind", std::string("unknown")));
    A.seed = j.value("seed", std::uint64_t(0));
    A.row_l2 = static_cast<Scalar>(j.value("row_l2", 0.0));
  }
  return A;
}

template <typename Scalar>
std::string vector_to_csv(const VectorX<Scalar>& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    out += format_double(static_cast<double>(v[i]));
    out += '\n';
  }
  return out;
}

template <typename Scalar>
VectorX<Scalar> vector_from_csv(const std::string& text) {
  const MatrixX<Scalar> column = matrix_from_csv<Scalar>(text);
  if (column.cols() != 1) throw std::invalid_argument("vector_from_csv: expected one column");
  return column.col(0);
}

}  // namespace cmsvkit
