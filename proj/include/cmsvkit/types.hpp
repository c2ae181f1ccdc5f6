#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmsvkit {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Extended norm exponent q.
///
/// The CMSV machinery works with q in (1, inf]; the sparsity functional
/// additionally admits q in [0, 1) and q = 1, which are evaluated as limits.
/// Infinity is kept as an exact variant so that derived exponents such as
/// theta = q/(q-1) and 1 - 1/q evaluate exactly (theta(inf) = 1) instead of
/// through overflowing floating-point arithmetic.
class QExponent {
 public:
  QExponent() = default;
  explicit QExponent(double q) : value_(q) {
    if (!(q >= 0.0)) throw std::domain_error("QExponent: q must be in [0, inf]");
  }

  static QExponent infinity() {
    QExponent q;
    q.value_ = std::numeric_limits<double>::infinity();
    return q;
  }

  double value() const { return value_; }
  bool is_infinite() const { return std::isinf(value_); }
  bool is_zero() const { return value_ == 0.0; }
  bool is_one() const { return value_ == 1.0; }

  /// Conjugate-style exponent theta(q) = q/(q-1); theta(inf) = 1 exactly.
  /// Strictly decreasing on (1, inf]. Only defined for q > 1.
  double theta() const {
    if (!(value_ > 1.0)) throw std::domain_error("QExponent::theta: requires q > 1");
    if (is_infinite()) return 1.0;
    return value_ / (value_ - 1.0);
  }

  /// 1 - 1/q, the exponent in k^{1-1/q}; equals 1 at q = inf so the
  /// complementary power k^{1-1/q} evaluates to k there.
  double one_minus_inv_q() const {
    if (!(value_ > 0.0)) throw std::domain_error("QExponent::one_minus_inv_q: requires q > 0");
    if (is_infinite()) return 1.0;
    return 1.0 - 1.0 / value_;
  }

  /// 1/q - 1 (the exponent in k^{1/q-1}); equals -1 at q = inf.
  double inv_q_minus_one() const { return -one_minus_inv_q(); }

  /// Throws unless q lies in the CMSV domain (1, inf].
  void require_cmsv_domain() const {
    if (!(value_ > 1.0)) throw std::domain_error("q must lie in (1, inf] here");
  }

  friend bool operator==(const QExponent& a, const QExponent& b) { return a.value_ == b.value_; }
  friend bool operator!=(const QExponent& a, const QExponent& b) { return !(a == b); }

 private:
  double value_ = 2.0;
};

inline std::string to_string(const QExponent& q) {
  if (q.is_infinite()) return "inf";
  return std::to_string(q.value());
}

enum class EnsembleKind { unknown, gaussian, rademacher, partial_hadamard, partial_dct };

inline const char* to_string(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::gaussian: return "gaussian";
    case EnsembleKind::rademacher: return "rademacher";
    case EnsembleKind::partial_hadamard: return "partial_hadamard";
    case EnsembleKind::partial_dct: return "partial_dct";
    default: return "unknown";
  }
}

inline EnsembleKind ensemble_kind_from_string(const std::string& s) {
  if (s == "gaussian") return EnsembleKind::gaussian;
  if (s == "rademacher") return EnsembleKind::rademacher;
  if (s == "partial_hadamard") return EnsembleKind::partial_hadamard;
  if (s == "partial_dct") return EnsembleKind::partial_dct;
  if (s == "unknown") return EnsembleKind::unknown;
  throw std::invalid_argument("unknown ensemble kind: " + s);
}

/// Dense measurement matrix with provenance. row_l2 records the common row
/// l2 norm when the ensemble has one (the flatness constant of row-sampled
/// orthogonal systems); it is 0 when rows are not equal-norm.
template <typename Scalar>
struct MeasurementMatrix {
  MatrixX<Scalar> entries;
  EnsembleKind kind = EnsembleKind::unknown;
  std::uint64_t seed = 0;
  Scalar row_l2 = Scalar(0);
  std::vector<Index> row_indices;  // parent-row draws for sampled ensembles

  Index rows() const { return entries.rows(); }
  Index cols() const { return entries.cols(); }

  void validate() const {
    if (entries.rows() < 1 || entries.cols() < 1)
      throw std::domain_error("MeasurementMatrix: m >= 1 and N >= 1 required");
    if (!entries.allFinite())
      throw std::domain_error("MeasurementMatrix: entries must be finite");
  }
};

using MeasurementMatrixd = MeasurementMatrix<double>;

/// Dense signal with optional sparsity metadata.
template <typename Scalar>
struct Signal {
  VectorX<Scalar> entries;
  std::optional<std::vector<Index>> true_support;
  std::optional<Index> k;

  Index size() const { return entries.size(); }

  void validate() const {
    if (entries.size() < 1) throw std::domain_error("Signal: N >= 1 required");
    if (k && (*k < 1 || *k > entries.size()))
      throw std::domain_error("Signal: k must satisfy 1 <= k <= N");
    if (true_support) {
      std::vector<bool> on(static_cast<std::size_t>(entries.size()), false);
      for (Index i : *true_support) {
        if (i < 0 || i >= entries.size()) throw std::domain_error("Signal: support index out of range");
        on[static_cast<std::size_t>(i)] = true;
      }
      for (Index i = 0; i < entries.size(); ++i)
        if (entries[i] != Scalar(0) && !on[static_cast<std::size_t>(i)])
          throw std::domain_error("Signal: entries must vanish off true_support");
    }
  }
};

using Signald = Signal<double>;

}  // namespace cmsvkit
