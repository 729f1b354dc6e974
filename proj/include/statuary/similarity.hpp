#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "statuary/errors.hpp"

namespace statuary {

/// Dense column vector of the same scalar type as the expression.
template <typename Derived>
using PlainVector = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;

/// Inner product accumulated in double, summed in index order.
///
/// Every score in the engine goes through this kernel so that scores are
/// reproducible regardless of how candidates were found.
template <typename DerivedA, typename DerivedB>
[[nodiscard]] auto dot_accumulate(const Eigen::MatrixBase<DerivedA>& a,
                                  const Eigen::MatrixBase<DerivedB>& b) -> double {
  double sum = 0.0;
  const Eigen::Index n = a.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    sum += static_cast<double>(a(i)) * static_cast<double>(b(i));
  }
  return sum;
}

template <typename Derived>
[[nodiscard]] auto l2_norm(const Eigen::MatrixBase<Derived>& v) -> double {
  return std::sqrt(dot_accumulate(v, v));
}

/// Scales v to unit Euclidean length.
/// Throws NormalizationError for a zero or non-finite vector.
template <typename Derived>
[[nodiscard]] auto l2_normalize(const Eigen::MatrixBase<Derived>& v) -> PlainVector<Derived> {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) {
    throw NormalizationError("cannot normalize an empty vector");
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(static_cast<double>(v(i)))) {
      throw NormalizationError("vector has a non-finite component at index " + std::to_string(i));
    }
  }
  const double norm = l2_norm(v);
  if (norm == 0.0 || !std::isfinite(norm)) {
    throw NormalizationError("cannot normalize a zero vector");
  }
  PlainVector<Derived> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out(i) = static_cast<Scalar>(static_cast<double>(v(i)) / norm);
  }
  return out;
}

/// Cosine of two unit vectors, i.e. their dot product.
template <typename DerivedA, typename DerivedB>
[[nodiscard]] auto cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                     const Eigen::MatrixBase<DerivedB>& b) -> double {
  if (a.size() != b.size()) {
    throw DimensionError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  return dot_accumulate(a, b);
}

/// Squared Euclidean distance accumulated in double.
template <typename DerivedA, typename DerivedB>
[[nodiscard]] auto squared_distance(const Eigen::MatrixBase<DerivedA>& a,
                                    const Eigen::MatrixBase<DerivedB>& b) -> double {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a(i)) - static_cast<double>(b(i));
    sum += d * d;
  }
  return sum;
}

}  // namespace statuary
