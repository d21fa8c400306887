#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "pfcvm/error.hpp"

namespace pfcvm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// 0, 1, ..., n-1
inline IndexList iota_indices(Index n) {
  IndexList out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

inline Matrix select_rows(const Matrix& m, const IndexList& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = m.row(rows[r]);
  return out;
}

inline Matrix select_columns(const Matrix& m, const IndexList& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = m.col(cols[c]);
  return out;
}

inline Vector select(const Vector& v, const IndexList& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

inline Matrix select_square(const Matrix& m, const IndexList& idx) {
  const auto n = static_cast<Index>(idx.size());
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) out(i, j) = m(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  return out;
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

/// Logistic sigmoid, evaluated without overflow for any finite argument.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(sigmoid(z)) = -softplus(-z)
inline double log_sigmoid(double z) {
  return -(std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z))));
}

}  // namespace pfcvm
