#pragma once

#include <string>

#include "pfcvm/types.hpp"

namespace pfcvm {

struct SpdInverse {
  Matrix inverse;
  double log_det = 0.0;  ///< log|H| of the (possibly jittered) input
  double jitter = 0.0;   ///< absolute diagonal shift that was applied
};

namespace detail {

/// Cholesky with the jitter schedule eps * mean(diag(H)), eps = 1e-10, 2e-10, ...
/// up to 1e-2. Returns the factorization of H + jitter * I.
inline Eigen::LLT<Matrix> jittered_llt(const Matrix& H, const std::string& name, double& jitter) {
  if (H.rows() != H.cols()) throw DimensionError(name + " is not square");
  if (!H.allFinite()) throw NumericError(name + " has non-finite entries");
  jitter = 0.0;
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() == Eigen::Success) return llt;
  const double scale = H.rows() > 0 ? H.diagonal().mean() : 0.0;
  if (scale > 0.0) {
    const Matrix eye = Matrix::Identity(H.rows(), H.cols());
    for (double eps = 1e-10; eps <= 1e-2; eps *= 2.0) {
      llt.compute(H + eps * scale * eye);
      if (llt.info() == Eigen::Success) {
        jitter = eps * scale;
        return llt;
      }
    }
  }
  throw IllConditionedError(name + " is not positive definite even after diagonal jitter up to 1e-2 * mean(diag)");
}

}  // namespace detail

/// Inverse and log-determinant of a symmetric positive definite matrix via
/// Cholesky, with diagonal jitter when the plain factorization fails.
inline SpdInverse robust_spd_inverse(const Matrix& H, const std::string& name = "matrix") {
  SpdInverse out;
  const Matrix sym = 0.5 * (H + H.transpose());
  auto llt = detail::jittered_llt(sym, name, out.jitter);
  out.inverse = llt.solve(Matrix::Identity(H.rows(), H.cols()));
  out.inverse = 0.5 * (out.inverse + out.inverse.transpose()).eval();
  out.log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return out;
}

/// Solves H x = b for SPD H with the same jitter policy.
inline Vector robust_spd_solve(const Matrix& H, const Vector& b, const std::string& name = "matrix") {
  double jitter = 0.0;
  const Matrix sym = 0.5 * (H + H.transpose());
  return detail::jittered_llt(sym, name, jitter).solve(b);
}

}  // namespace pfcvm
