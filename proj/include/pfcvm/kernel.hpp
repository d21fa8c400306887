#pragma once

// Feature-weighted basis functions and their derivatives with respect to the
// feature weights theta.
//
// Conventions used throughout:
//   * `X_eval` holds one evaluation sample per row, `X_basis` one basis
//     (training) sample per row; both carry only the active feature columns,
//     so theta.size() == X_eval.cols() == X_basis.cols().
//   * The basis matrix has a leading bias column of ones; column j+1 holds
//     phi(x_i, x_basis_j) * y_basis_j.
//   * Sample weight vectors `w` have length X_basis.rows() + 1 with w(0) the
//     bias weight.

#include <cmath>
#include <string>

#include "pfcvm/types.hpp"

namespace pfcvm {

enum class KernelKind { rbf, polynomial, linear };

inline std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::rbf: return "rbf";
    case KernelKind::polynomial: return "poly";
    case KernelKind::linear: return "linear";
  }
  return "unknown";
}

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  int order = 2;  ///< polynomial order P, ignored for other kinds
  Vector theta;   ///< per-feature weights, all >= 0
};

inline void validate(const KernelSpec& spec) {
  if (spec.kind == KernelKind::polynomial && spec.order < 1)
    throw DomainError("polynomial kernel order must be >= 1, got " + std::to_string(spec.order));
  for (Index k = 0; k < spec.theta.size(); ++k) {
    if (!std::isfinite(spec.theta(k)) || spec.theta(k) < 0.0)
      throw DomainError("feature weight theta[" + std::to_string(k) + "] = " +
                        std::to_string(spec.theta(k)) + " must be finite and nonnegative");
  }
}

namespace detail {

inline void check_feature_dims(Index cols_a, Index cols_b, const KernelSpec& spec) {
  if (cols_a != spec.theta.size() || cols_b != spec.theta.size())
    throw DimensionError("feature dimension mismatch: inputs have " + std::to_string(cols_a) + " and " +
                         std::to_string(cols_b) + " columns, theta has " + std::to_string(spec.theta.size()));
}

inline double int_pow(double base, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= base;
  return r;
}

/// theta-weighted squared distances, (rows of A) x (rows of B).
inline Matrix weighted_sq_dist(const Matrix& A, const Matrix& B, const Vector& theta) {
  Matrix d = Matrix::Zero(A.rows(), B.rows());
  for (Index k = 0; k < theta.size(); ++k) {
    const double tk = theta(k);
    if (tk == 0.0) continue;
    for (Index j = 0; j < B.rows(); ++j) {
      const double bjk = B(j, k);
      d.col(j).array() += tk * (A.col(k).array() - bjk).square();
    }
  }
  return d;
}

/// 1 + sum_k theta_k a^k b^k, the polynomial base before exponentiation.
inline Matrix poly_base(const Matrix& A, const Matrix& B, const Vector& theta) {
  return (A * theta.asDiagonal() * B.transpose()).array() + 1.0;
}

}  // namespace detail

/// Gram matrix of raw kernel values phi(a_i, b_j) (no label factor, no bias).
inline Matrix kernel_matrix(const Matrix& A, const Matrix& B, const KernelSpec& spec) {
  validate(spec);
  detail::check_feature_dims(A.cols(), B.cols(), spec);
  switch (spec.kind) {
    case KernelKind::rbf:
      return (-detail::weighted_sq_dist(A, B, spec.theta)).array().exp();
    case KernelKind::polynomial:
      return detail::poly_base(A, B, spec.theta).unaryExpr([p = spec.order](double b) {
        return detail::int_pow(b, p);
      });
    case KernelKind::linear:
      return A * spec.theta.asDiagonal() * B.transpose();
  }
  return {};
}

inline double kernel_value(const Vector& x, const Vector& z, const KernelSpec& spec) {
  if (x.size() != z.size() || x.size() != spec.theta.size())
    throw DimensionError("kernel_value: x, z and theta must have equal length");
  return kernel_matrix(x.transpose(), z.transpose(), spec)(0, 0);
}

/// Basis matrix over explicit basis samples: N_eval x (N_basis + 1).
inline Matrix basis_matrix(const Matrix& X_eval, const Matrix& X_basis, const Vector& y_basis,
                           const KernelSpec& spec) {
  if (X_basis.rows() == 0) throw DegenerateModelError("basis_matrix: no active samples");
  if (y_basis.size() != X_basis.rows()) throw DimensionError("basis_matrix: label count does not match basis rows");
  Matrix phi(X_eval.rows(), X_basis.rows() + 1);
  phi.col(0).setOnes();
  phi.rightCols(X_basis.rows()) = kernel_matrix(X_eval, X_basis, spec) * y_basis.asDiagonal();
  return phi;
}

/// Basis matrix of the training set X against its own active samples.
inline Matrix basis_matrix(const Matrix& X, const Vector& y, const KernelSpec& spec, const IndexList& active_samples) {
  if (active_samples.empty()) throw DegenerateModelError("basis_matrix: active sample set is empty");
  if (y.size() != X.rows()) throw DimensionError("basis_matrix: label count does not match rows of X");
  for (Index j : active_samples)
    if (j < 0 || j >= X.rows()) throw DimensionError("basis_matrix: active sample index out of range");
  return basis_matrix(X, select_rows(X, active_samples), select(y, active_samples), spec);
}

/// D = d(Phi w)/d(theta), N_eval x M. The bias weight w(0) does not enter.
inline Matrix d_matrix(const Matrix& X_eval, const Matrix& X_basis, const Vector& y_basis, const Vector& w,
                       const KernelSpec& spec) {
  validate(spec);
  detail::check_feature_dims(X_eval.cols(), X_basis.cols(), spec);
  if (w.size() != X_basis.rows() + 1) throw DimensionError("d_matrix: weight vector must have N_basis + 1 entries");
  const Index n = X_eval.rows();
  const Index nb = X_basis.rows();
  const Index m = X_eval.cols();
  const Vector wy = w.tail(nb).cwiseProduct(y_basis);

  switch (spec.kind) {
    case KernelKind::rbf: {
      // c_ij = w_j * Phi_ij, Phi carrying the label
      const Matrix c = kernel_matrix(X_eval, X_basis, spec) * wy.asDiagonal();
      Matrix D = Matrix::Zero(n, m);
      for (Index k = 0; k < m; ++k)
        for (Index j = 0; j < nb; ++j)
          D.col(k).array() -= c.col(j).array() * (X_eval.col(k).array() - X_basis(j, k)).square();
      return D;
    }
    case KernelKind::polynomial: {
      // phi^{(P-1)/P} evaluated as base^{P-1}
      const int p = spec.order;
      const Matrix g = detail::poly_base(X_eval, X_basis, spec.theta).unaryExpr([p](double b) {
        return detail::int_pow(b, p - 1);
      }) * wy.asDiagonal();
      return static_cast<double>(p) * X_eval.cwiseProduct(g * X_basis);
    }
    case KernelKind::linear: {
      const Vector v = X_basis.transpose() * wy;
      return X_eval * v.asDiagonal();
    }
  }
  return {};
}

/// G = (dPhi/dtheta)^T residual, (N_basis + 1) x M with a zero bias row; the
/// data part of the mixed w/theta second derivative.
inline Matrix cross_matrix(const Matrix& X_eval, const Matrix& X_basis, const Vector& y_basis,
                           const KernelSpec& spec, const Vector& residual) {
  validate(spec);
  detail::check_feature_dims(X_eval.cols(), X_basis.cols(), spec);
  if (residual.size() != X_eval.rows()) throw DimensionError("cross_matrix: residual length must equal N_eval");
  const Index nb = X_basis.rows();
  Matrix G = Matrix::Zero(nb + 1, X_eval.cols());
  switch (spec.kind) {
    case KernelKind::rbf: {
      const Matrix Kr = residual.asDiagonal() * kernel_matrix(X_eval, X_basis, spec);
      const Vector s0 = Kr.colwise().sum().transpose();
      const Matrix s1 = Kr.transpose() * X_eval;
      const Matrix s2 = Kr.transpose() * X_eval.array().square().matrix();
      const Matrix inner = s2.array() - 2.0 * X_basis.array() * s1.array() +
                           X_basis.array().square().colwise() * s0.array();
      G.bottomRows(nb) = -(y_basis.asDiagonal() * inner);
      break;
    }
    case KernelKind::polynomial: {
      const int p = spec.order;
      const Matrix b = detail::poly_base(X_eval, X_basis, spec.theta).unaryExpr([p](double v) {
        return detail::int_pow(v, p - 1);
      });
      const Matrix s1 = b.transpose() * residual.asDiagonal() * X_eval;
      G.bottomRows(nb) = static_cast<double>(p) * (y_basis.asDiagonal() * X_basis.cwiseProduct(s1));
      break;
    }
    case KernelKind::linear: {
      const Vector s1 = X_eval.transpose() * residual;
      G.bottomRows(nb) = y_basis.asDiagonal() * X_basis * s1.asDiagonal();
      break;
    }
  }
  return G;
}

/// E = (dD/dtheta)^T residual, M x M. Zero for the linear kernel.
inline Matrix e_matrix(const Matrix& X_eval, const Matrix& X_basis, const Vector& y_basis, const Vector& w,
                       const KernelSpec& spec, const Vector& residual) {
  validate(spec);
  detail::check_feature_dims(X_eval.cols(), X_basis.cols(), spec);
  if (w.size() != X_basis.rows() + 1) throw DimensionError("e_matrix: weight vector must have N_basis + 1 entries");
  if (residual.size() != X_eval.rows()) throw DimensionError("e_matrix: residual length must equal N_eval");
  const Index nb = X_basis.rows();
  const Index m = X_eval.cols();
  Matrix E = Matrix::Zero(m, m);
  if (spec.kind == KernelKind::linear) return E;
  if (spec.kind == KernelKind::polynomial && spec.order < 2) return E;

  const Vector wy = w.tail(nb).cwiseProduct(y_basis);
  Matrix s(nb, m);
  if (spec.kind == KernelKind::rbf) {
    const Matrix K = kernel_matrix(X_eval, X_basis, spec);
    for (Index p = 0; p < X_eval.rows(); ++p) {
      if (residual(p) == 0.0) continue;
      s = (X_basis.rowwise() - X_eval.row(p)).array().square();
      const Vector v = residual(p) * K.row(p).transpose().cwiseProduct(wy);
      E.noalias() += s.transpose() * v.asDiagonal() * s;
    }
  } else {
    const int order = spec.order;
    const Matrix base = detail::poly_base(X_eval, X_basis, spec.theta);
    for (Index p = 0; p < X_eval.rows(); ++p) {
      if (residual(p) == 0.0) continue;
      s = X_basis * X_eval.row(p).asDiagonal();
      Vector v(nb);
      for (Index j = 0; j < nb; ++j) v(j) = residual(p) * wy(j) * detail::int_pow(base(p, j), order - 2);
      E.noalias() += s.transpose() * v.asDiagonal() * s;
    }
    E *= static_cast<double>(order) * static_cast<double>(order - 1);
  }
  return E;
}

}  // namespace pfcvm
