#pragma once

// The trained classifier and its prediction rules.

#include <cmath>
#include <numbers>

#include "pfcvm/kernel.hpp"

namespace pfcvm {

/// Pruned, immutable prediction artifact produced by fit().
struct FittedModel {
  KernelKind kind = KernelKind::rbf;
  int order = 2;
  Index input_dim = 0;             ///< feature count of the original data
  IndexList feature_indices;       ///< selected columns of the original data
  Vector theta;                    ///< weights of the selected features
  Vector theta_variance;           ///< diagonal of the feature posterior covariance
  IndexList relevance_indices;     ///< training rows kept as basis functions
  Matrix relevance_vectors;        ///< those rows, restricted to the selected features
  Vector relevance_labels;
  double bias = 0.0;
  Vector weights;                  ///< one per relevance vector, >= 0
  Matrix sigma_w;                  ///< posterior covariance over (bias, weights)
  Vector alpha;                    ///< final precisions, alpha(0) for the bias
  Vector beta;
  int iterations = 0;
  double final_log_evidence = 0.0;
  bool converged = false;

  KernelSpec kernel() const { return KernelSpec{kind, order, theta}; }
  Vector full_weights() const {
    Vector w(weights.size() + 1);
    w(0) = bias;
    w.tail(weights.size()) = weights;
    return w;
  }
};

/// Basis rows [1, phi(x, rv_j) y_j ...] for every row of X (original feature space).
inline Matrix basis_rows(const FittedModel& model, const Matrix& X) {
  if (X.cols() != model.input_dim)
    throw DimensionError("input has " + std::to_string(X.cols()) + " features, model expects " +
                         std::to_string(model.input_dim));
  if (model.relevance_vectors.rows() == 0) {
    return Matrix::Ones(X.rows(), 1);
  }
  return basis_matrix(select_columns(X, model.feature_indices), model.relevance_vectors, model.relevance_labels,
                      model.kernel());
}

inline Vector decision_values(const FittedModel& model, const Matrix& X) {
  return basis_rows(model, X) * model.full_weights();
}

inline double decision_value(const FittedModel& model, const Vector& x) {
  return decision_values(model, x.transpose())(0);
}

/// Moderation factor (1 + pi/8 * phi' Sigma_w phi)^(-1/2).
inline double moderation(double predictive_variance) {
  return 1.0 / std::sqrt(1.0 + std::numbers::pi / 8.0 * predictive_variance);
}

/// p(y = +1 | x) = sigmoid(kappa * u_w' phi(x)).
inline Vector predict_proba(const FittedModel& model, const Matrix& X) {
  const Matrix phi = basis_rows(model, X);
  const Vector f = phi * model.full_weights();
  Vector p(X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    const double var = std::max(0.0, phi.row(i).dot(model.sigma_w * phi.row(i).transpose()));
    p(i) = sigmoid(moderation(var) * f(i));
  }
  return p;
}

inline double predict_proba(const FittedModel& model, const Vector& x) {
  return predict_proba(model, Matrix(x.transpose()))(0);
}

/// Sign of the decision value; exact zero maps to +1.
inline int label_of(double decision) { return decision >= 0.0 ? 1 : -1; }

inline int predict_label(const FittedModel& model, const Vector& x) { return label_of(decision_value(model, x)); }

inline Vector predict_labels(const FittedModel& model, const Matrix& X) {
  return decision_values(model, X).unaryExpr([](double f) { return static_cast<double>(label_of(f)); });
}

}  // namespace pfcvm
