#pragma once

// Laplace approximation of the joint posterior over sample weights w and
// feature weights theta: the smoothed log joint Q(w, theta), its derivatives,
// the block-Newton mode search, and the posterior covariances.

#include <cmath>
#include <limits>
#include <string>

#include "pfcvm/kernel.hpp"
#include "pfcvm/linalg.hpp"
#include "pfcvm/state.hpp"

namespace pfcvm {

/// Quantities of Q shared by the value, gradients and Hessians at one point.
struct Evaluation {
  Matrix phi;    ///< N x (N_basis + 1)
  Vector f;      ///< decision values Phi w
  Vector sigma;  ///< sigmoid(f)
  double value = 0.0;
};

/// Smoothed log joint
///   Q = sum_n [t_n log s_n + (1 - t_n) log(1 - s_n)] - w'Aw/2 - theta'B theta/2
///       + sum_{i>=1} log sigmoid(lambda w_i) + sum_k log sigmoid(lambda theta_k)
/// with the constant dropped. The bias w(0) gets no smoothing term.
class LogJoint {
 public:
  LogJoint(const Problem& problem, const HyperParams& hyper, double lambda)
      : problem_(problem), hyper_(hyper), lambda_(lambda) {
    if (hyper.alpha.size() != problem.X_basis.rows() + 1)
      throw DimensionError("alpha must have one entry per active sample plus the bias");
    if (hyper.beta.size() != problem.X.cols()) throw DimensionError("beta must have one entry per active feature");
  }

  const Problem& problem() const { return problem_; }
  const HyperParams& hyper() const { return hyper_; }
  double lambda() const { return lambda_; }

  Evaluation evaluate(const Vector& w, const Vector& theta) const {
    check_point(w, theta);
    Evaluation e;
    e.phi = basis_matrix(problem_.X, problem_.X_basis, problem_.y_basis, problem_.spec(theta.cwiseMax(0.0)));
    e.f = e.phi * w;
    e.sigma = e.f.unaryExpr([](double z) { return sigmoid(z); });
    double like = 0.0;
    for (Index n = 0; n < e.f.size(); ++n)
      like += problem_.t(n) * log_sigmoid(e.f(n)) + (1.0 - problem_.t(n)) * log_sigmoid(-e.f(n));
    double smooth = 0.0;
    for (Index i = 1; i < w.size(); ++i) smooth += log_sigmoid(lambda_ * w(i));
    for (Index k = 0; k < theta.size(); ++k) smooth += log_sigmoid(lambda_ * theta(k));
    e.value = like - 0.5 * w.dot(hyper_.alpha.cwiseProduct(w)) - 0.5 * theta.dot(hyper_.beta.cwiseProduct(theta)) +
              smooth;
    if (!std::isfinite(e.value)) throw NumericError("log joint is not finite");
    return e;
  }

  double value(const Vector& w, const Vector& theta) const { return evaluate(w, theta).value; }

  /// dQ/dw = Phi'(t - sigma) - A w + k_w
  Vector grad_w(const Evaluation& e, const Vector& w) const {
    return e.phi.transpose() * (problem_.t - e.sigma) - hyper_.alpha.cwiseProduct(w) + k_w(w);
  }

  /// dQ/dtheta = D'(t - sigma) - B theta + k_theta
  Vector grad_theta(const Evaluation& e, const Vector& w, const Vector& theta) const {
    return d_matrix(w, theta).transpose() * (problem_.t - e.sigma) - hyper_.beta.cwiseProduct(theta) +
           smoothing_gradient(theta);
  }

  /// Phi' C Phi + A + O_w, the negated w-Hessian.
  Matrix neg_hessian_w(const Evaluation& e, const Vector& w) const {
    const Vector c = curvature(e);
    Matrix H = e.phi.transpose() * c.asDiagonal() * e.phi;
    H.diagonal() += hyper_.alpha + o_w(w);
    return H;
  }

  /// D' C D + B + O_theta (- E when include_e), the negated theta-Hessian
  /// with the w-coupling ignored.
  Matrix neg_hessian_theta(const Evaluation& e, const Vector& w, const Vector& theta, bool include_e) const {
    const Matrix D = d_matrix(w, theta);
    const Vector c = curvature(e);
    Matrix H = D.transpose() * c.asDiagonal() * D;
    H.diagonal() += hyper_.beta + smoothing_curvature(theta);
    if (include_e) H -= e_matrix(w, theta, problem_.t - e.sigma);
    return H;
  }

  /// Negated Hessian over the stacked vector [w; theta]. With `exact` false the
  /// second-derivative-of-Phi terms (G off the diagonal, E in the theta block)
  /// are dropped, leaving a Gauss-Newton matrix that is always positive definite.
  Matrix neg_hessian_joint(const Evaluation& e, const Vector& w, const Vector& theta, bool exact) const {
    const Index nw = w.size();
    const Index nt = theta.size();
    const Matrix D = d_matrix(w, theta);
    const Vector c = curvature(e);
    const Matrix cphi = c.asDiagonal() * e.phi;
    Matrix H(nw + nt, nw + nt);
    H.topLeftCorner(nw, nw) = e.phi.transpose() * cphi;
    H.topLeftCorner(nw, nw).diagonal() += hyper_.alpha + o_w(w);
    H.topRightCorner(nw, nt) = cphi.transpose() * D;
    H.bottomRightCorner(nt, nt) = D.transpose() * c.asDiagonal() * D;
    H.bottomRightCorner(nt, nt).diagonal() += hyper_.beta + smoothing_curvature(theta);
    if (exact) {
      const Vector r = problem_.t - e.sigma;
      H.topRightCorner(nw, nt) -= pfcvm::cross_matrix(problem_.X, problem_.X_basis, problem_.y_basis,
                                                      problem_.spec(theta.cwiseMax(0.0)), r);
      H.bottomRightCorner(nt, nt) -= e_matrix(w, theta, r);
    }
    H.bottomLeftCorner(nt, nw) = H.topRightCorner(nw, nt).transpose();
    return H;
  }

  Matrix d_matrix(const Vector& w, const Vector& theta) const {
    return pfcvm::d_matrix(problem_.X, problem_.X_basis, problem_.y_basis, w, problem_.spec(theta.cwiseMax(0.0)));
  }

  Matrix e_matrix(const Vector& w, const Vector& theta, const Vector& residual) const {
    return pfcvm::e_matrix(problem_.X, problem_.X_basis, problem_.y_basis, w, problem_.spec(theta.cwiseMax(0.0)),
                           residual);
  }

  /// [0, lambda (1 - sigmoid(lambda w_i)) ...]
  Vector k_w(const Vector& w) const {
    Vector k = smoothing_gradient(w);
    k(0) = 0.0;
    return k;
  }

  /// diag entries [0, lambda^2 s (1 - s) ...]
  Vector o_w(const Vector& w) const {
    Vector o = smoothing_curvature(w);
    o(0) = 0.0;
    return o;
  }

  Vector smoothing_gradient(const Vector& v) const {
    return v.unaryExpr([l = lambda_](double x) { return l * (1.0 - sigmoid(l * x)); });
  }

  Vector smoothing_curvature(const Vector& v) const {
    return v.unaryExpr([l = lambda_](double x) {
      const double s = sigmoid(l * x);
      return l * l * s * (1.0 - s);
    });
  }

  static Vector curvature(const Evaluation& e) {
    return e.sigma.unaryExpr([](double s) { return s * (1.0 - s); });
  }

 private:
  void check_point(const Vector& w, const Vector& theta) const {
    if (w.size() != problem_.X_basis.rows() + 1) throw DimensionError("w must have N_active + 1 entries");
    if (theta.size() != problem_.X.cols()) throw DimensionError("theta must have M_active entries");
    if (!w.allFinite() || !theta.allFinite()) throw NumericError("non-finite weights passed to the log joint");
  }

  const Problem& problem_;
  const HyperParams& hyper_;
  double lambda_;
};

/// Q(w, theta) for the given problem; see LogJoint.
inline double log_joint(const Vector& w, const Vector& theta, const Problem& problem, const HyperParams& hyper,
                        double lambda) {
  return LogJoint(problem, hyper, lambda).value(w, theta);
}

inline double projected_norm_w(const Vector& gw, const Vector& w) {
  double m = gw.size() > 0 ? std::abs(gw(0)) : 0.0;
  for (Index i = 1; i < gw.size(); ++i)
    if (!(w(i) <= 0.0 && gw(i) < 0.0)) m = std::max(m, std::abs(gw(i)));
  return m;
}

inline double projected_norm_theta(const Vector& gt, const Vector& theta) {
  double m = 0.0;
  for (Index k = 0; k < gt.size(); ++k)
    if (!(theta(k) <= 0.0 && gt(k) < 0.0)) m = std::max(m, std::abs(gt(k)));
  return m;
}

/// Bound-aware gradient norm: a non-bias sample weight or a feature weight
/// sitting at <= 0 with its gradient pointing further down counts as stationary.
inline double projected_grad_norm(const Vector& gw, const Vector& gt, const Vector& w, const Vector& theta) {
  return std::max(projected_norm_w(gw, w), projected_norm_theta(gt, theta));
}

struct PosteriorMode {
  Vector w;
  Vector theta;
  double log_joint = 0.0;
  double grad_norm = 0.0;  ///< projected gradient infinity-norm at (w, theta)
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
};

namespace detail {

inline constexpr double kClip = 1e-8;

/// One damped Newton step. Coordinates before `first_free` are unconstrained
/// (the bias); the rest are bounded below by 0. Returns true when a step was taken.
template <typename ValueFn>
bool newton_block_step(Vector& x, double& q, const Vector& g, const Matrix& H, Index first_free, ValueFn&& value_at,
                       const std::string& name) {
  // Coordinates pinned at the lower bound are held fixed.
  IndexList free;
  free.reserve(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i)
    if (i < first_free || !(x(i) <= 0.0 && g(i) < 0.0)) free.push_back(i);
  if (free.empty()) return false;

  const Vector dir_free = robust_spd_solve(select_square(H, free), select(g, free), name);
  Vector dir = Vector::Zero(x.size());
  for (std::size_t i = 0; i < free.size(); ++i) dir(free[i]) = dir_free(static_cast<Index>(i));

  double step = 1.0;
  for (int halving = 0; halving <= 20; ++halving, step *= 0.5) {
    Vector cand = x + step * dir;
    for (Index i = first_free; i < cand.size(); ++i)
      if (cand(i) < -kClip) cand(i) = 0.0;
    double qc = -std::numeric_limits<double>::infinity();
    try {
      qc = value_at(cand);
    } catch (const NumericError&) {
      continue;
    }
    if (qc >= q) {
      x = std::move(cand);
      q = qc;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Damped Newton ascent of Q from (w0, theta0) over the stacked vector
/// [w; theta]. The exact Hessian is used where it is negative definite and the
/// Gauss-Newton matrix elsewhere; each step backtracks by halving until Q does
/// not decrease. The search ends when the projected gradient falls below
/// config.mode_grad_tol or after config.inner_mode_iterations steps.
inline PosteriorMode find_posterior_mode(const Problem& problem, const Vector& w0, const Vector& theta0,
                                         const HyperParams& hyper, const TrainConfig& config) {
  const LogJoint Q(problem, hyper, config.lambda);
  const Index nw = w0.size();
  const Index nt = theta0.size();
  PosteriorMode mode;
  Vector z(nw + nt);
  z << w0, theta0;
  mode.w = w0;
  mode.theta = theta0;
  Evaluation e = Q.evaluate(mode.w, mode.theta);
  double q = e.value;
  const auto value_at = [&](const Vector& cand) { return Q.value(cand.head(nw), cand.tail(nt)); };

  // Q is concave in w for fixed theta, so fit w first; joint steps taken from
  // a poorly fitted w can settle on symmetric stationary points.
  for (int it = 0; it < config.inner_mode_iterations; ++it) {
    const Vector gw = Q.grad_w(e, mode.w);
    if (projected_norm_w(gw, mode.w) < config.mode_grad_tol) break;
    if (!detail::newton_block_step(
            mode.w, q, gw, Q.neg_hessian_w(e, mode.w), 1,
            [&](const Vector& w) { return Q.value(w, mode.theta); }, "w-Hessian"))
      break;
    e = Q.evaluate(mode.w, mode.theta);
  }
  z.head(nw) = mode.w;

  for (int it = 0; it < config.inner_mode_iterations; ++it) {
    Vector g(nw + nt);
    g << Q.grad_w(e, mode.w), Q.grad_theta(e, mode.w, mode.theta);
    if (projected_grad_norm(g.head(nw), g.tail(nt), mode.w, mode.theta) < config.mode_grad_tol) {
      mode.converged = true;
      break;
    }
    ++mode.iterations;
    Matrix H = Q.neg_hessian_joint(e, mode.w, mode.theta, true);
    if (Eigen::LLT<Matrix>(H).info() != Eigen::Success) H = Q.neg_hessian_joint(e, mode.w, mode.theta, false);
    if (!detail::newton_block_step(z, q, g, H, 1, value_at, "joint w/theta Hessian")) {
      mode.stalled = true;
      break;
    }
    mode.w = z.head(nw);
    mode.theta = z.tail(nt);
    e = Q.evaluate(mode.w, mode.theta);
  }

  mode.grad_norm = projected_grad_norm(Q.grad_w(e, mode.w), Q.grad_theta(e, mode.w, mode.theta), mode.w, mode.theta);
  mode.converged = mode.converged || mode.grad_norm < config.mode_grad_tol;
  if (mode.converged) mode.stalled = false;
  mode.log_joint = e.value;
  return mode;
}

inline PosteriorMode find_posterior_mode(const ModelState& state, const Dataset& data, const TrainConfig& config) {
  check_conformable(state);
  return find_posterior_mode(make_problem(data, state, config), state.w, state.theta, state.hyper, config);
}

/// Laplace posterior: means at the mode, covariances as inverse negated Hessians.
struct PosteriorApprox {
  Vector u_w;
  Matrix sigma_w;
  Vector u_theta;
  Matrix sigma_theta;
  double log_det_sigma_w = 0.0;
  double log_det_sigma_theta = 0.0;
};

/// Sigma_w = (Phi'C Phi + A + O_w)^-1, Sigma_theta = (D'C D + B + O_theta [- E])^-1.
inline PosteriorApprox posterior_covariances(const Problem& problem, const Vector& w, const Vector& theta,
                                             const HyperParams& hyper, const TrainConfig& config) {
  const LogJoint Q(problem, hyper, config.lambda);
  const Evaluation e = Q.evaluate(w, theta);
  PosteriorApprox post;
  post.u_w = w;
  post.u_theta = theta;
  const SpdInverse sw = robust_spd_inverse(Q.neg_hessian_w(e, w), "sample posterior precision (w-Hessian)");
  post.sigma_w = sw.inverse;
  post.log_det_sigma_w = -sw.log_det;
  if (theta.size() > 0) {
    const SpdInverse st = robust_spd_inverse(Q.neg_hessian_theta(e, w, theta, !config.drop_E),
                                             "feature posterior precision (theta-Hessian)");
    post.sigma_theta = st.inverse;
    post.log_det_sigma_theta = -st.log_det;
  } else {
    post.sigma_theta = Matrix(0, 0);
  }
  return post;
}

inline PosteriorApprox posterior_covariances(const PosteriorMode& mode, const Problem& problem,
                                             const HyperParams& hyper, const TrainConfig& config) {
  return posterior_covariances(problem, mode.w, mode.theta, hyper, config);
}

/// Laplace estimate of the log marginal likelihood at (w, theta):
///   Q + log|Sigma_w|/2 + log|Sigma_theta|/2 + sum(log alpha)/2 + sum(log beta)/2.
/// The last two terms are the Gaussian prior normalizers, which depend on the
/// hyperparameters; the 2*pi factors cancel against the Laplace volume.
inline double log_evidence(const Problem& problem, const Vector& w, const Vector& theta, const HyperParams& hyper,
                           const TrainConfig& config) {
  const LogJoint Q(problem, hyper, config.lambda);
  const double q = Q.value(w, theta);
  const PosteriorApprox post = posterior_covariances(problem, w, theta, hyper, config);
  const double value = q + 0.5 * post.log_det_sigma_w + 0.5 * post.log_det_sigma_theta +
                       0.5 * hyper.alpha.array().log().sum() + 0.5 * hyper.beta.array().log().sum();
  if (!std::isfinite(value)) throw NumericError("log evidence is not finite");
  return value;
}

}  // namespace pfcvm
