#pragma once

// Evidence-based re-estimation of the prior precisions and pruning of the
// samples/features whose precision has diverged.

#include <cmath>
#include <limits>
#include <string>

#include "pfcvm/laplace.hpp"

namespace pfcvm {

/// New precision for one weight with posterior mean `mean`, posterior variance
/// `variance` and current precision `precision`.
///   mackay: (gamma + 2c) / (mean^2 + 2d),  gamma = 1 - precision * variance
///   em:     (2c + 1) / (mean^2 + variance + 2d)
/// Non-finite or non-positive results return +infinity.
inline double reestimate_precision(double mean, double variance, double precision, HyperRule rule, double c,
                                   double d) {
  double next = 0.0;
  if (rule == HyperRule::mackay) {
    const double gamma = 1.0 - precision * variance;
    next = (gamma + 2.0 * c) / (mean * mean + 2.0 * d);
  } else {
    next = (2.0 * c + 1.0) / (mean * mean + variance + 2.0 * d);
  }
  if (!std::isfinite(next) || next <= 0.0) return std::numeric_limits<double>::infinity();
  return next;
}

/// Re-estimates alpha and beta from the Laplace posterior. Degenerate updates
/// map to prune_threshold_max + 1 so the following prune removes them. The
/// bias precision alpha(0) is never pruned: a degenerate bias update keeps
/// the previous value and the result is capped at the threshold.
inline HyperParams update_hyperparameters(const PosteriorApprox& post, const HyperParams& hyper,
                                          const TrainConfig& config) {
  if (post.u_w.size() != hyper.alpha.size() || post.sigma_w.rows() != hyper.alpha.size())
    throw DimensionError("update_hyperparameters: sample posterior does not match alpha");
  if (post.u_theta.size() != hyper.beta.size() || post.sigma_theta.rows() != hyper.beta.size())
    throw DimensionError("update_hyperparameters: feature posterior does not match beta");
  const double sentinel = config.prune_threshold_max + 1.0;
  const double c = config.gamma_prior_c;
  const double d = config.gamma_prior_d;

  HyperParams next = hyper;
  for (Index i = 0; i < hyper.alpha.size(); ++i) {
    const double a = reestimate_precision(post.u_w(i), post.sigma_w(i, i), hyper.alpha(i), config.hyper_rule, c, d);
    if (i == 0)
      next.alpha(0) = std::isfinite(a) ? std::min(a, config.prune_threshold_max) : hyper.alpha(0);
    else
      next.alpha(i) = std::isfinite(a) ? a : sentinel;
  }
  for (Index k = 0; k < hyper.beta.size(); ++k) {
    const double b =
        reestimate_precision(post.u_theta(k), post.sigma_theta(k, k), hyper.beta(k), config.hyper_rule, c, d);
    next.beta(k) = std::isfinite(b) ? b : sentinel;
  }
  return next;
}

/// Removes samples with alpha > threshold (never the bias) and features with
/// beta > threshold, shrinking every conformable vector.
inline ModelState prune(const ModelState& state, const TrainConfig& config) {
  check_conformable(state);
  const double limit = config.prune_threshold_max;

  IndexList keep_w{0};
  IndexList samples;
  for (std::size_t j = 0; j < state.active_samples.size(); ++j) {
    const auto i = static_cast<Index>(j) + 1;
    if (!(state.hyper.alpha(i) > limit)) {
      keep_w.push_back(i);
      samples.push_back(state.active_samples[j]);
    }
  }
  IndexList keep_f;
  IndexList features;
  for (std::size_t k = 0; k < state.active_features.size(); ++k) {
    if (!(state.hyper.beta(static_cast<Index>(k)) > limit)) {
      keep_f.push_back(static_cast<Index>(k));
      features.push_back(state.active_features[k]);
    }
  }
  if (samples.empty() || features.empty()) {
    throw DegenerateModelError("pruning removed every " + std::string(samples.empty() ? "sample" : "feature") +
                               " (surviving samples: " + std::to_string(samples.size()) +
                               ", surviving features: " + std::to_string(features.size()) + ")");
  }

  ModelState out;
  out.active_samples = std::move(samples);
  out.active_features = std::move(features);
  out.w = select(state.w, keep_w);
  out.theta = select(state.theta, keep_f);
  out.hyper.alpha = select(state.hyper.alpha, keep_w);
  out.hyper.beta = select(state.hyper.beta, keep_f);
  out.evidence_history = state.evidence_history;
  out.iteration = state.iteration;
  return out;
}

/// Variant taking the posterior explicitly: the state's weights are replaced
/// by the posterior means before pruning.
inline ModelState prune(ModelState state, const PosteriorApprox& post, const TrainConfig& config) {
  state.w = post.u_w;
  state.theta = post.u_theta;
  return prune(state, config);
}

}  // namespace pfcvm
