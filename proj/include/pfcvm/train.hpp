#pragma once

// The training loop: rebuild the basis on the active sets, locate the
// posterior mode, re-estimate the precisions, prune, and stop once the Laplace
// evidence settles.

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "pfcvm/hyper.hpp"
#include "pfcvm/model.hpp"

namespace pfcvm {

struct TrainTrace {
  std::vector<TraceRow> rows;
};

struct FitResult {
  FittedModel model;
  TrainTrace trace;
};

/// Starting point of the loop: every sample and feature active.
inline ModelState initial_state(const Dataset& data, const TrainConfig& config) {
  const Index n = data.size();
  const Index m = data.dims();
  ModelState s;
  s.active_samples = iota_indices(n);
  s.active_features = iota_indices(m);
  s.w = Vector::Constant(n + 1, config.init_w);
  s.w(0) = 0.0;
  s.theta = Vector::Constant(m, config.init_theta.value_or(1.0 / static_cast<double>(m)));
  s.hyper.alpha = Vector::Constant(n + 1, config.init_alpha);
  s.hyper.beta = Vector::Constant(m, config.init_beta);
  return s;
}

namespace detail {

inline FittedModel assemble_model(const Dataset& data, const ModelState& state, const PosteriorApprox& post,
                                  const TrainConfig& config) {
  FittedModel m;
  m.kind = config.kernel;
  m.order = config.poly_order;
  m.input_dim = data.dims();
  m.feature_indices = state.active_features;
  m.theta = post.u_theta.cwiseMax(0.0);
  m.theta_variance = post.sigma_theta.diagonal();
  m.relevance_indices = state.active_samples;
  m.relevance_vectors = select_columns(select_rows(data.X, state.active_samples), state.active_features);
  m.relevance_labels = select(data.y, state.active_samples);
  m.bias = post.u_w(0);
  m.weights = post.u_w.tail(post.u_w.size() - 1).cwiseMax(0.0);
  m.sigma_w = post.sigma_w;
  m.alpha = state.hyper.alpha;
  m.beta = state.hyper.beta;
  m.iterations = state.iteration;
  m.final_log_evidence = state.evidence_history.empty() ? 0.0 : state.evidence_history.back();
  return m;
}

}  // namespace detail

/// Trains the classifier. Labels must be -1/+1 with both classes present.
/// Errors: DegenerateModelError when pruning empties a side, NumericError
/// (naming the iteration) on a non-finite evidence.
inline FitResult fit(const Dataset& data, const TrainConfig& config) {
  using clock = std::chrono::steady_clock;
  config.validate();
  validate(data);
  if (data.size() < 2 || !has_both_classes(data))
    throw DegenerateModelError("both classes required: training labels must contain -1 and +1");
  if (data.dims() < 1) throw DegenerateModelError("training data has no features");

  FitResult result;
  ModelState state = initial_state(data, config);
  double previous = std::numeric_limits<double>::quiet_NaN();

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    const auto start = clock::now();
    state.iteration = iter;
    {
      const Problem problem = make_problem(data, state, config);
      const PosteriorMode mode = find_posterior_mode(problem, state.w, state.theta, state.hyper, config);
      const PosteriorApprox post = posterior_covariances(mode, problem, state.hyper, config);
      state.w = mode.w;
      state.theta = mode.theta;
      state.hyper = update_hyperparameters(post, state.hyper, config);
    }
    state = prune(state, config);

    double evidence = 0.0;
    try {
      evidence = log_evidence(make_problem(data, state, config), state.w, state.theta, state.hyper, config);
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(iter) + ": " + e.what());
    }
    state.evidence_history.push_back(evidence);

    TraceRow row;
    row.iteration = iter;
    row.active_samples = static_cast<Index>(state.active_samples.size());
    row.active_features = static_cast<Index>(state.active_features.size());
    row.log_evidence = evidence;
    row.seconds = std::chrono::duration<double>(clock::now() - start).count();
    result.trace.rows.push_back(row);
    if (config.on_iteration) config.on_iteration(row);

    if (std::isfinite(previous) && std::abs(evidence - previous) < config.evidence_tol) {
      result.model.converged = true;
      break;
    }
    previous = evidence;
  }

  // Final posterior on the surviving sets under the last hyperparameters.
  const Problem problem = make_problem(data, state, config);
  const PosteriorMode mode = find_posterior_mode(problem, state.w, state.theta, state.hyper, config);
  const PosteriorApprox post = posterior_covariances(mode, problem, state.hyper, config);
  const bool converged = result.model.converged;
  result.model = detail::assemble_model(data, state, post, config);
  result.model.converged = converged;
  return result;
}

}  // namespace pfcvm
