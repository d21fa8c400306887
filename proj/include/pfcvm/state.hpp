#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pfcvm/dataset.hpp"
#include "pfcvm/kernel.hpp"

namespace pfcvm {

enum class HyperRule { mackay, em };

inline std::string to_string(HyperRule rule) { return rule == HyperRule::mackay ? "mackay" : "em"; }

/// Prior precisions. alpha(0) belongs to the bias weight.
struct HyperParams {
  Vector alpha;  ///< length N_active + 1
  Vector beta;   ///< length M_active
};

struct TraceRow {
  int iteration = 0;
  Index active_samples = 0;
  Index active_features = 0;
  double log_evidence = 0.0;
  double seconds = 0.0;
};

struct TrainConfig {
  KernelKind kernel = KernelKind::rbf;
  int poly_order = 2;

  double lambda = 5.0;                 ///< scale of the sigmoid standing in for the nonnegativity indicator
  double prune_threshold_max = 1e6;    ///< hyperparameters above this remove their sample/feature
  double evidence_tol = 1e-3;          ///< |delta log evidence| stopping threshold
  int max_iterations = 500;
  int inner_mode_iterations = 25;
  double mode_grad_tol = 1e-5;
  HyperRule hyper_rule = HyperRule::mackay;
  double gamma_prior_c = 0.0;
  double gamma_prior_d = 0.0;
  double init_alpha = 1.0;
  double init_beta = 1.0;
  double init_w = 1e-2;
  std::optional<double> init_theta;    ///< 1/M when unset
  bool drop_E = true;
  std::uint64_t rng_seed = 0;

  /// Called after every outer iteration; may be empty.
  std::function<void(const TraceRow&)> on_iteration;

  void validate() const {
    if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
    if (!(prune_threshold_max > 0.0)) throw DomainError("prune threshold must be positive");
    if (!(evidence_tol > 0.0)) throw DomainError("evidence tolerance must be positive");
    if (!(mode_grad_tol > 0.0)) throw DomainError("mode gradient tolerance must be positive");
    if (max_iterations < 1 || inner_mode_iterations < 1) throw DomainError("iteration limits must be >= 1");
    if (gamma_prior_c < 0.0 || gamma_prior_d < 0.0) throw DomainError("Gamma hyperprior parameters must be >= 0");
    if (!(init_alpha > 0.0) || !(init_beta > 0.0)) throw DomainError("initial precisions must be positive");
    if (init_w < 0.0) throw DomainError("initial sample weight must be >= 0");
    if (init_theta && !(*init_theta >= 0.0)) throw DomainError("initial feature weight must be >= 0");
    if (kernel == KernelKind::polynomial && poly_order < 1) throw DomainError("polynomial order must be >= 1");
  }
};

/// Mutable state of the training loop.
struct ModelState {
  IndexList active_samples;   ///< rows of the training set used as basis functions
  IndexList active_features;  ///< columns of the training set still in the model
  Vector w;                   ///< bias + one weight per active sample
  Vector theta;               ///< one weight per active feature
  HyperParams hyper;
  std::vector<double> evidence_history;
  int iteration = 0;
};

inline void check_conformable(const ModelState& s) {
  const auto ns = static_cast<Index>(s.active_samples.size());
  const auto nf = static_cast<Index>(s.active_features.size());
  if (s.w.size() != ns + 1 || s.hyper.alpha.size() != ns + 1)
    throw DimensionError("model state: sample weights/precisions do not match the active sample count");
  if (s.theta.size() != nf || s.hyper.beta.size() != nf)
    throw DimensionError("model state: feature weights/precisions do not match the active feature count");
}

/// Training data restricted to the active sets of a ModelState.
struct Problem {
  Matrix X;        ///< N x M_active, every training row
  Vector y;        ///< N labels
  Vector t;        ///< (y + 1) / 2
  Matrix X_basis;  ///< active sample rows, M_active columns
  Vector y_basis;
  KernelKind kind = KernelKind::rbf;
  int order = 2;

  KernelSpec spec(const Vector& theta) const { return KernelSpec{kind, order, theta}; }
};

inline Problem make_problem(const Dataset& data, const IndexList& active_samples, const IndexList& active_features,
                            KernelKind kind, int order) {
  Problem p;
  p.X = select_columns(data.X, active_features);
  p.y = data.y;
  p.t = (data.y.array() + 1.0) / 2.0;
  p.X_basis = select_rows(p.X, active_samples);
  p.y_basis = select(data.y, active_samples);
  p.kind = kind;
  p.order = order;
  return p;
}

inline Problem make_problem(const Dataset& data, const ModelState& state, const TrainConfig& config) {
  return make_problem(data, state.active_samples, state.active_features, config.kernel, config.poly_order);
}

}  // namespace pfcvm
