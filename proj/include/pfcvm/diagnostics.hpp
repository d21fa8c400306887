#pragma once

// KL divergence between the truncated-Gaussian feature posterior and its
// truncated-Gaussian prior, and the entropic Rademacher generalization bound.

#include <cmath>
#include <numbers>
#include <string>

#include "pfcvm/types.hpp"

namespace pfcvm {

struct KLInput {
  Vector theta;  ///< posterior means, >= 0
  Vector beta;   ///< posterior precisions
  Vector beta0;  ///< prior precisions
};

/// KL(q || p) for one feature: q = N(theta, 1/beta) truncated to [0, inf),
/// p = N(0, 1/beta0) truncated to [0, inf).
inline double kl_truncated_feature(double theta, double beta, double beta0) {
  if (!(beta > 0.0) || !(beta0 > 0.0)) throw DomainError("KL: precisions must be positive");
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw DomainError("KL: feature mean must be finite and >= 0");
  const double z = -theta * std::sqrt(beta / 2.0);
  // Z0 = erfc(z) / 2; the middle term divides by erfcx(z) = exp(z^2) erfc(z),
  // which overflows to +inf (term -> 0) rather than producing NaN.
  const double erfcx = std::exp(z * z) * std::erfc(z);
  const double quad = 0.5 * (beta0 / beta - 1.0 + std::log(beta / beta0) + beta0 * theta * theta);
  const double mass = theta == 0.0 ? 0.0 : (beta0 + beta) * theta / (std::sqrt(2.0 * std::numbers::pi * beta) * erfcx);
  return quad + mass - std::log(std::erfc(z));
}

/// Sum of the per-feature divergences over features with theta != 0.
inline double kl_feature_divergence(const KLInput& in) {
  if (in.theta.size() != in.beta.size() || in.theta.size() != in.beta0.size())
    throw DimensionError("KL: theta, beta and beta0 must have equal length");
  double kl = 0.0;
  for (Index k = 0; k < in.theta.size(); ++k) {
    if (!(in.beta(k) > 0.0) || !(in.beta0(k) > 0.0)) throw DomainError("KL: precisions must be positive");
    if (in.theta(k) == 0.0) continue;
    kl += kl_truncated_feature(in.theta(k), in.beta(k), in.beta0(k));
  }
  return kl;
}

struct BoundInput {
  double empirical_loss = 0.0;  ///< Lambda in [0, 1]
  double kl = 0.0;              ///< KL(Q || P) >= 0
  double n = 1.0;               ///< sample count
  double c = 1.0;               ///< Lipschitz scale
  double r = 2.0;
  double g = 1.0;
  double delta = 0.05;
};

/// Lambda + (2/c) sqrt(2 g~ / n) + sqrt((ln log_r(r g~ / g) + ln(1/delta) / 2) / n),
/// g~ = r * max(KL, g).
inline double generalization_bound(const BoundInput& in) {
  if (!(in.empirical_loss >= 0.0 && in.empirical_loss <= 1.0)) throw DomainError("bound: empirical loss outside [0, 1]");
  if (!(in.kl >= 0.0)) throw DomainError("bound: KL must be >= 0");
  if (!(in.n > 0.0) || !(in.c > 0.0) || !(in.r > 0.0) || !(in.g > 0.0))
    throw DomainError("bound: n, c, r and g must be positive");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw DomainError("bound: delta must lie in (0, 1)");
  if (in.r == 1.0) throw DomainError("bound: logarithm base r must differ from 1");
  const double g_tilde = in.r * std::max(in.kl, in.g);
  const double arg = in.r * g_tilde / in.g;
  if (!(arg > 1.0)) throw DomainError("bound: log_r argument r*g~/g must exceed 1");
  const double log_r = std::log(arg) / std::log(in.r);
  if (!(log_r > 0.0)) throw DomainError("bound: log_r(r*g~/g) must be positive");
  const double inner = std::log(log_r) + 0.5 * std::log(1.0 / in.delta);
  if (inner < 0.0) throw DomainError("bound: negative argument under the confidence square root");
  return in.empirical_loss + (2.0 / in.c) * std::sqrt(2.0 * g_tilde / in.n) + std::sqrt(inner / in.n);
}

}  // namespace pfcvm
