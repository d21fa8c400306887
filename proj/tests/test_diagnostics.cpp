#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles/quadrature.hpp"
#include "test_util.hpp"

using namespace pfcvm;

namespace {

KLInput kl_input(std::vector<double> theta, std::vector<double> beta, std::vector<double> beta0) {
  const auto v = [](const std::vector<double>& x) { return Vector(Eigen::Map<const Vector>(x.data(), Index(x.size()))); };
  return KLInput{v(theta), v(beta), v(beta0)};
}

}  // namespace

TEST(Kl, ZeroAtPrior) {
  EXPECT_NEAR(kl_truncated_feature(0.0, 0.7, 0.7), 0.0, 1e-10);
  // pruned (theta = 0) features are skipped in the sum
  EXPECT_EQ(kl_feature_divergence(kl_input({0.0, 0.0}, {1.0, 2.0}, {1.0, 2.0})), 0.0);
  EXPECT_EQ(kl_feature_divergence(kl_input({}, {}, {})), 0.0);
}

TEST(Kl, MatchesQuadrature) {
  EXPECT_NEAR(kl_truncated_feature(1.0, 1.0, 0.5), oracle::kl_quadrature(1.0, 1.0, 0.5), 1e-6);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> th(0.0, 4.0), pr(0.1, 20.0);
  for (int rep = 0; rep < 40; ++rep) {
    const double t = th(rng), b = pr(rng), b0 = pr(rng);
    EXPECT_NEAR(kl_truncated_feature(t, b, b0), oracle::kl_quadrature(t, b, b0), 1e-6)
        << "theta " << t << " beta " << b << " beta0 " << b0;
  }
}

TEST(Kl, NonnegativeAndFiniteInTails) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> th(0.0, 50.0), lp(-6.0, 6.0);
  for (int rep = 0; rep < 500; ++rep) {
    const double v = kl_truncated_feature(th(rng), std::exp(lp(rng)), std::exp(lp(rng)));
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, -1e-10);
  }
}

TEST(Kl, GridArgminNearZero) {
  double best = 1e300, arg = -1.0;
  for (int i = 0; i <= 300; ++i) {
    const double t = 3.0 * i / 300.0;
    const double v = kl_truncated_feature(t, 0.5, 0.5);
    if (v < best) best = v, arg = t;
  }
  EXPECT_GE(arg, 0.0);
  EXPECT_LE(arg, 0.3);
}

TEST(Kl, Errors) {
  EXPECT_THROW(kl_truncated_feature(1.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(kl_feature_divergence(kl_input({1.0}, {1.0}, {-1.0})), DomainError);
  EXPECT_THROW(kl_feature_divergence(kl_input({1.0}, {1.0, 2.0}, {1.0})), DimensionError);
}

TEST(Bound, WorkedExample) {
  BoundInput in;
  in.empirical_loss = 0.1;
  in.kl = 0.5;
  in.r = 2.0;
  in.g = 1.0;
  in.n = 100;
  in.c = 1.0;
  in.delta = std::exp(-2.0);
  EXPECT_NEAR(generalization_bound(in), 0.1 + 0.4 + std::sqrt((std::log(2.0) + 1.0) / 100.0), 1e-12);
  EXPECT_NEAR(generalization_bound(in), 0.6301, 1e-4);
}

TEST(Bound, Limits) {
  BoundInput in;
  in.empirical_loss = 0.2;
  in.kl = 3.0;
  in.n = 1e16;
  EXPECT_NEAR(generalization_bound(in), 0.2, 1e-6);
}

TEST(Bound, Monotone) {
  BoundInput base;
  base.empirical_loss = 0.1;
  base.kl = 1.5;
  base.n = 200;
  double prev = generalization_bound(base);
  for (double kl = 1.6; kl < 20; kl += 0.5) {
    BoundInput in = base;
    in.kl = kl;
    const double v = generalization_bound(in);
    EXPECT_GT(v, prev);
    prev = v;
  }
  BoundInput more_loss = base, more_n = base, less_kl = base;
  more_loss.empirical_loss = 0.3;
  more_n.n = 400;
  less_kl.kl = 0.2;  // below g: bound unchanged
  EXPECT_GE(generalization_bound(more_loss), generalization_bound(base));
  EXPECT_LE(generalization_bound(more_n), generalization_bound(base));
  BoundInput at_g = base;
  at_g.kl = 1.0;
  EXPECT_EQ(generalization_bound(less_kl), generalization_bound(at_g));
}

TEST(Bound, Errors) {
  BoundInput in;
  in.r = 1.0;
  EXPECT_THROW(generalization_bound(in), DomainError);
  in.r = 0.5;  // log_r argument r * g~ / g = 0.25
  EXPECT_THROW(generalization_bound(in), DomainError);
  BoundInput bad_delta;
  bad_delta.delta = 1.5;
  EXPECT_THROW(generalization_bound(bad_delta), DomainError);
}
