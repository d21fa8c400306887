#include <gtest/gtest.h>

#include <limits>

#include "test_util.hpp"

using namespace pfcvm;
using namespace testing_util;

namespace {

PosteriorApprox one_feature_posterior(double u, double var) {
  PosteriorApprox post;
  post.u_w = Vector::Constant(2, 0.5);
  post.sigma_w = Matrix::Identity(2, 2) * 0.25;
  post.u_theta = Vector::Constant(1, u);
  post.sigma_theta = Matrix::Constant(1, 1, var);
  return post;
}

}  // namespace

TEST(Reestimate, MacKayFixedPoint) {
  EXPECT_NEAR(reestimate_precision(0.5, 0.25, 2.0, HyperRule::mackay, 0, 0), 2.0, 1e-12);
}

TEST(Reestimate, EmExample) { EXPECT_NEAR(reestimate_precision(0.5, 0.25, 2.0, HyperRule::em, 0, 0), 2.0, 1e-12); }

TEST(Reestimate, NoOccamFactor) {
  EXPECT_NEAR(reestimate_precision(1.0, 0.0, 7.0, HyperRule::mackay, 0, 0), 1.0, 1e-12);
}

TEST(Reestimate, GammaPriorTerms) {
  // (gamma + 2c) / (u^2 + 2d) with gamma = 1 - 2 * 0.25
  EXPECT_NEAR(reestimate_precision(0.5, 0.25, 2.0, HyperRule::mackay, 1.0, 0.5), 2.5 / 1.25, 1e-12);
  EXPECT_NEAR(reestimate_precision(0.5, 0.25, 2.0, HyperRule::em, 1.0, 0.5), 3.0 / 1.5, 1e-12);
}

TEST(UpdateHyperparameters, DegeneratePureMapsToSentinel) {
  TrainConfig config;
  HyperParams hyper{Vector::Ones(2), Vector::Constant(1, 4.0)};
  const HyperParams next = update_hyperparameters(one_feature_posterior(0.0, 0.25), hyper, config);
  EXPECT_GT(next.beta(0), config.prune_threshold_max);
  EXPECT_EQ(next.beta(0), config.prune_threshold_max + 1.0);
}

TEST(UpdateHyperparameters, ExamplesThroughTheFullUpdate) {
  HyperParams hyper{Vector::Ones(2), Vector::Constant(1, 2.0)};
  TrainConfig config;
  EXPECT_NEAR(update_hyperparameters(one_feature_posterior(0.5, 0.25), hyper, config).beta(0), 2.0, 1e-12);
  config.hyper_rule = HyperRule::em;
  EXPECT_NEAR(update_hyperparameters(one_feature_posterior(0.5, 0.25), hyper, config).beta(0), 2.0, 1e-12);
}

TEST(UpdateHyperparameters, BiasIsNeverSentinel) {
  TrainConfig config;
  HyperParams hyper{Vector::Constant(2, 3.0), Vector::Ones(1)};
  PosteriorApprox post = one_feature_posterior(0.5, 0.25);
  post.u_w(0) = 0.0;
  post.sigma_w(0, 0) = 1.0 / 3.0;  // gamma = 0 -> 0/0
  const HyperParams next = update_hyperparameters(post, hyper, config);
  EXPECT_EQ(next.alpha(0), 3.0);
}

TEST(UpdateHyperparameters, DimensionChecks) {
  HyperParams hyper{Vector::Ones(3), Vector::Ones(1)};
  EXPECT_THROW(update_hyperparameters(one_feature_posterior(0.5, 0.25), hyper, TrainConfig{}), DimensionError);
}

namespace {

ModelState three_sample_state() {
  ModelState s;
  s.active_samples = {0, 1};
  s.active_features = {0, 1};
  s.w = Vector::Constant(3, 0.2);
  s.theta = Vector::Constant(2, 0.5);
  s.hyper.alpha = Vector::Ones(3);
  s.hyper.beta = Vector::Ones(2);
  return s;
}

}  // namespace

TEST(Prune, RemovesSampleKeepsBias) {
  ModelState s = three_sample_state();
  s.hyper.alpha << 1, 1e7, 1;
  s.w << 0.1, 0.2, 0.3;
  const ModelState out = prune(s, TrainConfig{});
  EXPECT_EQ(out.active_samples, (IndexList{1}));
  EXPECT_EQ(out.w.size(), 2);
  EXPECT_DOUBLE_EQ(out.w(1), 0.3);
  EXPECT_EQ(out.hyper.alpha.size(), 2);
}

TEST(Prune, BiasPrecisionNeverPrunes) {
  ModelState s = three_sample_state();
  s.hyper.alpha(0) = 1e9;
  EXPECT_EQ(prune(s, TrainConfig{}).w.size(), 3);
}

TEST(Prune, NothingAboveThreshold) {
  const ModelState s = three_sample_state();
  const ModelState out = prune(s, TrainConfig{});
  EXPECT_EQ(out.active_samples, s.active_samples);
  EXPECT_EQ(out.active_features, s.active_features);
  EXPECT_EQ(out.w, s.w);
  EXPECT_EQ(out.theta, s.theta);
}

TEST(Prune, AllFeaturesIsDegenerate) {
  ModelState s = three_sample_state();
  s.hyper.beta << 1e7, 1e7;
  try {
    prune(s, TrainConfig{});
    FAIL();
  } catch (const DegenerateModelError& e) {
    EXPECT_NE(std::string(e.what()).find("feature"), std::string::npos);
  }
}

TEST(Prune, PosteriorVariantUsesMeans) {
  ModelState s = three_sample_state();
  PosteriorApprox post;
  post.u_w = Vector::Constant(3, 0.9);
  post.u_theta = Vector::Constant(2, 0.7);
  const ModelState out = prune(s, post, TrainConfig{});
  EXPECT_EQ(out.w, post.u_w);
  EXPECT_EQ(out.theta, post.u_theta);
}
