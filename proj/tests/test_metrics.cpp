#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_util.hpp"

using namespace pfcvm;

namespace {

Vector labels(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

SubsetCollection collection(Index m, std::vector<IndexList> s) { return SubsetCollection{std::move(s), m}; }

/// Confusion counts expanded into label vectors (positive = +1).
std::pair<Vector, Vector> confusion(int tp, int tn, int fp, int fn) {
  const int n = tp + tn + fp + fn;
  Vector pred(n), truth(n);
  Index i = 0;
  for (int k = 0; k < tp; ++k, ++i) pred(i) = 1, truth(i) = 1;
  for (int k = 0; k < tn; ++k, ++i) pred(i) = -1, truth(i) = -1;
  for (int k = 0; k < fp; ++k, ++i) pred(i) = 1, truth(i) = -1;
  for (int k = 0; k < fn; ++k, ++i) pred(i) = -1, truth(i) = 1;
  return {pred, truth};
}

}  // namespace

TEST(ErrorRate, Examples) {
  const Vector t = labels({1, -1, 1, 1, -1, -1, 1, -1, 1, 1});
  EXPECT_EQ(error_rate(t, t), 0.0);
  EXPECT_EQ(error_rate(-t, t), 1.0);
  Vector p = t;
  p(0) = -p(0), p(4) = -p(4), p(9) = -p(9);
  EXPECT_DOUBLE_EQ(error_rate(p, t), 0.3);
  EXPECT_EQ(error_rate(p, t) + (1.0 - error_rate(p, t)), 1.0);
  EXPECT_THROW(error_rate(Vector(0), Vector(0)), UndefinedMetricError);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(labels({0.1, 0.2, 0.8, 0.9}), labels({-1, -1, 1, 1})), 1.0);
  EXPECT_EQ(auc(labels({0.3, 0.3, 0.3, 0.3}), labels({-1, 1, -1, 1})), 0.5);
  EXPECT_NEAR(auc(labels({0.9, 0.4, 0.6, 0.1}), labels({1, 1, -1, -1})), 0.75, 1e-12);
  EXPECT_THROW(auc(labels({0.1, 0.2}), labels({1, 1})), UndefinedMetricError);
}

TEST(Auc, NegatedScoresAndRange) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    std::uniform_int_distribution<int> coarse(0, 5);  // plenty of ties
    Vector s(20);
    for (Index i = 0; i < 20; ++i) s(i) = coarse(rng);
    const Vector y = testing_util::alternating_labels(20);
    const double a = auc(s, y);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_NEAR(auc(-s, y), 1.0 - a, 1e-12);
  }
}

TEST(Kappa, Examples) {
  const Vector t = labels({1, 1, -1, -1, 1, -1});
  EXPECT_DOUBLE_EQ(cohen_kappa(t, t).kappa, 1.0);
  auto [p, y] = confusion(40, 30, 10, 20);
  const Kappa k = cohen_kappa(p, y);
  EXPECT_NEAR(k.kappa, 0.4, 1e-12);
  EXPECT_NEAR(k.stderr_, std::sqrt(0.7 * 0.3 / (100 * 0.25)), 1e-12);
  EXPECT_NEAR(k.upper95() - k.lower95(), 2 * 1.96 * k.stderr_, 1e-15);
  // chance: prediction independent of truth
  auto [pc, yc] = confusion(25, 25, 25, 25);
  EXPECT_NEAR(cohen_kappa(pc, yc).kappa, 0.0, 1e-12);
  EXPECT_THROW(cohen_kappa(labels({1, 1}), labels({1, 1})), UndefinedMetricError);
}

TEST(Jaccard, Examples) {
  EXPECT_EQ(jaccard_stability(collection(5, {{1, 2}, {1, 2}, {2, 1}})), 1.0);
  EXPECT_NEAR(jaccard_stability(collection(5, {{1, 2, 3}, {2, 3, 4}})), 0.5, 1e-12);
  EXPECT_EQ(jaccard_stability(collection(6, {{1, 2}, {3, 4}, {5, 6}})), 0.0);
  EXPECT_THROW(jaccard_stability(collection(5, {{1}, {}})), UndefinedMetricError);
  EXPECT_THROW(jaccard_stability(collection(5, {{1}})), UndefinedMetricError);
  EXPECT_THROW(jaccard_stability(collection(3, {{1}, {4}})), DomainError);
}

TEST(Pearson, Examples) {
  EXPECT_NEAR(pearson_stability(collection(9, {{2, 5}, {2, 5}})), 1.0, 1e-12);
  EXPECT_NEAR(pearson_stability(collection(10, {{1, 2}, {1, 3}})), 0.375, 1e-12);
  EXPECT_NEAR(pearson_stability(collection(4, {{1, 2}, {3, 4}})), -1.0, 1e-12);
  EXPECT_THROW(pearson_stability(collection(2, {{1, 2}, {1}})), UndefinedMetricError);
}

TEST(Stability, PermutationInvariance) {
  std::mt19937_64 rng(8);
  const Index m = 12;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<IndexList> s;
    for (int r = 0; r < 5; ++r) {
      IndexList all(m);
      std::iota(all.begin(), all.end(), 1);
      std::shuffle(all.begin(), all.end(), rng);
      s.emplace_back(all.begin(), all.begin() + 1 + rep % 6);
    }
    const auto F = collection(m, s);
    auto reordered = s;
    std::shuffle(reordered.begin(), reordered.end(), rng);
    IndexList relabel(m);
    std::iota(relabel.begin(), relabel.end(), 1);
    std::shuffle(relabel.begin(), relabel.end(), rng);
    for (auto& sub : reordered)
      for (auto& k : sub) k = relabel[static_cast<std::size_t>(k - 1)];
    const auto G = collection(m, reordered);
    EXPECT_NEAR(jaccard_stability(F), jaccard_stability(G), 1e-12);
    EXPECT_NEAR(pearson_stability(F), pearson_stability(G), 1e-12);
    EXPECT_GE(jaccard_stability(F), 0.0);
    EXPECT_LE(jaccard_stability(F), 1.0);
    EXPECT_GE(pearson_stability(F), -1.0 - 1e-12);
    EXPECT_LE(pearson_stability(F), 1.0 + 1e-12);
  }
}

TEST(FriedmanCd, Examples) {
  EXPECT_NEAR(friedman_cd(6, 14, 2.576), 1.82, 0.005);
  EXPECT_NEAR(friedman_cd(6, 56, 2.576), friedman_cd(6, 14, 2.576) / 2.0, 1e-12);
  EXPECT_NEAR(friedman_cd(2, 6, 1.0), std::sqrt(6.0 / 36.0), 1e-12);
  EXPECT_THROW(friedman_cd(1, 6, 1.0), DomainError);
}

TEST(SelectionFrequency, Examples) {
  const auto F = collection(4, {{1, 2}, {1, 3}, {1, 2}, {1}, {1, 2}});
  const Vector f = selection_frequency(F);
  EXPECT_EQ(f(0), 1.0);
  EXPECT_DOUBLE_EQ(f(1), 0.6);
  EXPECT_EQ(f(3), 0.0);
  double mean_size = 0.0;
  for (const auto& s : F.subsets) mean_size += static_cast<double>(s.size()) / 5.0;
  EXPECT_NEAR(f.sum(), mean_size, 1e-12);
}

TEST(SelectionFrequency, FromColumns) {
  const auto F = subsets_from_columns({{0, 3}, {3}}, 4);
  EXPECT_EQ(F.subsets[0], (IndexList{1, 4}));
  EXPECT_EQ(selection_frequency(F)(3), 1.0);
}
