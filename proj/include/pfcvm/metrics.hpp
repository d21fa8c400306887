#pragma once

// Classification quality, agreement and feature-selection stability metrics.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "pfcvm/types.hpp"

namespace pfcvm {

inline double error_rate(const Vector& predicted, const Vector& truth) {
  if (predicted.size() != truth.size()) throw DimensionError("error_rate: length mismatch");
  if (truth.size() == 0) throw UndefinedMetricError("error_rate: empty input");
  Index wrong = 0;
  for (Index i = 0; i < truth.size(); ++i) wrong += (predicted(i) != truth(i)) ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

/// Area under the ROC curve as the Mann-Whitney statistic; tied scores
/// contribute 1/2 via average ranks.
inline double auc(const Vector& scores, const Vector& truth) {
  if (scores.size() != truth.size()) throw DimensionError("auc: length mismatch");
  const Index n = scores.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) < scores(b); });
  std::vector<double> rank(static_cast<std::size_t>(n));
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && scores(order[static_cast<std::size_t>(j + 1)]) == scores(order[static_cast<std::size_t>(i)])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index k = i; k <= j; ++k) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = avg;
    i = j + 1;
  }
  double n_pos = 0.0, rank_sum = 0.0;
  for (Index i = 0; i < n; ++i)
    if (truth(i) > 0.0) {
      n_pos += 1.0;
      rank_sum += rank[static_cast<std::size_t>(i)];
    }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw UndefinedMetricError("auc: both classes must be present");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

struct Kappa {
  double kappa = 0.0;
  double stderr_ = 0.0;
  double lower95() const { return kappa - 1.96 * stderr_; }
  double upper95() const { return kappa + 1.96 * stderr_; }
};

/// Cohen's kappa for binary labels with the asymptotic standard error
/// sqrt(p_o (1 - p_o) / (n (1 - p_e)^2)).
inline Kappa cohen_kappa(const Vector& predicted, const Vector& truth) {
  if (predicted.size() != truth.size()) throw DimensionError("cohen_kappa: length mismatch");
  const auto n = static_cast<double>(truth.size());
  if (n == 0.0) throw UndefinedMetricError("cohen_kappa: empty input");
  double agree = 0.0, pred_pos = 0.0, true_pos = 0.0;
  for (Index i = 0; i < truth.size(); ++i) {
    agree += (predicted(i) > 0.0) == (truth(i) > 0.0) ? 1.0 : 0.0;
    pred_pos += predicted(i) > 0.0 ? 1.0 : 0.0;
    true_pos += truth(i) > 0.0 ? 1.0 : 0.0;
  }
  const double po = agree / n;
  const double pe = (pred_pos / n) * (true_pos / n) + (1.0 - pred_pos / n) * (1.0 - true_pos / n);
  if (pe >= 1.0) throw UndefinedMetricError("cohen_kappa: chance agreement is 1 (single category)");
  Kappa k;
  k.kappa = (po - pe) / (1.0 - pe);
  k.stderr_ = std::sqrt(po * (1.0 - po) / (n * (1.0 - pe) * (1.0 - pe)));
  return k;
}

/// Selected-feature subsets from repeated runs over `total_features` features.
/// Feature labels are 1-based, 1..total_features.
struct SubsetCollection {
  std::vector<IndexList> subsets;
  Index total_features = 0;
};

/// Builds a collection from 0-based column indices such as FittedModel::feature_indices.
inline SubsetCollection subsets_from_columns(const std::vector<IndexList>& columns, Index total_features) {
  SubsetCollection F;
  F.total_features = total_features;
  for (const auto& c : columns) {
    IndexList s;
    for (Index k : c) s.push_back(k + 1);
    F.subsets.push_back(std::move(s));
  }
  return F;
}

namespace detail {

inline std::vector<std::set<Index>> checked_sets(const SubsetCollection& F, std::size_t min_count) {
  if (F.subsets.size() < min_count)
    throw UndefinedMetricError("subset collection needs at least " + std::to_string(min_count) + " subsets");
  std::vector<std::set<Index>> sets;
  for (const auto& s : F.subsets) {
    std::set<Index> u;
    for (Index k : s) {
      if (k < 1 || k > F.total_features)
        throw DomainError("feature index " + std::to_string(k) + " outside [1, " + std::to_string(F.total_features) +
                          "]");
      u.insert(k);
    }
    sets.push_back(std::move(u));
  }
  return sets;
}

inline double intersection_size(const std::set<Index>& a, const std::set<Index>& b) {
  double r = 0.0;
  for (Index k : a) r += b.count(k) ? 1.0 : 0.0;
  return r;
}

template <typename PairScore>
double mean_pairwise(const std::vector<std::set<Index>>& sets, PairScore&& score) {
  double sum = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i + 1 < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      sum += score(sets[i], sets[j]);
      pairs += 1.0;
    }
  return sum / pairs;
}

}  // namespace detail

/// Mean pairwise |s_i & s_j| / |s_i | s_j| over all pairs.
inline double jaccard_stability(const SubsetCollection& F) {
  const auto sets = detail::checked_sets(F, 2);
  for (const auto& s : sets)
    if (s.empty()) throw UndefinedMetricError("jaccard_stability: empty subset");
  return detail::mean_pairwise(sets, [](const auto& a, const auto& b) {
    const double rij = detail::intersection_size(a, b);
    return rij / (static_cast<double>(a.size()) + static_cast<double>(b.size()) - rij);
  });
}

/// Mean pairwise (M r_ij - r_i r_j) / sqrt(r_i r_j (M - r_i)(M - r_j)).
inline double pearson_stability(const SubsetCollection& F) {
  const auto sets = detail::checked_sets(F, 2);
  const auto M = static_cast<double>(F.total_features);
  for (const auto& s : sets)
    if (s.empty() || static_cast<double>(s.size()) >= M)
      throw UndefinedMetricError("pearson_stability: subset sizes must lie strictly between 0 and M");
  return detail::mean_pairwise(sets, [M](const auto& a, const auto& b) {
    const double ri = static_cast<double>(a.size());
    const double rj = static_cast<double>(b.size());
    const double rij = detail::intersection_size(a, b);
    return (M * rij - ri * rj) / std::sqrt(ri * rj * (M - ri) * (M - rj));
  });
}

/// Fraction of subsets containing each feature; entry k - 1 belongs to feature k.
inline Vector selection_frequency(const SubsetCollection& F) {
  const auto sets = detail::checked_sets(F, 1);
  Vector freq = Vector::Zero(F.total_features);
  for (const auto& s : sets)
    for (Index k : s) freq(k - 1) += 1.0;
  return freq / static_cast<double>(sets.size());
}

/// Critical difference q_alpha * sqrt(p (p + 1) / (6 N)) for p algorithms on N datasets.
inline double friedman_cd(int num_algorithms, int num_datasets, double q_alpha) {
  if (num_algorithms < 2 || num_datasets < 1 || !(q_alpha > 0.0))
    throw DomainError("friedman_cd: need p >= 2, N >= 1, q_alpha > 0");
  const double p = num_algorithms;
  return q_alpha * std::sqrt(p * (p + 1.0) / (6.0 * num_datasets));
}

}  // namespace pfcvm
