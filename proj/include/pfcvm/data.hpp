#pragma once

// Dataset ingestion (dense CSV, svmlight), train-statistics standardization,
// seeded synthetic generators and resampling plans.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfcvm/dataset.hpp"

namespace pfcvm {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Maps {-1,+1} and {0,1} to -1/+1.
inline std::optional<double> parse_label(std::string_view s) {
  const auto v = parse_double(s);
  if (!v) return std::nullopt;
  if (*v == 1.0) return 1.0;
  if (*v == -1.0 || *v == 0.0) return -1.0;
  return std::nullopt;
}

inline std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return in;
}

}  // namespace detail

struct CsvOptions {
  int label_column = -1;  ///< 0-based; negative counts from the end (-1 = last)
  bool has_header = false;
};

/// Reads a rectangular comma-separated numeric table.
inline Dataset read_dense_csv(std::istream& in, const CsvOptions& opt = {}) {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  std::vector<std::string> header;
  std::size_t width = 0;
  std::string line;
  int line_no = 0;
  bool header_pending = opt.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    const auto cells = detail::split(sv, ',');
    if (width == 0) {
      width = cells.size();
      if (width < 2) throw ParseError("row " + std::to_string(line_no) + ": need a label and at least one feature");
    } else if (cells.size() != width) {
      throw ParseError("row " + std::to_string(line_no) + ": ragged row with " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(width));
    }
    const int label_col = opt.label_column < 0 ? static_cast<int>(width) + opt.label_column : opt.label_column;
    if (label_col < 0 || label_col >= static_cast<int>(width))
      throw ParseError("label column " + std::to_string(opt.label_column) + " outside a row of " +
                       std::to_string(width) + " cells");
    if (header_pending) {
      header_pending = false;
      for (std::size_t c = 0; c < cells.size(); ++c)
        if (static_cast<int>(c) != label_col) header.emplace_back(detail::trim(cells[c]));
      continue;
    }
    std::vector<double> row;
    row.reserve(width - 1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<int>(c) == label_col) {
        const auto lab = detail::parse_label(cells[c]);
        if (!lab)
          throw ParseError("row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                           ": unknown label value '" + std::string(detail::trim(cells[c])) + "'");
        labels.push_back(*lab);
        continue;
      }
      const auto v = detail::parse_double(cells[c]);
      if (!v || !std::isfinite(*v))
        throw ParseError("row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                         ": not a finite number '" + std::string(detail::trim(cells[c])) + "'");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  Dataset d;
  const auto n = static_cast<Index>(rows.size());
  const auto m = width > 0 ? static_cast<Index>(width - 1) : 0;
  d.X.resize(n, m);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < m; ++k) d.X(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    d.y(i) = labels[static_cast<std::size_t>(i)];
  }
  d.feature_names = std::move(header);
  return d;
}

inline Dataset load_dense_csv(const std::string& path, const CsvOptions& opt = {}) {
  auto in = detail::open_or_throw(path);
  return read_dense_csv(in, opt);
}

/// Reads "label idx:val ..." lines with 1-based, strictly increasing indices.
/// `num_features` widens the result beyond the largest index seen.
inline Dataset read_sparse_svmlight(std::istream& in, Index num_features = 0) {
  std::vector<std::vector<std::pair<Index, double>>> rows;
  std::vector<double> labels;
  Index max_index = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = line;
    if (const auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = detail::trim(sv);
    if (sv.empty()) continue;
    std::vector<std::string_view> tokens;
    for (auto tok : detail::split(sv, ' '))
      for (auto t : detail::split(tok, '\t'))
        if (!detail::trim(t).empty()) tokens.push_back(detail::trim(t));
    const auto lab = detail::parse_label(tokens.front());
    if (!lab)
      throw ParseError("line " + std::to_string(line_no) + ": unknown label value '" + std::string(tokens.front()) +
                       "'");
    std::vector<std::pair<Index, double>> entries;
    Index last = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos)
        throw ParseError("line " + std::to_string(line_no) + ", token " + std::to_string(t + 1) +
                         ": malformed token '" + std::string(tokens[t]) + "'");
      const std::string_view key = tokens[t].substr(0, colon);
      if (key == "qid") continue;
      long long idx = 0;
      const auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
      const auto val = detail::parse_double(tokens[t].substr(colon + 1));
      if (ec != std::errc() || p != key.data() + key.size() || idx < 1 || !val || !std::isfinite(*val))
        throw ParseError("line " + std::to_string(line_no) + ", token " + std::to_string(t + 1) +
                         ": malformed token '" + std::string(tokens[t]) + "'");
      if (idx <= last)
        throw ParseError("line " + std::to_string(line_no) + ", token " + std::to_string(t + 1) +
                         ": feature index " + std::to_string(idx) +
                         (idx == last ? " duplicated" : " not increasing"));
      last = static_cast<Index>(idx);
      entries.emplace_back(static_cast<Index>(idx - 1), *val);
    }
    max_index = std::max(max_index, last);
    rows.push_back(std::move(entries));
    labels.push_back(*lab);
  }
  Dataset d;
  const auto n = static_cast<Index>(rows.size());
  const Index m = std::max(max_index, num_features);
  d.X = Matrix::Zero(n, m);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (const auto& [k, v] : rows[static_cast<std::size_t>(i)]) d.X(i, k) = v;
    d.y(i) = labels[static_cast<std::size_t>(i)];
  }
  return d;
}

inline Dataset load_sparse_svmlight(const std::string& path, Index num_features = 0) {
  auto in = detail::open_or_throw(path);
  return read_sparse_svmlight(in, num_features);
}

/// Per-column centering/scaling learned on a training set.
struct ColumnStats {
  Vector mean;
  Vector scale;  ///< population standard deviation, 1 for constant columns

  Matrix apply(const Matrix& X) const {
    if (X.cols() != mean.size()) throw DimensionError("column stats: feature count mismatch");
    return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
};

inline ColumnStats column_stats(const Matrix& X) {
  if (X.rows() == 0) throw DimensionError("column stats: empty training set");
  ColumnStats s;
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (Index k = 0; k < X.cols(); ++k) {
    const double var = (X.col(k).array() - s.mean(k)).square().mean();
    s.scale(k) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

struct Standardized {
  Dataset train;
  Dataset apply_to;
  ColumnStats stats;
};

/// Centers and scales each column with training statistics only.
inline Standardized standardize_columns(const Dataset& train, const Dataset& apply_to) {
  Standardized out{train, apply_to, column_stats(train.X)};
  out.train.X = out.stats.apply(train.X);
  out.apply_to.X = out.stats.apply(apply_to.X);
  return out;
}

/// Standardizes every row to mean 0 and population sd 1.
inline Matrix standardize_rows(const Matrix& X) {
  Matrix out(X.rows(), X.cols());
  for (Index i = 0; i < X.rows(); ++i) {
    const double mean = X.row(i).mean();
    const double var = (X.row(i).array() - mean).square().mean();
    if (X.cols() < 2 || !(var > 0.0))
      throw DegenerateModelError("row " + std::to_string(i + 1) + " has zero variance; cannot standardize");
    out.row(i) = (X.row(i).array() - mean) / std::sqrt(var);
  }
  return out;
}

/// Row standardization (each sample on its own), then column standardization
/// with training statistics.
inline Standardized standardize_rows_then_columns(const Dataset& train, const Dataset& apply_to) {
  Dataset tr = train;
  Dataset te = apply_to;
  tr.X = standardize_rows(train.X);
  te.X = standardize_rows(apply_to.X);
  return standardize_columns(tr, te);
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Two-class waveform data. Features 1..21 mix two of three triangular base
/// waves plus unit noise; the remaining `noise_dims` are pure N(0, 1).
/// Class +1 mixes (h1, h2), class -1 mixes (h1, h3).
inline Dataset gen_waveform(Index n_per_class, Index noise_dims, std::uint64_t seed) {
  if (n_per_class < 1) throw DomainError("gen_waveform: n_per_class must be >= 1");
  if (noise_dims < 0) throw DomainError("gen_waveform: noise_dims must be >= 0");
  constexpr Index kWave = 21;
  auto h = [](int center, Index i) { return std::max(6.0 - std::abs(static_cast<double>(i) - center), 0.0); };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Dataset d;
  const Index n = 2 * n_per_class;
  d.X.resize(n, kWave + noise_dims);
  d.y.resize(n);
  for (Index r = 0; r < n; ++r) {
    const bool positive = r < n_per_class;
    const int other = positive ? 15 : 11;
    const double u = unif(rng);
    for (Index i = 1; i <= kWave; ++i) d.X(r, i - 1) = u * h(7, i) + (1.0 - u) * h(other, i) + normal(rng);
    for (Index k = 0; k < noise_dims; ++k) d.X(r, kWave + k) = normal(rng);
    d.y(r) = positive ? 1.0 : -1.0;
  }
  for (Index k = 0; k < kWave + noise_dims; ++k) d.feature_names.push_back("x" + std::to_string(k + 1));
  return d;
}

struct SparseInformative {
  Dataset data;
  IndexList informative;  ///< 0-based, sorted
};

/// X ~ N(0, 1); y = sign(effect * sum of the informative columns + N(0, 1)).
/// The informative columns are a seeded random subset of size k.
inline SparseInformative gen_sparse_informative(Index n, Index m, Index k, double effect, std::uint64_t seed) {
  if (k < 0 || k > m) throw DomainError("gen_sparse_informative: need 0 <= k <= m");
  if (n < 2) throw DomainError("gen_sparse_informative: need n >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  IndexList cols = iota_indices(m);
  std::shuffle(cols.begin(), cols.end(), rng);
  IndexList informative(cols.begin(), cols.begin() + k);
  std::sort(informative.begin(), informative.end());

  for (int attempt = 0; attempt < 100; ++attempt) {
    SparseInformative out;
    out.informative = informative;
    out.data.X.resize(n, m);
    out.data.y.resize(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < m; ++j) out.data.X(i, j) = normal(rng);
      double s = 0.0;
      for (Index j : informative) s += out.data.X(i, j);
      out.data.y(i) = effect * s + normal(rng) >= 0.0 ? 1.0 : -1.0;
    }
    for (Index j = 0; j < m; ++j) out.data.feature_names.push_back("x" + std::to_string(j + 1));
    if (has_both_classes(out.data)) return out;
  }
  throw DegenerateModelError("gen_sparse_informative: 100 draws produced a single class");
}

// ---------------------------------------------------------------------------
// Resampling plans

struct Split {
  IndexList train;
  IndexList test;
};

struct SplitPlan {
  std::vector<Split> splits;
  std::uint64_t seed = 0;
};

inline SplitPlan loocv_splits(Index n) {
  if (n < 2) throw DomainError("loocv_splits: need at least 2 samples");
  SplitPlan plan;
  for (Index i = 0; i < n; ++i) {
    Split s;
    s.test = {i};
    for (Index j = 0; j < n; ++j)
      if (j != i) s.train.push_back(j);
    plan.splits.push_back(std::move(s));
  }
  return plan;
}

namespace detail {

inline std::pair<IndexList, IndexList> class_indices(const Vector& y) {
  IndexList pos, neg;
  for (Index i = 0; i < y.size(); ++i) (y(i) > 0.0 ? pos : neg).push_back(i);
  return {pos, neg};
}

inline Split make_split(IndexList pos, IndexList neg, Index n_pos, Index n_neg, std::mt19937_64& rng) {
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  Split s;
  s.train.insert(s.train.end(), pos.begin(), pos.begin() + n_pos);
  s.train.insert(s.train.end(), neg.begin(), neg.begin() + n_neg);
  s.test.insert(s.test.end(), pos.begin() + n_pos, pos.end());
  s.test.insert(s.test.end(), neg.begin() + n_neg, neg.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace detail

/// One stratified train/test split holding `train_fraction` of each class
/// (rounded to the nearest sample) in the training part.
inline SplitPlan stratified_split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw DomainError("stratified_split: train_fraction must lie in (0, 1)");
  auto [pos, neg] = detail::class_indices(data.y);
  if (pos.empty() || neg.empty()) throw DegenerateModelError("stratified_split: both classes required");
  std::mt19937_64 rng(seed);
  const auto take = [&](std::size_t count) {
    return static_cast<Index>(std::llround(train_fraction * static_cast<double>(count)));
  };
  SplitPlan plan;
  plan.seed = seed;
  plan.splits.push_back(detail::make_split(pos, neg, take(pos.size()), take(neg.size()), rng));
  return plan;
}

/// `repeats` splits, each training on `per_class` random samples of each class
/// and testing on the rest. Split r uses seed + r.
inline SplitPlan per_class_resamples(const Dataset& data, Index per_class, int repeats, std::uint64_t seed) {
  auto [pos, neg] = detail::class_indices(data.y);
  if (per_class < 1 || static_cast<std::size_t>(per_class) > std::min(pos.size(), neg.size()))
    throw DomainError("per_class_resamples: per-class training count exceeds the smaller class");
  SplitPlan plan;
  plan.seed = seed;
  for (int r = 0; r < repeats; ++r) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(r));
    plan.splits.push_back(detail::make_split(pos, neg, per_class, per_class, rng));
  }
  return plan;
}

}  // namespace pfcvm
