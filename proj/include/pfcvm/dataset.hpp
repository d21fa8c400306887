#pragma once

#include <string>
#include <vector>

#include "pfcvm/types.hpp"

namespace pfcvm {

/// Labelled design matrix; labels are -1 / +1 stored as doubles.
struct Dataset {
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;

  Index size() const { return X.rows(); }
  Index dims() const { return X.cols(); }
};

inline void validate(const Dataset& d) {
  if (d.y.size() != d.X.rows()) throw DimensionError("dataset: label count does not match row count");
  if (!d.X.allFinite()) throw NumericError("dataset: feature matrix has non-finite entries");
  for (Index i = 0; i < d.y.size(); ++i)
    if (d.y(i) != 1.0 && d.y(i) != -1.0)
      throw DomainError("dataset: label at row " + std::to_string(i + 1) + " is not -1 or +1");
}

inline bool has_both_classes(const Dataset& d) {
  return (d.y.array() > 0.0).any() && (d.y.array() < 0.0).any();
}

inline Dataset subset(const Dataset& d, const IndexList& rows) {
  Dataset out;
  out.X = select_rows(d.X, rows);
  out.y = select(d.y, rows);
  out.feature_names = d.feature_names;
  return out;
}

}  // namespace pfcvm
