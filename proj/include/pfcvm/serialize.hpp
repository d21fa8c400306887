#pragma once

// JSON form of FittedModel. Doubles are written with round-trip precision, so
// a save/load cycle reproduces decision values bit for bit.

#include <fstream>
#include <string>

#include "json.hpp"
#include "pfcvm/model.hpp"

namespace pfcvm {

using json = nlohmann::json;

namespace detail {

inline json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Vector vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline json indices_to_json(const IndexList& idx) { return json(std::vector<long long>(idx.begin(), idx.end())); }

inline IndexList indices_from_json(const json& j) {
  const auto v = j.get<std::vector<long long>>();
  return IndexList(v.begin(), v.end());
}

/// Row-major array of rows.
inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

inline Matrix matrix_from_json(const json& j, Index cols) {
  Matrix m(static_cast<Index>(j.size()), cols);
  for (Index i = 0; i < m.rows(); ++i) {
    const Vector r = vector_from_json(j.at(static_cast<std::size_t>(i)));
    if (r.size() != cols) throw ParseError("model JSON: matrix row " + std::to_string(i + 1) + " has wrong width");
    m.row(i) = r.transpose();
  }
  return m;
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "rbf") return KernelKind::rbf;
  if (s == "poly") return KernelKind::polynomial;
  if (s == "linear") return KernelKind::linear;
  throw ParseError("model JSON: unknown kernel kind '" + s + "'");
}

}  // namespace detail

inline json to_json(const FittedModel& m) {
  json j;
  j["format"] = "pfcvm-model";
  j["version"] = 1;
  j["kernel"] = {{"kind", to_string(m.kind)}, {"order", m.order}};
  j["input_dim"] = m.input_dim;
  j["features"] = {{"indices", detail::indices_to_json(m.feature_indices)}, {"theta", detail::vector_to_json(m.theta)},
                   {"theta_variance", detail::vector_to_json(m.theta_variance)}};
  j["relevance_vectors"] = {{"indices", detail::indices_to_json(m.relevance_indices)},
                            {"rows", detail::matrix_to_json(m.relevance_vectors)},
                            {"labels", detail::vector_to_json(m.relevance_labels)},
                            {"weights", detail::vector_to_json(m.weights)}};
  j["bias"] = m.bias;
  j["sigma_w"] = detail::matrix_to_json(m.sigma_w);
  j["hyperparameters"] = {{"alpha", detail::vector_to_json(m.alpha)}, {"beta", detail::vector_to_json(m.beta)}};
  j["training"] = {{"iterations", m.iterations}, {"final_log_evidence", m.final_log_evidence}, {"converged", m.converged}};
  return j;
}

inline FittedModel model_from_json(const json& j) {
  try {
    if (j.value("format", "") != "pfcvm-model") throw ParseError("model JSON: missing format tag 'pfcvm-model'");
    FittedModel m;
    m.kind = detail::kernel_kind_from_string(j.at("kernel").at("kind").get<std::string>());
    m.order = j.at("kernel").at("order").get<int>();
    m.input_dim = j.at("input_dim").get<Index>();
    m.feature_indices = detail::indices_from_json(j.at("features").at("indices"));
    m.theta = detail::vector_from_json(j.at("features").at("theta"));
    m.theta_variance = detail::vector_from_json(j.at("features").at("theta_variance"));
    const auto& rv = j.at("relevance_vectors");
    m.relevance_indices = detail::indices_from_json(rv.at("indices"));
    m.relevance_vectors = detail::matrix_from_json(rv.at("rows"), static_cast<Index>(m.feature_indices.size()));
    m.relevance_labels = detail::vector_from_json(rv.at("labels"));
    m.weights = detail::vector_from_json(rv.at("weights"));
    m.bias = j.at("bias").get<double>();
    m.sigma_w = detail::matrix_from_json(j.at("sigma_w"), m.weights.size() + 1);
    m.alpha = detail::vector_from_json(j.at("hyperparameters").at("alpha"));
    m.beta = detail::vector_from_json(j.at("hyperparameters").at("beta"));
    m.iterations = j.at("training").at("iterations").get<int>();
    m.final_log_evidence = j.at("training").at("final_log_evidence").get<double>();
    m.converged = j.at("training").at("converged").get<bool>();

    const auto r = static_cast<Index>(m.relevance_indices.size());
    if (m.relevance_vectors.rows() != r || m.relevance_labels.size() != r || m.weights.size() != r ||
        m.sigma_w.rows() != r + 1 || m.theta.size() != static_cast<Index>(m.feature_indices.size()) ||
        m.theta_variance.size() != m.theta.size())
      throw ParseError("model JSON: inconsistent array sizes");
    for (Index k : m.feature_indices)
      if (k < 0 || k >= m.input_dim) throw ParseError("model JSON: feature index outside input_dim");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
}

inline void save_model(const FittedModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << to_json(m).dump(2) << '\n';
}

inline FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace pfcvm
