#pragma once

// File-level helpers shared by the CLI commands: input loading, preprocessing
// that travels with a model, deterministic number formatting, SHA-256
// fingerprints and the run manifest.

#include <filesystem>
#include <string>
#include <vector>

#include "pfcvm/pfcvm.hpp"

namespace pfcvm::cli {

/// Bad flags or arguments; maps to exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct DataSource {
  std::string path;
  std::string format = "auto";  ///< auto | csv | svmlight
  bool header = false;
  int label_column = -1;        ///< csv only, -1 = last
  Index num_features = 0;       ///< svmlight only, 0 = infer
};

Dataset load_dataset(const DataSource& src);

/// Standardization learned on the training set and replayed on new data.
struct Preprocessing {
  std::string mode = "columns";  ///< none | columns | rows-columns
  ColumnStats stats;

  Matrix apply(const Matrix& X) const;
};

void check_preprocessing_mode(const std::string& mode);

/// Fits the preprocessing on `train` and returns it with the transformed set.
std::pair<Preprocessing, Dataset> fit_preprocessing(const std::string& mode, const Dataset& train);

json preprocessing_to_json(const Preprocessing& p);
Preprocessing preprocessing_from_json(const json& j, Index input_dim);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);
void write_json(const std::filesystem::path& path, const json& j);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& d);

/// Records what a command read and wrote. Timestamps are deliberately absent
/// so that identical invocations produce identical manifests.
class Manifest {
 public:
  Manifest(std::string command, json config, std::uint64_t seed);

  void add_input(const std::string& path);
  void add_output(const std::filesystem::path& path);
  /// Output whose last CSV column holds wall-clock timings; hashed without it.
  void add_timed_output(const std::filesystem::path& path);

  json to_json() const;
  /// Writes <out_dir>/<command>.manifest.json.
  std::filesystem::path write(const std::filesystem::path& out_dir) const;

 private:
  std::string command_;
  json config_;
  std::uint64_t seed_;
  json inputs_ = json::array();
  json outputs_ = json::array();
};

/// SHA-256 of a CSV with its last column removed from every line.
std::string sha256_without_last_column(const std::filesystem::path& path);

}  // namespace pfcvm::cli
