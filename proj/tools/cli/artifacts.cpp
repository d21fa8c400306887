#include "artifacts.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace pfcvm::cli {

namespace fs = std::filesystem;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Dataset load_dataset(const DataSource& src) {
  if (src.path.empty()) throw UsageError("no data file given (--data)");
  std::string format = src.format;
  if (format == "auto") {
    format = ends_with(src.path, ".svm") || ends_with(src.path, ".svmlight") || ends_with(src.path, ".libsvm")
                 ? "svmlight"
                 : "csv";
  }
  Dataset d;
  if (format == "csv") {
    CsvOptions opt;
    opt.has_header = src.header;
    opt.label_column = src.label_column;
    d = load_dense_csv(src.path, opt);
  } else if (format == "svmlight") {
    d = load_sparse_svmlight(src.path, src.num_features);
  } else {
    throw UsageError("unknown data format '" + src.format + "' (expected auto, csv or svmlight)");
  }
  validate(d);
  return d;
}

void check_preprocessing_mode(const std::string& mode) {
  if (mode != "none" && mode != "columns" && mode != "rows-columns")
    throw UsageError("unknown standardization '" + mode + "' (expected none, columns or rows-columns)");
}

Matrix Preprocessing::apply(const Matrix& X) const {
  if (mode == "none") return X;
  if (mode == "columns") return stats.apply(X);
  return stats.apply(standardize_rows(X));
}

std::pair<Preprocessing, Dataset> fit_preprocessing(const std::string& mode, const Dataset& train) {
  check_preprocessing_mode(mode);
  Preprocessing p;
  p.mode = mode;
  Dataset out = train;
  if (mode == "none") return {p, out};
  const Matrix base = mode == "columns" ? train.X : standardize_rows(train.X);
  p.stats = column_stats(base);
  out.X = p.stats.apply(base);
  return {p, out};
}

json preprocessing_to_json(const Preprocessing& p) {
  json j;
  j["mode"] = p.mode;
  if (p.mode != "none") {
    j["mean"] = std::vector<double>(p.stats.mean.data(), p.stats.mean.data() + p.stats.mean.size());
    j["scale"] = std::vector<double>(p.stats.scale.data(), p.stats.scale.data() + p.stats.scale.size());
  }
  return j;
}

Preprocessing preprocessing_from_json(const json& j, Index input_dim) {
  Preprocessing p;
  try {
    p.mode = j.at("mode").get<std::string>();
    check_preprocessing_mode(p.mode);
    if (p.mode != "none") {
      const auto mean = j.at("mean").get<std::vector<double>>();
      const auto scale = j.at("scale").get<std::vector<double>>();
      if (static_cast<Index>(mean.size()) != input_dim || static_cast<Index>(scale.size()) != input_dim)
        throw ParseError("model preprocessing: statistics do not match input_dim");
      p.stats.mean = Eigen::Map<const Vector>(mean.data(), input_dim);
      p.stats.scale = Eigen::Map<const Vector>(scale.data(), input_dim);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("model preprocessing: ") + e.what());
  } catch (const UsageError& e) {
    throw ParseError(std::string("model preprocessing: ") + e.what());
  }
  return p;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw NumericError("cannot format number");
  return std::string(buf, ptr);
}

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw Error("SHA-256 computation failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << bytes;
  if (!out) throw ParseError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

void write_dataset_csv(const fs::path& path, const Dataset& d) {
  std::string s;
  for (Index k = 0; k < d.dims(); ++k) {
    s += k < static_cast<Index>(d.feature_names.size()) ? d.feature_names[static_cast<std::size_t>(k)]
                                                        : "x" + std::to_string(k + 1);
    s += ',';
  }
  s += "label\n";
  for (Index i = 0; i < d.size(); ++i) {
    for (Index k = 0; k < d.dims(); ++k) {
      s += format_double(d.X(i, k));
      s += ',';
    }
    s += d.y(i) > 0.0 ? "1\n" : "-1\n";
  }
  write_file(path, s);
}

std::string sha256_without_last_column(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line, kept;
  while (std::getline(in, line)) {
    const auto cut = line.rfind(',');
    kept += line.substr(0, cut == std::string::npos ? 0 : cut);
    kept += '\n';
  }
  return sha256_hex(kept);
}

Manifest::Manifest(std::string command, json config, std::uint64_t seed)
    : command_(std::move(command)), config_(std::move(config)), seed_(seed) {}

void Manifest::add_input(const std::string& path) {
  inputs_.push_back({{"path", path}, {"sha256", sha256_file(path)}});
}

void Manifest::add_output(const fs::path& path) {
  outputs_.push_back({{"path", path.filename().string()}, {"sha256", sha256_file(path)}});
}

void Manifest::add_timed_output(const fs::path& path) {
  outputs_.push_back({{"path", path.filename().string()},
                      {"sha256_without_timing", sha256_without_last_column(path)}});
}

json Manifest::to_json() const {
  json j;
  j["tool"] = "pfcvm";
  j["command"] = command_;
  j["seed"] = seed_;
  j["config"] = config_;
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  return j;
}

fs::path Manifest::write(const fs::path& out_dir) const {
  const fs::path path = out_dir / (command_ + ".manifest.json");
  write_json(path, to_json());
  return path;
}

}  // namespace pfcvm::cli
