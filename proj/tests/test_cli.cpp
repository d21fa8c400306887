#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli/app.hpp"
#include "cli/artifacts.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace pfcvm;
using pfcvm::cli::read_file;

namespace {

struct Invocation {
  int code = 0;
  std::string out;
  std::string err;
};

Invocation run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Invocation r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pfcvm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Writes `d` as CSV (label last, header) and returns the path.
  std::string write_data(const std::string& name, const Dataset& d) const {
    cli::write_dataset_csv(path(name), d);
    return path(name);
  }

  json read_json(const std::string& p) const { return json::parse(read_file(p)); }

  fs::path dir_;
};

int csv_rows(const std::string& text) { return static_cast<int>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_F(Cli, SynthWaveformShapeAndDeterminism) {
  auto a = run({"synth", "waveform", "--n-per-class", "200", "--seed", "7", "--out", path("a")});
  auto b = run({"synth", "waveform", "--n-per-class", "200", "--seed", "7", "--out", path("b")});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0);
  CsvOptions opt;
  opt.has_header = true;
  const Dataset d = load_dense_csv(path("a/data.csv"), opt);
  EXPECT_EQ(d.size(), 400);
  EXPECT_EQ(d.dims(), 40);
  EXPECT_EQ(cli::sha256_file(path("a/data.csv")), cli::sha256_file(path("b/data.csv")));
  EXPECT_EQ(read_file(path("a/synth.manifest.json")), read_file(path("b/synth.manifest.json")));
}

TEST_F(Cli, SynthSparseInformativeWritesTruth) {
  auto r = run({"synth", "sparse-informative", "--n", "30", "--m", "50", "--k", "4", "--seed", "3", "--out", path("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json truth = read_json(path("s/informative.json"));
  EXPECT_EQ(truth["informative_features"].size(), 4u);
  for (const auto& k : truth["informative_features"]) {
    EXPECT_GE(k.get<int>(), 1);
    EXPECT_LE(k.get<int>(), 50);
  }
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"synth", "unknown", "--out", path("x")}).code, cli::kExitUsage);
  EXPECT_EQ(run({"fit", "--out", path("x")}).code, cli::kExitUsage);  // --data missing
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"fit", "--data", path("none.csv"), "--out", path("x")}).code, cli::kExitUsage);
  const std::string data = write_data("d.csv", testing_util::toy_dataset(10, 2, 1));
  EXPECT_EQ(run({"fit", "--data", data, "--header", "--kernel", "poly:x", "--out", path("x")}).code, cli::kExitUsage);
  EXPECT_EQ(run({"fit", "--data", data, "--header", "--drop-e", "maybe", "--out", path("x")}).code, cli::kExitUsage);
  EXPECT_EQ(run({"fit", "--data", data, "--header", "--lambda", "-1", "--out", path("x")}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST_F(Cli, ParseKernel) {
  TrainConfig c;
  cli::parse_kernel("poly:3", c);
  EXPECT_EQ(c.kernel, KernelKind::polynomial);
  EXPECT_EQ(c.poly_order, 3);
  cli::parse_kernel("linear", c);
  EXPECT_EQ(c.kernel, KernelKind::linear);
  EXPECT_THROW(cli::parse_kernel("poly:0", c), cli::UsageError);
  EXPECT_THROW(cli::parse_kernel("poly:2.5", c), cli::UsageError);
}

TEST_F(Cli, FitEvalPredictOnSeparableToy) {
  const std::string data = write_data("toy.csv", testing_util::separable_toy(20, 2.0, 1));
  auto fit = run({"fit", "--data", data, "--header", "--out", path("m")});
  ASSERT_EQ(fit.code, 0) << fit.err;
  const json model = read_json(path("m/model.json"));
  EXPECT_GE(model["relevance_vectors"]["weights"].size(), 1u);
  EXPECT_EQ(model["preprocessing"]["mode"], "columns");

  const std::string trace = read_file(path("m/trace.csv"));
  std::istringstream in(trace);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iteration,active_samples,active_features,log_evidence,seconds");
  long prev_s = 1 << 30, prev_f = 1 << 30;
  while (std::getline(in, line)) {
    long it, s, f;
    char c;
    std::istringstream row(line);
    row >> it >> c >> s >> c >> f;
    EXPECT_LE(s, prev_s);
    EXPECT_LE(f, prev_f);
    prev_s = s, prev_f = f;
  }

  auto eval = run({"eval", "--model", path("m/model.json"), "--data", data, "--header", "--out", path("e")});
  ASSERT_EQ(eval.code, 0) << eval.err;
  const std::string report_text = read_file(path("e/report.json"));
  const json report = json::parse(report_text);
  EXPECT_EQ(report["error_rate"], 0.0);
  EXPECT_EQ(report.dump(2) + "\n", report_text);  // lossless round trip
  EXPECT_TRUE(fs::exists(path("e/report.txt")));

  Dataset flipped = testing_util::separable_toy(20, 2.0, 1);
  flipped.y = -flipped.y;
  const std::string fdata = write_data("flipped.csv", flipped);
  ASSERT_EQ(run({"eval", "--model", path("m/model.json"), "--data", fdata, "--header", "--out", path("f")}).code, 0);
  EXPECT_EQ(read_json(path("f/report.json"))["error_rate"], 1.0 - report["error_rate"].get<double>());

  ASSERT_EQ(run({"predict", "--model", path("m/model.json"), "--data", data, "--header", "--out", path("p")}).code, 0);
  EXPECT_EQ(csv_rows(read_file(path("p/predictions.csv"))), 21);

  for (auto f : {"m/fit.manifest.json", "e/eval.manifest.json", "p/predict.manifest.json"})
    EXPECT_TRUE(fs::exists(path(f))) << f;
}

TEST_F(Cli, SingleClassExitsTwo) {
  Dataset d = testing_util::toy_dataset(10, 2, 1);
  d.y.setOnes();
  auto r = run({"fit", "--data", write_data("one.csv", d), "--header", "--standardize", "none", "--out", path("m")});
  EXPECT_EQ(r.code, cli::kExitModel);
  EXPECT_NE(r.err.find("both classes required"), std::string::npos) << r.err;
}

TEST_F(Cli, EvalDimensionMismatch) {
  const std::string data = write_data("toy.csv", testing_util::toy_dataset(12, 2, 1));
  ASSERT_EQ(run({"fit", "--data", data, "--header", "--out", path("m")}).code, 0);
  const std::string wide = write_data("wide.csv", testing_util::toy_dataset(12, 3, 1));
  auto r = run({"eval", "--model", path("m/model.json"), "--data", wide, "--header", "--out", path("e")});
  EXPECT_EQ(r.code, cli::kExitModel);
  EXPECT_NE(r.err.find("features"), std::string::npos);
}

TEST_F(Cli, LoocvFoldsOccurrencesAndDeterminism) {
  Dataset d = testing_util::toy_dataset(10, 3, 2, 1.5);
  d.X.col(2).setZero();  // never informative, and constant
  const std::string data = write_data("toy.csv", d);
  ASSERT_EQ(run({"loocv", "--data", data, "--header", "--seed", "5", "--out", path("a")}).code, 0);
  ASSERT_EQ(run({"loocv", "--data", data, "--header", "--seed", "5", "--jobs", "3", "--out", path("b")}).code, 0);
  const json report = read_json(path("a/loocv.json"));
  EXPECT_EQ(report["folds"], 10);
  EXPECT_EQ(report["per_fold"].size() + report["failed_folds"].size(), 10u);
  EXPECT_EQ(read_file(path("a/loocv.json")), read_file(path("b/loocv.json")));
  EXPECT_EQ(read_file(path("a/loocv.manifest.json")), read_file(path("b/loocv.manifest.json")));
  EXPECT_EQ(csv_rows(read_file(path("a/occurrences.csv"))), 4);
  // Occurrence counts equal the per-fold selections.
  std::vector<int> counts(3, 0);
  for (const auto& f : report["per_fold"])
    for (const auto& k : f["features"]) ++counts[k.get<int>() - 1];
  for (int k = 0; k < 3; ++k) EXPECT_EQ(report["cumulative_occurrences"][k], counts[k]);
}

TEST_F(Cli, StabilityOverIdenticalResamples) {
  // per-class = whole class: every repeat trains on the same rows.
  const std::string data = write_data("toy.csv", testing_util::toy_dataset(16, 4, 3, 1.5));
  auto r = run({"stability", "--data", data, "--header", "--repeats", "3", "--per-class", "8", "--out", path("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = read_json(path("s/stability.json"));
  EXPECT_EQ(report["jaccard"], 1.0);
  if (!report["pearson"].is_null()) EXPECT_NEAR(report["pearson"].get<double>(), 1.0, 1e-12);
}

TEST_F(Cli, StabilityWaveformFrequencies) {
  auto r = run({"stability", "--synth", "waveform", "--pool-per-class", "40", "--per-class", "25", "--repeats", "3",
                "--seed", "11", "--jobs", "2", "--out", path("w")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = read_json(path("w/stability.json"));
  ASSERT_EQ(report["frequencies"].size(), 40u);
  EXPECT_NEAR(report["frequency_sum"].get<double>(), report["mean_subset_size"].get<double>(), 1e-12);
  EXPECT_EQ(csv_rows(read_file(path("w/frequency.csv"))), 41);
  EXPECT_FALSE(report["mean_accuracy"].is_null());
  EXPECT_EQ(run({"stability", "--synth", "waveform", "--repeats", "1", "--out", path("x")}).code, cli::kExitUsage);
}

TEST_F(Cli, DiagKlBoundAndGrid) {
  auto zero = run({"diag", "--theta", "0,0", "--beta", "1,2", "--beta0", "1,2", "--out", path("z")});
  ASSERT_EQ(zero.code, 0) << zero.err;
  EXPECT_EQ(read_json(path("z/diag.json"))["kl"], 0.0);

  auto bound = run({"diag", "--kl", "0.5", "--loss", "0.1", "--n", "100", "--r", "2", "--g", "1", "--c", "1", "--delta",
                    "0.1353352832366127", "--grid", "7", "--out", path("b")});
  ASSERT_EQ(bound.code, 0) << bound.err;
  const json report = read_json(path("b/diag.json"));
  EXPECT_NEAR(report["bound"]["value"].get<double>(), 0.6301, 1e-4);
  EXPECT_EQ(csv_rows(read_file(path("b/kl_grid.csv"))), 8);
  EXPECT_TRUE(fs::exists(path("b/diag.manifest.json")));
}

TEST_F(Cli, DiagFromModel) {
  const std::string data = write_data("toy.csv", testing_util::toy_dataset(20, 2, 4, 1.5));
  ASSERT_EQ(run({"fit", "--data", data, "--header", "--out", path("m")}).code, 0);
  auto r = run({"diag", "--model", path("m/model.json"), "--data", data, "--header", "--out", path("d")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = read_json(path("d/diag.json"));
  EXPECT_GE(report["kl"].get<double>(), -1e-10);
  EXPECT_EQ(report["bound"]["n"], 20.0);
}
