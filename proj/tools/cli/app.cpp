#include "app.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "artifacts.hpp"

namespace pfcvm::cli {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto log = spdlog::stderr_color_mt("pfcvm");
    log->set_pattern("[%l] %v");
    log->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("PFCVM_LOG")) log->set_level(spdlog::level::from_str(env));
  });
  return spdlog::get("pfcvm");
}

struct TrainOptions {
  std::string kernel = "rbf";
  std::string hyper_rule = "mackay";
  double lambda = 5.0;
  double prune_max = 1e6;
  double tol = 1e-3;
  int max_iters = 500;
  int inner_iters = 25;
  std::string drop_e = "true";
  double init_beta = 1.0;
  std::string standardize = "columns";

  TrainConfig resolve(std::uint64_t seed) const {
    TrainConfig c;
    parse_kernel(kernel, c);
    if (hyper_rule == "mackay")
      c.hyper_rule = HyperRule::mackay;
    else if (hyper_rule == "em")
      c.hyper_rule = HyperRule::em;
    else
      throw UsageError("--hyper-rule must be mackay or em, got '" + hyper_rule + "'");
    if (drop_e != "true" && drop_e != "false") throw UsageError("--drop-e must be true or false");
    c.drop_E = drop_e == "true";
    c.lambda = lambda;
    c.prune_threshold_max = prune_max;
    c.evidence_tol = tol;
    c.max_iterations = max_iters;
    c.inner_mode_iterations = inner_iters;
    c.init_beta = init_beta;
    c.rng_seed = seed;
    try {
      c.validate();
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    check_preprocessing_mode(standardize);
    return c;
  }
};

void add_train_options(CLI::App* cmd, TrainOptions& t) {
  cmd->add_option("--kernel", t.kernel, "rbf, linear or poly:P")->capture_default_str();
  cmd->add_option("--hyper-rule", t.hyper_rule, "mackay or em")->capture_default_str();
  cmd->add_option("--lambda", t.lambda, "sigmoid scale of the nonnegativity barrier")->capture_default_str();
  cmd->add_option("--prune-max", t.prune_max, "prune when a precision exceeds this")->capture_default_str();
  cmd->add_option("--tol", t.tol, "stop when |delta log evidence| falls below this")->capture_default_str();
  cmd->add_option("--max-iters", t.max_iters, "outer iteration limit")->capture_default_str();
  cmd->add_option("--inner-iters", t.inner_iters, "Newton steps per mode search")->capture_default_str();
  cmd->add_option("--drop-e", t.drop_e, "drop E from the feature Hessian (true|false)")->capture_default_str();
  cmd->add_option("--init-beta", t.init_beta, "initial feature precision")->capture_default_str();
  cmd->add_option("--standardize", t.standardize, "none, columns or rows-columns")->capture_default_str();
}

void add_data_options(CLI::App* cmd, DataSource& src, bool required = true) {
  auto* opt = cmd->add_option("--data", src.path, "CSV (label in last column) or svmlight file");
  if (required) opt->required();
  cmd->add_option("--format", src.format, "auto, csv or svmlight")->capture_default_str();
  cmd->add_flag("--header", src.header, "CSV has a header line");
  cmd->add_option("--label-column", src.label_column, "CSV label column, negative counts from the end")
      ->capture_default_str();
  cmd->add_option("--num-features", src.num_features, "svmlight feature count (0 = infer)");
}

json data_source_json(const DataSource& src) {
  return {{"path", src.path},
          {"format", src.format},
          {"header", src.header},
          {"label_column", src.label_column},
          {"num_features", src.num_features}};
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

/// Runs fn(0..n-1) on up to `jobs` threads. fn must not throw.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(workers, n); ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

json model_file_json(const FittedModel& model, const Preprocessing& pre) {
  json j = to_json(model);
  j["preprocessing"] = preprocessing_to_json(pre);
  return j;
}

std::pair<FittedModel, Preprocessing> load_model_file(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  FittedModel m = model_from_json(j);
  Preprocessing pre;
  pre.mode = "none";
  if (j.contains("preprocessing")) pre = preprocessing_from_json(j.at("preprocessing"), m.input_dim);
  return {std::move(m), std::move(pre)};
}

std::string trace_csv(const TrainTrace& trace) {
  std::string s = "iteration,active_samples,active_features,log_evidence,seconds\n";
  for (const auto& r : trace.rows)
    s += std::to_string(r.iteration) + ',' + std::to_string(r.active_samples) + ',' +
         std::to_string(r.active_features) + ',' + format_double(r.log_evidence) + ',' + format_double(r.seconds) +
         '\n';
  return s;
}

/// 1-based feature labels of a model's selected columns.
json feature_labels(const IndexList& columns) {
  json a = json::array();
  for (Index k : columns) a.push_back(k + 1);
  return a;
}

struct FitOutcome {
  FittedModel model;
  TrainTrace trace;
  Preprocessing pre;
};

FitOutcome train_one(const Dataset& raw, const TrainConfig& config, const std::string& standardize) {
  auto [pre, data] = fit_preprocessing(standardize, raw);
  FitResult r = fit(data, config);
  return {std::move(r.model), std::move(r.trace), std::move(pre)};
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string kind;
  Index n_per_class = 200;
  Index noise_dims = 19;
  Index n = 40;
  Index m = 500;
  Index k = 5;
  double effect = 1.5;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  json config;
  Dataset d;
  json extra;
  if (a.kind == "waveform") {
    if (a.n_per_class < 1 || a.noise_dims < 0) throw UsageError("waveform needs --n-per-class >= 1, --noise-dims >= 0");
    d = gen_waveform(a.n_per_class, a.noise_dims, a.seed);
    config = {{"kind", a.kind}, {"n_per_class", a.n_per_class}, {"noise_dims", a.noise_dims}};
  } else if (a.kind == "sparse-informative") {
    if (a.n < 2 || a.m < 1 || a.k < 0 || a.k > a.m) throw UsageError("sparse-informative needs n >= 2, 0 <= k <= m");
    SparseInformative s = gen_sparse_informative(a.n, a.m, a.k, a.effect, a.seed);
    d = std::move(s.data);
    config = {{"kind", a.kind}, {"n", a.n}, {"m", a.m}, {"k", a.k}, {"effect", a.effect}};
    extra = {{"informative_features", feature_labels(s.informative)}};
  } else {
    throw UsageError("unknown synth kind '" + a.kind + "' (expected waveform or sparse-informative)");
  }
  const fs::path dir(a.out);
  Manifest manifest("synth", config, a.seed);
  write_dataset_csv(dir / "data.csv", d);
  manifest.add_output(dir / "data.csv");
  if (!extra.is_null()) {
    write_json(dir / "informative.json", extra);
    manifest.add_output(dir / "informative.json");
  }
  manifest.write(dir);
  out << "wrote " << d.size() << " rows x " << d.dims() << " features to " << (dir / "data.csv").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  DataSource data;
  TrainOptions train;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  TrainConfig config = a.train.resolve(a.seed);
  const Dataset raw = load_dataset(a.data);
  auto log = logger();
  config.on_iteration = [&](const TraceRow& r) {
    log->info("iteration {}: {} samples, {} features, log evidence {}", r.iteration, r.active_samples,
              r.active_features, r.log_evidence);
  };
  const FitOutcome fitted = train_one(raw, config, a.train.standardize);
  const fs::path dir(a.out);
  json cfg = config_to_json(config);
  cfg["standardize"] = a.train.standardize;
  cfg["data"] = data_source_json(a.data);
  Manifest manifest("fit", cfg, a.seed);
  manifest.add_input(a.data.path);
  write_json(dir / "model.json", model_file_json(fitted.model, fitted.pre));
  manifest.add_output(dir / "model.json");
  write_file(dir / "trace.csv", trace_csv(fitted.trace));
  manifest.add_timed_output(dir / "trace.csv");
  manifest.write(dir);

  const auto& m = fitted.model;
  out << "iterations         " << m.iterations << (m.converged ? " (converged)" : " (iteration limit)") << '\n';
  out << "relevance vectors  " << m.weights.size() << " of " << raw.size() << '\n';
  out << "selected features  " << m.feature_indices.size() << " of " << raw.dims() << '\n';
  out << "final log evidence " << fixed(m.final_log_evidence) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ModelDataArgs {
  std::string model;
  DataSource data;
  std::string out;
};

int cmd_predict(const ModelDataArgs& a, std::ostream& out) {
  const auto [model, pre] = load_model_file(a.model);
  const Dataset raw = load_dataset(a.data);
  if (raw.dims() != model.input_dim)
    throw DimensionError("data has " + std::to_string(raw.dims()) + " features, model expects " +
                         std::to_string(model.input_dim));
  const Matrix X = pre.apply(raw.X);
  const Vector f = decision_values(model, X);
  const Vector p = predict_proba(model, X);
  std::string csv = "decision_value,probability,label\n";
  for (Index i = 0; i < f.size(); ++i)
    csv += format_double(f(i)) + ',' + format_double(p(i)) + ',' + (label_of(f(i)) > 0 ? "1" : "-1") + '\n';
  const fs::path dir(a.out);
  Manifest manifest("predict", {{"model", a.model}, {"data", data_source_json(a.data)}}, 0);
  manifest.add_input(a.model);
  manifest.add_input(a.data.path);
  write_file(dir / "predictions.csv", csv);
  manifest.add_output(dir / "predictions.csv");
  manifest.write(dir);
  out << "wrote " << f.size() << " predictions to " << (dir / "predictions.csv").string() << '\n';
  return kExitOk;
}

json eval_report(const Vector& decision, const Vector& proba, const Vector& truth) {
  Vector labels(decision.size());
  for (Index i = 0; i < decision.size(); ++i) labels(i) = label_of(decision(i));
  json r;
  r["n"] = truth.size();
  r["error_rate"] = error_rate(labels, truth);
  try {
    r["auc"] = auc(proba, truth);
  } catch (const UndefinedMetricError& e) {
    r["auc"] = nullptr;
    r["auc_note"] = e.what();
  }
  try {
    const Kappa k = cohen_kappa(labels, truth);
    r["kappa"] = k.kappa;
    r["kappa_stderr"] = k.stderr_;
    r["kappa_ci95"] = {k.lower95(), k.upper95()};
  } catch (const UndefinedMetricError& e) {
    r["kappa"] = nullptr;
    r["kappa_note"] = e.what();
  }
  return r;
}

std::string eval_text(const json& r) {
  const auto num = [](const json& v) { return v.is_null() ? std::string("undefined") : fixed(v.get<double>()); };
  std::ostringstream s;
  s << "samples       " << r.at("n").get<long long>() << '\n';
  s << "error rate    " << num(r.at("error_rate")) << '\n';
  s << "AUC           " << num(r.at("auc")) << '\n';
  s << "kappa         " << num(r.at("kappa"));
  if (!r.at("kappa").is_null()) s << " +/- " << fixed(1.96 * r.at("kappa_stderr").get<double>()) << " (95%)";
  s << '\n';
  return s.str();
}

int cmd_eval(const ModelDataArgs& a, std::ostream& out) {
  const auto [model, pre] = load_model_file(a.model);
  const Dataset raw = load_dataset(a.data);
  if (raw.dims() != model.input_dim)
    throw DimensionError("data has " + std::to_string(raw.dims()) + " features, model expects " +
                         std::to_string(model.input_dim));
  const Matrix X = pre.apply(raw.X);
  const json report = eval_report(decision_values(model, X), predict_proba(model, X), raw.y);
  const std::string text = eval_text(report);
  const fs::path dir(a.out);
  Manifest manifest("eval", {{"model", a.model}, {"data", data_source_json(a.data)}}, 0);
  manifest.add_input(a.model);
  manifest.add_input(a.data.path);
  write_json(dir / "report.json", report);
  manifest.add_output(dir / "report.json");
  write_file(dir / "report.txt", text);
  manifest.add_output(dir / "report.txt");
  manifest.write(dir);
  out << text;
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct LoocvArgs {
  DataSource data;
  TrainOptions train;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
};

struct FoldResult {
  bool ok = false;
  std::string error;
  double decision = 0.0;
  double probability = 0.5;
  IndexList features;
};

int cmd_loocv(const LoocvArgs& a, std::ostream& out) {
  const TrainConfig base = a.train.resolve(a.seed);
  const Dataset raw = load_dataset(a.data);
  const SplitPlan plan = loocv_splits(raw.size());
  std::vector<FoldResult> folds(plan.splits.size());
  auto log = logger();

  parallel_for(folds.size(), a.jobs, [&](std::size_t i) {
    const Split& s = plan.splits[i];
    TrainConfig config = base;
    config.rng_seed = a.seed + i;
    FoldResult& r = folds[i];
    try {
      FitOutcome fitted = train_one(subset(raw, s.train), config, a.train.standardize);
      const Matrix x = fitted.pre.apply(select_rows(raw.X, s.test));
      r.decision = decision_values(fitted.model, x)(0);
      r.probability = predict_proba(fitted.model, x)(0);
      r.features = fitted.model.feature_indices;
      r.ok = true;
    } catch (const Error& e) {
      r.error = e.what();
      log->warn("fold {} failed: {}", i + 1, e.what());
    }
  });

  std::vector<Index> occurrences(static_cast<std::size_t>(raw.dims()), 0);
  json fold_rows = json::array();
  json failed = json::array();
  std::vector<double> dec, prob, truth;
  double selected = 0.0;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    const Index test = plan.splits[i].test.front();
    const FoldResult& r = folds[i];
    if (!r.ok) {
      failed.push_back({{"fold", i + 1}, {"error", r.error}});
      continue;
    }
    for (Index k : r.features) ++occurrences[static_cast<std::size_t>(k)];
    selected += static_cast<double>(r.features.size());
    dec.push_back(r.decision);
    prob.push_back(r.probability);
    truth.push_back(raw.y(test));
    fold_rows.push_back({{"fold", i + 1},
                         {"test_sample", test + 1},
                         {"label", raw.y(test)},
                         {"decision_value", r.decision},
                         {"probability", r.probability},
                         {"features", feature_labels(r.features)}});
  }

  json report;
  report["folds"] = folds.size();
  report["succeeded"] = dec.size();
  report["failed_folds"] = failed;
  if (!dec.empty()) {
    const auto vec = [](const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), Index(v.size())); };
    const json metrics = eval_report(vec(dec), vec(prob), vec(truth));
    report["error_rate"] = metrics["error_rate"];
    report["auc"] = metrics["auc"];
    report["mean_selected_features"] = selected / static_cast<double>(dec.size());
  } else {
    report["error_rate"] = nullptr;
    report["auc"] = nullptr;
    report["mean_selected_features"] = nullptr;
  }
  json occ = json::array();
  std::string csv = "feature,occurrences\n";
  for (std::size_t k = 0; k < occurrences.size(); ++k) {
    occ.push_back(occurrences[k]);
    csv += std::to_string(k + 1) + ',' + std::to_string(occurrences[k]) + '\n';
  }
  report["cumulative_occurrences"] = occ;
  report["per_fold"] = fold_rows;

  const fs::path dir(a.out);
  json cfg = config_to_json(base);
  cfg["standardize"] = a.train.standardize;
  cfg["data"] = data_source_json(a.data);
  Manifest manifest("loocv", cfg, a.seed);
  manifest.add_input(a.data.path);
  write_json(dir / "loocv.json", report);
  manifest.add_output(dir / "loocv.json");
  write_file(dir / "occurrences.csv", csv);
  manifest.add_output(dir / "occurrences.csv");
  manifest.write(dir);

  out << "folds              " << folds.size() << " (" << failed.size() << " failed)\n";
  if (!dec.empty()) {
    out << "error rate         " << fixed(report["error_rate"].get<double>()) << '\n';
    out << "mean features      " << fixed(report["mean_selected_features"].get<double>(), 2) << '\n';
  }
  return dec.empty() ? kExitModel : kExitOk;
}

// ---------------------------------------------------------------------------

struct StabilityArgs {
  DataSource data;
  std::string synth;
  Index pool_per_class = 400;
  Index noise_dims = 19;
  TrainOptions train;
  int repeats = 10;
  Index per_class = 200;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
};

int cmd_stability(const StabilityArgs& a, std::ostream& out) {
  if (a.repeats < 2) throw UsageError("--repeats must be at least 2");
  const TrainConfig base = a.train.resolve(a.seed);
  Dataset raw;
  json source;
  if (!a.synth.empty()) {
    if (!a.data.path.empty()) throw UsageError("give either --data or --synth, not both");
    if (a.synth != "waveform") throw UsageError("--synth supports only 'waveform'");
    raw = gen_waveform(a.pool_per_class, a.noise_dims, a.seed);
    source = {{"synth", a.synth}, {"pool_per_class", a.pool_per_class}, {"noise_dims", a.noise_dims}};
  } else {
    raw = load_dataset(a.data);
    source = data_source_json(a.data);
  }
  Index pos = 0;
  for (Index i = 0; i < raw.size(); ++i) pos += raw.y(i) > 0.0 ? 1 : 0;
  if (a.per_class < 1 || a.per_class > std::min(pos, raw.size() - pos))
    throw UsageError("--per-class " + std::to_string(a.per_class) + " exceeds the smaller class (" +
                     std::to_string(std::min(pos, raw.size() - pos)) + ")");
  const SplitPlan plan = per_class_resamples(raw, a.per_class, a.repeats, a.seed);

  struct Run {
    bool ok = false;
    std::string error;
    IndexList features;
    std::optional<double> accuracy;
  };
  std::vector<Run> runs(plan.splits.size());
  auto log = logger();
  parallel_for(runs.size(), a.jobs, [&](std::size_t r) {
    const Split& s = plan.splits[r];
    TrainConfig config = base;
    config.rng_seed = a.seed + r;
    try {
      FitOutcome fitted = train_one(subset(raw, s.train), config, a.train.standardize);
      runs[r].features = fitted.model.feature_indices;
      if (!s.test.empty()) {
        const Dataset test = subset(raw, s.test);
        const Vector pred = predict_labels(fitted.model, fitted.pre.apply(test.X));
        runs[r].accuracy = 1.0 - error_rate(pred, test.y);
      }
      runs[r].ok = true;
    } catch (const Error& e) {
      runs[r].error = e.what();
      log->warn("repeat {} failed: {}", r + 1, e.what());
    }
  });

  std::vector<IndexList> columns;
  json failed = json::array();
  json subsets = json::array();
  double acc_sum = 0.0;
  int acc_count = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (!runs[r].ok) {
      failed.push_back({{"repeat", r + 1}, {"error", runs[r].error}});
      continue;
    }
    columns.push_back(runs[r].features);
    subsets.push_back(feature_labels(runs[r].features));
    if (runs[r].accuracy) {
      acc_sum += *runs[r].accuracy;
      ++acc_count;
    }
  }
  if (columns.size() < 2) throw DegenerateModelError("fewer than two repeats succeeded; stability undefined");

  const SubsetCollection F = subsets_from_columns(columns, raw.dims());
  const Vector freq = selection_frequency(F);
  json report;
  report["repeats"] = a.repeats;
  report["succeeded"] = columns.size();
  report["failed_repeats"] = failed;
  report["per_class"] = a.per_class;
  const auto score = [&](const char* key, double (*fn)(const SubsetCollection&)) {
    try {
      report[key] = fn(F);
    } catch (const UndefinedMetricError& e) {
      report[key] = nullptr;
      report[std::string(key) + "_note"] = e.what();
    }
  };
  score("jaccard", jaccard_stability);
  score("pearson", pearson_stability);
  report["mean_accuracy"] = acc_count > 0 ? json(acc_sum / acc_count) : json(nullptr);
  double mean_size = 0.0;
  for (const auto& c : columns) mean_size += static_cast<double>(c.size());
  mean_size /= static_cast<double>(columns.size());
  report["mean_subset_size"] = mean_size;
  report["frequency_sum"] = freq.sum();
  report["frequencies"] = std::vector<double>(freq.data(), freq.data() + freq.size());
  report["subsets"] = subsets;

  std::string csv = "feature,frequency\n";
  for (Index k = 0; k < freq.size(); ++k) csv += std::to_string(k + 1) + ',' + format_double(freq(k)) + '\n';

  const fs::path dir(a.out);
  json cfg = config_to_json(base);
  cfg["standardize"] = a.train.standardize;
  cfg["source"] = source;
  cfg["repeats"] = a.repeats;
  cfg["per_class"] = a.per_class;
  Manifest manifest("stability", cfg, a.seed);
  if (a.synth.empty()) manifest.add_input(a.data.path);
  write_json(dir / "stability.json", report);
  manifest.add_output(dir / "stability.json");
  write_file(dir / "frequency.csv", csv);
  manifest.add_output(dir / "frequency.csv");
  manifest.write(dir);

  const auto num = [](const json& v) { return v.is_null() ? std::string("undefined") : fixed(v.get<double>()); };
  out << "repeats            " << columns.size() << " of " << a.repeats << '\n';
  out << "jaccard            " << num(report["jaccard"]) << '\n';
  out << "pearson            " << num(report["pearson"]) << '\n';
  out << "mean accuracy      " << num(report["mean_accuracy"]) << '\n';
  out << "mean subset size   " << fixed(mean_size, 2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DiagArgs {
  std::string model;
  DataSource data;
  std::vector<double> theta, beta, beta0;
  std::optional<double> kl;
  std::optional<double> loss;
  std::optional<double> n;
  double c = 1.0, r = 2.0, g = 1.0, delta = 0.05;
  int grid = 0;
  double grid_max = 3.0;
  double grid_beta = 0.5;
  double grid_beta0 = 0.5;
  std::string out;
};

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), Index(v.size())); }

int cmd_diag(const DiagArgs& a, std::ostream& out) {
  KLInput kl_in;
  json source;
  std::optional<FittedModel> model;
  Preprocessing pre;
  if (a.kl && (!a.model.empty() || !a.theta.empty() || !a.beta.empty()))
    throw UsageError("--kl replaces --model and --theta/--beta; give only one source");
  if (a.kl) {
    if (!(*a.kl >= 0.0)) throw UsageError("--kl must be >= 0");
    source = {{"kl", *a.kl}};
  } else if (!a.model.empty()) {
    if (!a.theta.empty() || !a.beta.empty()) throw UsageError("give either --model or --theta/--beta, not both");
    auto loaded = load_model_file(a.model);
    model = std::move(loaded.first);
    pre = std::move(loaded.second);
    kl_in.theta = model->theta;
    kl_in.beta = model->theta_variance.cwiseInverse();
    if (a.beta0.empty())
      kl_in.beta0 = model->beta;
    else if (a.beta0.size() == 1)
      kl_in.beta0 = Vector::Constant(model->theta.size(), a.beta0.front());
    else
      kl_in.beta0 = to_vector(a.beta0);
    source = {{"model", a.model}};
  } else {
    if (a.theta.size() != a.beta.size() || a.theta.size() != a.beta0.size())
      throw UsageError("--theta, --beta and --beta0 need the same number of values");
    kl_in.theta = to_vector(a.theta);
    kl_in.beta = to_vector(a.beta);
    kl_in.beta0 = to_vector(a.beta0);
    source = {{"theta", a.theta}, {"beta", a.beta}, {"beta0", a.beta0}};
  }
  const double kl = a.kl ? *a.kl : kl_feature_divergence(kl_in);

  json report;
  report["kl"] = kl;
  report["features"] = a.kl ? json(nullptr) : json(kl_in.theta.size());

  BoundInput b;
  b.kl = kl;
  b.c = a.c;
  b.r = a.r;
  b.g = a.g;
  b.delta = a.delta;
  bool have_bound = false;
  if (!a.data.path.empty()) {
    if (!model) throw UsageError("--data needs --model to compute the empirical loss");
    const Dataset raw = load_dataset(a.data);
    if (raw.dims() != model->input_dim) throw DimensionError("data does not match the model's feature count");
    b.empirical_loss = error_rate(predict_labels(*model, pre.apply(raw.X)), raw.y);
    b.n = static_cast<double>(raw.size());
    have_bound = true;
  }
  if (a.n) {
    b.n = *a.n;
    have_bound = true;
  }
  if (a.loss) b.empirical_loss = *a.loss;
  if (have_bound) {
    report["bound"] = {{"value", generalization_bound(b)},
                       {"empirical_loss", b.empirical_loss},
                       {"n", b.n},
                       {"c", b.c},
                       {"r", b.r},
                       {"g", b.g},
                       {"delta", b.delta}};
  } else {
    report["bound"] = nullptr;
  }

  const fs::path dir(a.out);
  json cfg = {{"source", source}, {"c", a.c}, {"r", a.r}, {"g", a.g}, {"delta", a.delta}, {"grid", a.grid}};
  Manifest manifest("diag", cfg, 0);
  if (!a.model.empty()) manifest.add_input(a.model);
  if (!a.data.path.empty()) manifest.add_input(a.data.path);

  if (a.grid > 0) {
    if (a.grid < 2 || !(a.grid_max > 0.0)) throw UsageError("--grid needs at least 2 points and --grid-max > 0");
    std::string csv = "theta,kl\n";
    json curve = json::array();
    for (int i = 0; i < a.grid; ++i) {
      const double th = a.grid_max * i / (a.grid - 1);
      const double v = kl_truncated_feature(th, a.grid_beta, a.grid_beta0);
      csv += format_double(th) + ',' + format_double(v) + '\n';
      curve.push_back({th, v});
    }
    report["kl_grid"] = {{"beta", a.grid_beta}, {"beta0", a.grid_beta0}, {"points", curve}};
    write_file(dir / "kl_grid.csv", csv);
  }
  write_json(dir / "diag.json", report);
  manifest.add_output(dir / "diag.json");
  if (a.grid > 0) manifest.add_output(dir / "kl_grid.csv");
  manifest.write(dir);

  out << "KL divergence      " << fixed(kl, 6) << '\n';
  if (have_bound) out << "bound              " << fixed(report["bound"]["value"].get<double>()) << '\n';
  if (a.grid > 0) out << "KL grid            " << a.grid << " points\n";
  return kExitOk;
}

}  // namespace

void parse_kernel(const std::string& text, TrainConfig& config) {
  if (text == "rbf") {
    config.kernel = KernelKind::rbf;
  } else if (text == "linear") {
    config.kernel = KernelKind::linear;
  } else if (text.rfind("poly", 0) == 0) {
    config.kernel = KernelKind::polynomial;
    if (text == "poly") {
      config.poly_order = 2;
      return;
    }
    if (text.size() < 6 || text[4] != ':') throw UsageError("polynomial kernel is written poly:P");
    const auto p = detail::parse_double(text.substr(5));
    if (!p || *p < 1.0 || *p != std::floor(*p) || *p > 64.0)
      throw UsageError("polynomial order must be an integer between 1 and 64, got '" + text.substr(5) + "'");
    config.poly_order = static_cast<int>(*p);
  } else {
    throw UsageError("unknown kernel '" + text + "' (expected rbf, linear or poly:P)");
  }
}

json config_to_json(const TrainConfig& c) {
  json j;
  j["kernel"] = to_string(c.kernel);
  if (c.kernel == KernelKind::polynomial) j["poly_order"] = c.poly_order;
  j["hyper_rule"] = to_string(c.hyper_rule);
  j["lambda"] = c.lambda;
  j["prune_threshold_max"] = c.prune_threshold_max;
  j["evidence_tol"] = c.evidence_tol;
  j["max_iterations"] = c.max_iterations;
  j["inner_mode_iterations"] = c.inner_mode_iterations;
  j["mode_grad_tol"] = c.mode_grad_tol;
  j["gamma_prior_c"] = c.gamma_prior_c;
  j["gamma_prior_d"] = c.gamma_prior_d;
  j["init_alpha"] = c.init_alpha;
  j["init_beta"] = c.init_beta;
  j["init_w"] = c.init_w;
  j["init_theta"] = c.init_theta ? json(*c.init_theta) : json("1/M");
  j["drop_E"] = c.drop_E;
  return j;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse Bayesian kernel classifier with joint sample and feature selection", "pfcvm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  c_synth->add_option("kind", synth.kind, "waveform or sparse-informative")->required();
  c_synth->add_option("--n-per-class", synth.n_per_class, "waveform samples per class")->capture_default_str();
  c_synth->add_option("--noise-dims", synth.noise_dims, "waveform pure-noise columns")->capture_default_str();
  c_synth->add_option("--n", synth.n, "sparse-informative samples")->capture_default_str();
  c_synth->add_option("--m", synth.m, "sparse-informative features")->capture_default_str();
  c_synth->add_option("--k", synth.k, "sparse-informative informative features")->capture_default_str();
  c_synth->add_option("--effect", synth.effect, "sparse-informative effect size")->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--out", synth.out, "output directory")->required();

  FitArgs fitargs;
  auto* c_fit = app.add_subcommand("fit", "Train a model");
  add_data_options(c_fit, fitargs.data);
  add_train_options(c_fit, fitargs.train);
  c_fit->add_option("--seed", fitargs.seed)->capture_default_str();
  c_fit->add_option("--out", fitargs.out, "output directory")->required();

  ModelDataArgs predargs;
  auto* c_predict = app.add_subcommand("predict", "Score a dataset with a trained model");
  c_predict->add_option("--model", predargs.model, "model.json from fit")->required();
  add_data_options(c_predict, predargs.data);
  c_predict->add_option("--out", predargs.out, "output directory")->required();

  ModelDataArgs evalargs;
  auto* c_eval = app.add_subcommand("eval", "Error rate, AUC and kappa of a model on a dataset");
  c_eval->add_option("--model", evalargs.model, "model.json from fit")->required();
  add_data_options(c_eval, evalargs.data);
  c_eval->add_option("--out", evalargs.out, "output directory")->required();

  LoocvArgs loocv;
  auto* c_loocv = app.add_subcommand("loocv", "Leave-one-out cross-validation");
  add_data_options(c_loocv, loocv.data);
  add_train_options(c_loocv, loocv.train);
  c_loocv->add_option("--seed", loocv.seed)->capture_default_str();
  c_loocv->add_option("--jobs", loocv.jobs, "parallel folds")->capture_default_str();
  c_loocv->add_option("--out", loocv.out, "output directory")->required();

  StabilityArgs stab;
  auto* c_stab = app.add_subcommand("stability", "Feature-selection stability over seeded resamples");
  add_data_options(c_stab, stab.data, false);
  c_stab->add_option("--synth", stab.synth, "generate the pool instead of reading --data (waveform)");
  c_stab->add_option("--pool-per-class", stab.pool_per_class, "generated samples per class")->capture_default_str();
  c_stab->add_option("--noise-dims", stab.noise_dims, "generated noise columns")->capture_default_str();
  add_train_options(c_stab, stab.train);
  c_stab->add_option("--repeats", stab.repeats, "number of resamples")->capture_default_str();
  c_stab->add_option("--per-class", stab.per_class, "training samples per class")->capture_default_str();
  c_stab->add_option("--seed", stab.seed)->capture_default_str();
  c_stab->add_option("--jobs", stab.jobs, "parallel repeats")->capture_default_str();
  c_stab->add_option("--out", stab.out, "output directory")->required();

  DiagArgs diag;
  auto* c_diag = app.add_subcommand("diag", "KL divergence and generalization bound");
  c_diag->add_option("--model", diag.model, "model.json from fit");
  add_data_options(c_diag, diag.data, false);
  c_diag->add_option("--theta", diag.theta, "feature means")->delimiter(',');
  c_diag->add_option("--beta", diag.beta, "posterior precisions")->delimiter(',');
  c_diag->add_option("--beta0", diag.beta0, "prior precisions (one value broadcasts with --model)")->delimiter(',');
  c_diag->add_option("--kl", diag.kl, "use this KL value instead of computing one");
  c_diag->add_option("--loss", diag.loss, "empirical loss in [0, 1]");
  c_diag->add_option("--n", diag.n, "sample count for the bound");
  c_diag->add_option("--c", diag.c)->capture_default_str();
  c_diag->add_option("--r", diag.r)->capture_default_str();
  c_diag->add_option("--g", diag.g)->capture_default_str();
  c_diag->add_option("--delta", diag.delta)->capture_default_str();
  c_diag->add_option("--grid", diag.grid, "points of a single-feature KL curve over [0, grid-max]");
  c_diag->add_option("--grid-max", diag.grid_max)->capture_default_str();
  c_diag->add_option("--grid-beta", diag.grid_beta)->capture_default_str();
  c_diag->add_option("--grid-beta0", diag.grid_beta0)->capture_default_str();
  c_diag->add_option("--out", diag.out, "output directory")->required();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("pfcvm");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_synth->parsed()) return cmd_synth(synth, out);
    if (c_fit->parsed()) return cmd_fit(fitargs, out);
    if (c_predict->parsed()) return cmd_predict(predargs, out);
    if (c_eval->parsed()) return cmd_eval(evalargs, out);
    if (c_loocv->parsed()) return cmd_loocv(loocv, out);
    if (c_stab->parsed()) return cmd_stability(stab, out);
    if (c_diag->parsed()) return cmd_diag(diag, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitModel;
  }
  return kExitUsage;
}

}  // namespace pfcvm::cli
