/*
 * Copyright 2026 The QGE Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "qge/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "qge/core.h"
#include "qge/data.h"
#include "qge/explain.h"
#include "qge/explore.h"
#include "qge/metaeval.h"
#include "qge/metrics.h"
#include "qge/model.h"
#include "qge/random.h"
#include "qge/stats.h"
#include "qge/transform.h"

namespace qge::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Tags that derive per-section seeds from the master seed.
constexpr std::pair<const char*, std::uint64_t> kSeededSections[] = {
    {"data", 1}, {"model", 2}, {"explain", 3}, {"metric", 4}, {"transform", 5}, {"metaeval", 6}};

// Gap tolerance used to report the smallest K whose curve meets QGE.
constexpr double kCurveMatchTolerance = 0.05;

[[noreturn]] void ConfigFail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kConfigError, path + ": " + what);
}

json DefaultConfig() {
  return {
      {"seed", 0},
      {"data",
       {{"source", "blobs"},
        {"dim", 6},
        {"classes", 3},
        {"samples", 300},
        {"separation", 3.0},
        {"height", 8},
        {"width", 8},
        {"patch", 2},
        {"path", ""},
        {"delimiter", ","},
        {"header", true},
        {"label_column", -1},
        {"id_column", -1},
        {"class_labels", json::array()},
        {"normalize", true},
        {"holdout_fraction", 0.25},
        {"seed", nullptr}}},
      {"model",
       {{"weights", ""},
        {"hidden", {32}},
        {"condition", "trained"},
        {"epochs", 40},
        {"batch_size", 16},
        {"learning_rate", 0.05},
        {"momentum", 0.0},
        {"mask_augment", "none"},
        {"mask_probability", 0.5},
        {"stop_at_accuracy_fraction", 0.7},
        {"target_accuracy", nullptr},
        {"seed", nullptr}}},
      {"explain",
       {{"mode", "exhaustive"},
        {"samples", 1000},
        {"explainers", json::array()},
        {"inputs", 5},
        {"label", "predicted"},
        {"superpixel", 0},
        {"seed", nullptr}}},
      {"metric",
       {{"name", "pixel_flipping"},
        {"baseline", "zeros"},
        {"runs", 100},
        {"subset_size", 0},
        {"top_k", 0},
        {"seed", nullptr}}},
      {"transform", {{"qrand_kmax", 10}, {"seed", nullptr}}},
      {"stats",
       {{"quantiles", kDefaultQuantiles}, {"histogram_bins", 20}}},
      {"metaeval",
       {{"metrics",
         {"pixel_flipping", "relevance_rank_accuracy", "relevance_mass_accuracy"}},
        {"transforms", {"qrand_1", "qge"}},
        {"explainers", {"saliency", "integrated_gradients", "input_x_gradient"}},
        {"trials", 5},
        {"repetitions", 3},
        {"minor_sigma", 0.01},
        {"inputs", 20},
        {"seed", nullptr}}},
      {"output", {{"dir", "runs/default"}}},
  };
}

std::string KindName(const json& v) {
  if (v.is_number_integer()) return "an integer";
  if (v.is_number()) return "a number";
  if (v.is_string()) return "a string";
  if (v.is_boolean()) return "a boolean";
  if (v.is_array()) return "an array";
  if (v.is_object()) return "an object";
  return "null";
}

bool SameKind(const json& def, const json& v) {
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  return def.type() == v.type();
}

void MergeSection(json& target, const json& user, const std::string& path) {
  if (!user.is_object()) ConfigFail(path, "must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string field = path + "." + key;
    auto it = target.find(key);
    if (it == target.end()) ConfigFail(field, "unknown key");
    if (!it->is_null() && !SameKind(*it, value)) {
      ConfigFail(field, "expected " + KindName(*it) + ", got " + KindName(value));
    }
    *it = value;
  }
}

// Typed, range-checked access to one resolved section.
class Section {
 public:
  Section(const json& root, std::string name) : j_(root.at(name)), name_(std::move(name)) {}

  int Int(const char* key, long long lo, long long hi) const {
    const json& v = j_.at(key);
    if (!v.is_number_integer()) Fail(key, "expected an integer");
    const long long x = v.get<long long>();
    if (x < lo || x > hi) {
      Fail(key, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return static_cast<int>(x);
  }
  double Real(const char* key, double lo, double hi) const {
    const double x = j_.at(key).get<double>();
    if (!(x >= lo && x <= hi)) {
      Fail(key, "must be in [" + Num(lo) + ", " + Num(hi) + "]");
    }
    return x;
  }
  std::optional<double> OptionalReal(const char* key, double lo, double hi) const {
    const json& v = j_.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) Fail(key, "expected a number or null");
    return Real(key, lo, hi);
  }
  std::string Str(const char* key, std::initializer_list<const char*> allowed = {}) const {
    const std::string s = j_.at(key).get<std::string>();
    if (allowed.size() == 0) return s;
    std::string options;
    for (const char* a : allowed) {
      if (s == a) return s;
      options += options.empty() ? a : std::string(", ") + a;
    }
    Fail(key, "must be one of {" + options + "}, got '" + s + "'");
  }
  bool Bool(const char* key) const { return j_.at(key).get<bool>(); }
  std::uint64_t Seed() const { return j_.at("seed").get<std::uint64_t>(); }
  std::vector<std::string> Strings(const char* key) const {
    std::vector<std::string> out;
    const json& arr = j_.at(key);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string()) Fail(key, "element " + std::to_string(i) + " must be a string");
      out.push_back(arr[i].get<std::string>());
    }
    return out;
  }
  std::vector<int> Ints(const char* key, int lo, int hi) const {
    std::vector<int> out;
    const json& arr = j_.at(key);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number_integer() || arr[i].get<long long>() < lo ||
          arr[i].get<long long>() > hi) {
        Fail(key, "element " + std::to_string(i) + " must be an integer in [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
      }
      out.push_back(arr[i].get<int>());
    }
    return out;
  }
  std::vector<double> Reals(const char* key, double lo, double hi) const {
    std::vector<double> out;
    const json& arr = j_.at(key);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number() || !(arr[i].get<double>() >= lo && arr[i].get<double>() <= hi)) {
        Fail(key, "element " + std::to_string(i) + " must be a number in [" + Num(lo) +
                      ", " + Num(hi) + "]");
      }
      out.push_back(arr[i].get<double>());
    }
    return out;
  }
  [[noreturn]] void Fail(const std::string& key, const std::string& what) const {
    ConfigFail(name_ + "." + key, what);
  }

 private:
  static std::string Num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }

  const json& j_;
  std::string name_;
};

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string FormatOptional(const std::optional<double>& v) {
  return v ? FormatDouble(*v) : "";
}

bool IsSeed(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

json OptionalJson(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Pipeline stages shared by the subcommands.

struct RunContext {
  json config;
  std::string hash;
  std::uint64_t seed = 0;
  std::string config_dir;
  int threads = 0;
  std::ostream* log = nullptr;
};

struct PreparedData {
  TabularDataset data;
  std::vector<GroundTruthMask> masks;  // empty unless localization
  int height = 0;
  int width = 0;
  Split split;
  std::string source;
};

PreparedData PrepareData(const RunContext& ctx) {
  const Section s(ctx.config, "data");
  PreparedData out;
  out.source = s.Str("source", {"blobs", "localization", "csv"});
  const std::uint64_t seed = s.Seed();
  if (out.source == "blobs") {
    out.data = GenBlobs(s.Int("dim", 1, 4096), s.Int("classes", 1, 1000),
                        s.Int("samples", 1, 10'000'000), s.Real("separation", 0.0, 1e6),
                        DeriveSeed(seed, 0));
  } else if (out.source == "localization") {
    out.height = s.Int("height", 2, 1024);
    out.width = s.Int("width", 2, 1024);
    LocalizationDataset loc = GenLocalization(out.height, out.width,
                                              s.Int("samples", 1, 10'000'000),
                                              s.Int("patch", 1, 512), DeriveSeed(seed, 0));
    out.data = std::move(loc.data);
    out.masks = std::move(loc.masks);
  } else {
    const std::string path_text = s.Str("path");
    if (path_text.empty()) s.Fail("path", "required when source is 'csv'");
    fs::path path(path_text);
    if (path.is_relative()) path = fs::path(ctx.config_dir) / path;
    const std::string delimiter = s.Str("delimiter");
    if (delimiter.size() != 1) s.Fail("delimiter", "must be a single character");
    CsvSchema schema;
    schema.delimiter = delimiter[0];
    schema.header = s.Bool("header");
    schema.label_column = s.Int("label_column", -100000, 100000);
    const int id_column = s.Int("id_column", -1, 100000);
    if (id_column >= 0) schema.id_column = id_column;
    schema.class_labels = s.Strings("class_labels");
    schema.normalize = s.Bool("normalize");
    out.data = LoadCsv(path.string(), schema);
  }
  out.split = SplitIndices(out.data.size(), s.Real("holdout_fraction", 0.0, 0.9),
                           DeriveSeed(seed, 1));
  return out;
}

struct PreparedModel {
  MlpModel model;
  std::string condition;
  TrainReport report;
  std::optional<double> target_accuracy;
};

TrainConfig ReadTrainConfig(const Section& s) {
  TrainConfig cfg;
  cfg.epochs = s.Int("epochs", 0, 1'000'000);
  cfg.batch_size = s.Int("batch_size", 1, 1'000'000);
  cfg.learning_rate = s.Real("learning_rate", 0.0, 1e6);
  cfg.momentum = s.Real("momentum", 0.0, 0.999);
  const std::string augment = s.Str("mask_augment", {"none", "zeros", "mean"});
  cfg.mask_augment = augment == "none"    ? MaskAugment::kNone
                     : augment == "zeros" ? MaskAugment::kZeros
                                          : MaskAugment::kMean;
  cfg.mask_probability = s.Real("mask_probability", 0.0, 1.0);
  cfg.seed = DeriveSeed(s.Seed(), 1);
  return cfg;
}

PreparedModel PrepareModel(const RunContext& ctx, const PreparedData& prepared) {
  const Section s(ctx.config, "model");
  const std::vector<Instance> train = Select(prepared.data.instances, prepared.split.train);
  const std::vector<Instance> holdout = Select(prepared.data.instances, prepared.split.holdout);
  PreparedModel out{MlpModel::Zeros(1, {}, 1), s.Str("condition", {"trained", "undertrained", "untrained"}), {}, {}};
  const std::string weights = s.Str("weights");
  if (!weights.empty()) {
    fs::path path(weights);
    if (path.is_relative()) path = fs::path(ctx.config_dir) / path;
    out.model = LoadMlp(path.string());
    if (out.model.input_dim() != prepared.data.dim() ||
        out.model.class_count() != prepared.data.class_count) {
      throw Error(ErrorCode::kLoadError, "model.weights: shape does not match the dataset");
    }
    out.condition = "loaded";
    out.report.train_accuracy = Accuracy(out.model, train);
    out.report.holdout_accuracy = holdout.empty() ? out.report.train_accuracy
                                                  : Accuracy(out.model, holdout);
    return out;
  }
  const MlpModel init = MlpModel::Random(prepared.data.dim(), s.Ints("hidden", 1, 100000),
                                         prepared.data.class_count, DeriveSeed(s.Seed(), 0));
  TrainConfig cfg = ReadTrainConfig(s);
  if (out.condition == "untrained") cfg.epochs = 0;
  if (out.condition == "undertrained") {
    out.target_accuracy = s.OptionalReal("target_accuracy", 0.0, 1.0);
    if (!out.target_accuracy) {
      out.target_accuracy = Train(init, train, holdout, cfg).report.holdout_accuracy;
    }
    cfg.target_accuracy = out.target_accuracy;
    cfg.stop_at_accuracy_fraction = s.Real("stop_at_accuracy_fraction", 1e-9, 1.0);
  }
  TrainResult result = Train(init, train, holdout, cfg);
  out.model = std::move(result.model);
  out.report = result.report;
  return out;
}

// Inputs explained by explore/compare/metaeval: the first `count` holdout
// instances, falling back to the training split when there is no holdout.
std::vector<std::size_t> PickInputs(const PreparedData& prepared, int count,
                                    const std::string& field) {
  const std::vector<std::size_t>& pool =
      prepared.split.holdout.empty() ? prepared.split.train : prepared.split.holdout;
  if (pool.size() < static_cast<std::size_t>(count)) {
    throw Error(ErrorCode::kLoadError, field + ": requested " + std::to_string(count) +
                                           " inputs but only " + std::to_string(pool.size()) +
                                           " are available");
  }
  return {pool.begin(), pool.begin() + count};
}

Baseline MakeBaseline(const std::string& kind, const PreparedData& prepared) {
  if (kind == "zeros") return Baseline::Zeros();
  return Baseline::FeatureMean(
      FeatureMeans(Select(prepared.data.instances, prepared.split.train)));
}

std::optional<FeatureGrouping> MakeGrouping(const RunContext& ctx, const PreparedData& prepared) {
  const Section s(ctx.config, "explain");
  const int block = s.Int("superpixel", 0, 1024);
  if (block == 0) return std::nullopt;
  if (prepared.source != "localization") {
    s.Fail("superpixel", "requires data.source = 'localization'");
  }
  return FeatureGrouping::Grid(prepared.height, prepared.width, block);
}

MetricParams ReadMetricParams(const Section& s, std::uint64_t seed) {
  MetricParams params;
  params.runs = s.Int("runs", 1, 1'000'000);
  params.subset_size = s.Int("subset_size", 0, 1'000'000);
  params.top_k = s.Int("top_k", 0, 1'000'000);
  params.seed = seed;
  return params;
}

struct InputExploration {
  std::size_t index = 0;  // row in the dataset
  int label = 0;
  std::uint64_t seed = 0;  // transform seed for this input
  std::vector<std::string> sources;
  Exploration result;
};

std::vector<InputExploration> RunExploration(const RunContext& ctx, const PreparedData& prepared,
                                             const Model& model) {
  const Section explain(ctx.config, "explain");
  const Section metric(ctx.config, "metric");
  const Section transform(ctx.config, "transform");
  const MetricKind kind = [&] {
    try {
      return ParseMetric(metric.Str("name"));
    } catch (const Error& e) {
      metric.Fail("name", e.what());
    }
  }();
  if (NeedsMask(kind) && prepared.masks.empty()) {
    metric.Fail("name", "needs ground-truth masks (data.source = 'localization')");
  }
  const std::string mode = explain.Str("mode", {"exhaustive", "sample"});
  const bool use_true_label = explain.Str("label", {"predicted", "true"}) == "true";
  const Baseline baseline = MakeBaseline(metric.Str("baseline", {"zeros", "mean"}), prepared);
  const std::optional<FeatureGrouping> grouping = MakeGrouping(ctx, prepared);
  const int dim = grouping ? grouping->group_count() : prepared.data.dim();
  std::vector<ExplainerKind> explainers;
  for (const std::string& name : explain.Strings("explainers")) {
    try {
      explainers.push_back(ParseExplainer(name));
    } catch (const Error& e) {
      explain.Fail("explainers", e.what());
    }
  }
  if (mode == "exhaustive" && dim > kMaxExhaustiveFeatures) {
    explain.Fail("mode", "exhaustive exploration is limited to " +
                             std::to_string(kMaxExhaustiveFeatures) + " features (got " +
                             std::to_string(dim) + "); use mode 'sample'");
  }
  const int samples = explain.Int("samples", 1, 100'000'000);
  const int kmax = transform.Int("qrand_kmax", 1, 10000);

  std::vector<InputExploration> out;
  for (std::size_t index : PickInputs(prepared, explain.Int("inputs", 1, 1'000'000),
                                      "explain.inputs")) {
    const Instance& inst = prepared.data.instances[index];
    InputExploration item;
    item.index = index;
    item.label = use_true_label ? *inst.label : PredictClass(model, inst.features);
    item.seed = DeriveSeed(transform.Seed(), index);
    MetricContext context;
    context.model = &model;
    context.x = inst.features;
    context.y = item.label;
    context.baseline = baseline;
    context.mask = prepared.masks.empty() ? nullptr : &prepared.masks[index];
    context.grouping = grouping ? &*grouping : nullptr;
    const QualityFunction q =
        BindMetric(kind, ReadMetricParams(metric, DeriveSeed(metric.Seed(), index)), context);
    ExploreOptions options;
    options.qrand_kmax = kmax;
    options.seed = item.seed;
    options.threads = ctx.threads;
    if (mode == "exhaustive") {
      item.result = ExploreExhaustive(q, dim, options);
      item.sources.assign(item.result.size(), "permutation");
    } else {
      std::vector<Attribution> explanations =
          SampleExplanations(dim, samples, DeriveSeed(explain.Seed(), index));
      item.sources.assign(explanations.size(), "random");
      for (ExplainerKind e : explainers) {
        Attribution a = Explain(e, model, inst.features, item.label,
                                DeriveSeed(explain.Seed(), 1'000'000 + index));
        explanations.push_back(grouping ? grouping->Aggregate(a) : std::move(a));
        item.sources.emplace_back(ExplainerName(e));
      }
      item.result = ExploreExplanations(q, explanations, options);
    }
    *ctx.log << "explored input " << index << ": " << item.result.size() << " explanations\n";
    out.push_back(std::move(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output.

struct RunOutput {
  std::string results_csv;
  json summary;
  std::vector<std::pair<std::string, std::string>> extra_files;  // name, content
};

void WriteFile(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kLoadError, "cannot write " + path.string());
  f << content;
  if (!f) throw Error(ErrorCode::kLoadError, "write failed for " + path.string());
}

std::string RowPrefix(const RunContext& ctx) {
  return ctx.hash + "," + std::to_string(ctx.seed) + ",";
}

// ---------------------------------------------------------------------------
// Subcommands.

RunOutput CmdGenData(const RunContext& ctx) {
  const PreparedData prepared = PrepareData(ctx);
  std::vector<std::string> split_of(prepared.data.size(), "train");
  for (std::size_t i : prepared.split.holdout) split_of[i] = "holdout";
  std::ostringstream csv;
  csv << "config_hash,seed,index,split,label";
  for (const std::string& name : prepared.data.feature_names) csv << "," << name;
  if (!prepared.masks.empty()) csv << ",mask";
  csv << "\n";
  for (std::size_t i = 0; i < prepared.data.size(); ++i) {
    const Instance& inst = prepared.data.instances[i];
    csv << RowPrefix(ctx) << i << "," << split_of[i] << ","
        << (inst.label ? std::to_string(*inst.label) : "");
    for (double v : inst.features) csv << "," << FormatDouble(v);
    if (!prepared.masks.empty()) {
      csv << ",";
      for (std::uint8_t bit : prepared.masks[i].inside()) csv << (bit ? '1' : '0');
    }
    csv << "\n";
  }
  std::ostringstream dataset;
  WriteCsv(prepared.data, dataset);
  RunOutput out;
  out.results_csv = csv.str();
  out.summary = DatasetManifest(prepared.data, prepared.source,
                                ctx.config.at("data").at("seed").get<std::uint64_t>());
  out.summary["train_size"] = prepared.split.train.size();
  out.summary["holdout_size"] = prepared.split.holdout.size();
  out.extra_files.emplace_back("dataset.csv", dataset.str());
  return out;
}

RunOutput CmdTrain(const RunContext& ctx) {
  const PreparedData prepared = PrepareData(ctx);
  const PreparedModel model = PrepareModel(ctx, prepared);
  const std::uint64_t model_seed = ctx.config.at("model").at("seed").get<std::uint64_t>();
  std::ostringstream csv;
  csv << "config_hash,seed,model_seed,condition,split,size,accuracy\n";
  csv << RowPrefix(ctx) << model_seed << "," << model.condition << ",train,"
      << prepared.split.train.size() << "," << FormatDouble(model.report.train_accuracy)
      << "\n";
  csv << RowPrefix(ctx) << model_seed << "," << model.condition << ",holdout,"
      << prepared.split.holdout.size() << "," << FormatDouble(model.report.holdout_accuracy)
      << "\n";
  RunOutput out;
  out.results_csv = csv.str();
  out.summary = {{"condition", model.condition},
                 {"train_accuracy", model.report.train_accuracy},
                 {"holdout_accuracy", model.report.holdout_accuracy},
                 {"final_loss", model.report.final_loss},
                 {"steps", model.report.steps},
                 {"epochs_run", model.report.epochs_run},
                 {"stopped_early", model.report.stopped_early},
                 {"target_accuracy", OptionalJson(model.target_accuracy)},
                 {"hidden", model.model.HiddenSizes()}};
  out.extra_files.emplace_back("model.json", MlpToJson(model.model).dump(1) + "\n");
  return out;
}

RunOutput CmdExplore(const RunContext& ctx) {
  const PreparedData prepared = PrepareData(ctx);
  const PreparedModel model = PrepareModel(ctx, prepared);
  const std::vector<InputExploration> runs = RunExploration(ctx, prepared, model.model);
  const int kmax = ctx.config.at("transform").at("qrand_kmax").get<int>();
  std::ostringstream csv;
  csv << "config_hash,seed,input_seed,input,label,explanation,source,q,qge";
  for (int k = 1; k <= kmax; ++k) csv << ",qrand_" << k;
  csv << "\n";
  json per_input = json::array();
  for (const InputExploration& run : runs) {
    for (std::size_t i = 0; i < run.result.size(); ++i) {
      csv << RowPrefix(ctx) << run.seed << "," << run.index << "," << run.label << "," << i
          << "," << run.sources[i] << "," << FormatDouble(run.result.q[i]) << ","
          << FormatDouble(run.result.qge[i]);
      for (int k = 0; k < kmax; ++k) csv << "," << FormatDouble(run.result.qrand[k][i]);
      csv << "\n";
    }
    per_input.push_back({{"input", run.index},
                         {"label", run.label},
                         {"explanations", run.result.size()},
                         {"mean_q", Mean(run.result.q)},
                         {"mean_qge", Mean(run.result.qge)}});
  }
  RunOutput out;
  out.results_csv = csv.str();
  out.summary = {{"mode", ctx.config.at("explain").at("mode")},
                 {"holdout_accuracy", model.report.holdout_accuracy},
                 {"inputs", per_input}};
  return out;
}

// Correlation of q against a transformed series; empty when degenerate.
std::optional<double> SafeTau(std::span<const double> a, std::span<const double> b) {
  try {
    return KendallTau(a, b);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateCorrelation) throw;
    return std::nullopt;
  }
}

std::optional<double> SafeRho(std::span<const double> a, std::span<const double> b) {
  try {
    return SpearmanRho(a, b);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateCorrelation) throw;
    return std::nullopt;
  }
}

// Running mean of optional values.
class OptionalMean {
 public:
  void Add(const std::optional<double>& v) {
    if (v) {
      sum_ += *v;
      ++count_;
    }
  }
  std::optional<double> value() const {
    return count_ > 0 ? std::optional<double>(sum_ / count_) : std::nullopt;
  }

 private:
  double sum_ = 0.0;
  int count_ = 0;
};

RunOutput CmdCompare(const RunContext& ctx) {
  const PreparedData prepared = PrepareData(ctx);
  const PreparedModel model = PrepareModel(ctx, prepared);
  const Section stats(ctx.config, "stats");
  const std::vector<double> quantiles = stats.Reals("quantiles", 1e-12, 1.0);
  if (quantiles.empty()) stats.Fail("quantiles", "must not be empty");
  const int bins = stats.Int("histogram_bins", 1, 100000);
  const std::vector<InputExploration> runs = RunExploration(ctx, prepared, model.model);
  const int kmax = ctx.config.at("transform").at("qrand_kmax").get<int>();

  std::ostringstream csv;
  csv << "config_hash,seed,input_seed,input,analysis,statistic,param,value\n";
  auto row = [&](const std::string& input_seed, const std::string& input,
                 const std::string& analysis, const std::string& statistic,
                 const std::string& param, const std::string& value) {
    csv << RowPrefix(ctx) << input_seed << "," << input << "," << analysis << "," << statistic
        << "," << param << "," << value << "\n";
  };

  OptionalMean tau_qge_mean, rho_qge_mean, delta_tau_mean, delta_rho_mean;
  std::vector<OptionalMean> tau_curve(kmax), rho_curve(kmax);
  std::vector<OptionalMean> strat_qge(quantiles.size()), strat_qrand(quantiles.size()),
      strat_delta(quantiles.size());
  for (const InputExploration& run : runs) {
    const std::string seed = std::to_string(run.seed);
    const std::string input = std::to_string(run.index);
    const Exploration& r = run.result;
    const std::optional<double> tau_qge = SafeTau(r.q, r.qge);
    const std::optional<double> rho_qge = SafeRho(r.q, r.qge);
    tau_qge_mean.Add(tau_qge);
    rho_qge_mean.Add(rho_qge);
    row(seed, input, "correlation", "tau", "qge", FormatOptional(tau_qge));
    row(seed, input, "correlation", "rho", "qge", FormatOptional(rho_qge));
    for (int k = 0; k < kmax; ++k) {
      const std::optional<double> tau = SafeTau(r.q, r.qrand[k]);
      const std::optional<double> rho = SafeRho(r.q, r.qrand[k]);
      tau_curve[k].Add(tau);
      rho_curve[k].Add(rho);
      const std::string label = "qrand_" + std::to_string(k + 1);
      row(seed, input, "correlation", "tau", label, FormatOptional(tau));
      row(seed, input, "correlation", "rho", label, FormatOptional(rho));
    }
    const std::optional<double> tau_r1 = SafeTau(r.q, r.qrand[0]);
    const std::optional<double> rho_r1 = SafeRho(r.q, r.qrand[0]);
    std::optional<double> delta_tau, delta_rho;
    if (tau_qge && tau_r1) delta_tau = *tau_qge - *tau_r1;
    if (rho_qge && rho_r1) delta_rho = *rho_qge - *rho_r1;
    delta_tau_mean.Add(delta_tau);
    delta_rho_mean.Add(delta_rho);
    row(seed, input, "delta", "delta_tau", "qge-qrand_1", FormatOptional(delta_tau));
    row(seed, input, "delta", "delta_rho", "qge-qrand_1", FormatOptional(delta_rho));

    const std::vector<StratumTau> by_qge = StratifiedTau(r.q, r.qge, quantiles);
    const std::vector<StratumTau> by_qrand = StratifiedTau(r.q, r.qrand[0], quantiles);
    for (std::size_t s = 0; s < quantiles.size(); ++s) {
      const std::string p = FormatDouble(quantiles[s]);
      std::optional<double> delta;
      if (by_qge[s].tau && by_qrand[s].tau) delta = *by_qge[s].tau - *by_qrand[s].tau;
      strat_qge[s].Add(by_qge[s].tau);
      strat_qrand[s].Add(by_qrand[s].tau);
      strat_delta[s].Add(delta);
      row(seed, input, "stratified", "size", p, std::to_string(by_qge[s].size));
      row(seed, input, "stratified", "tau_qge", p, FormatOptional(by_qge[s].tau));
      row(seed, input, "stratified", "tau_qrand_1", p, FormatOptional(by_qrand[s].tau));
      row(seed, input, "stratified", "delta_tau", p, FormatOptional(delta));
    }

    // Symmetric bins around zero so the centering of QGE is visible.
    double extent = 0.0;
    for (double v : r.qge) extent = std::max(extent, std::abs(v));
    if (extent == 0.0) extent = 1.0;
    std::vector<std::size_t> counts(bins, 0);
    for (double v : r.qge) {
      const auto b = static_cast<long long>(std::floor((v + extent) / (2.0 * extent) * bins));
      ++counts[std::clamp<long long>(b, 0, bins - 1)];
    }
    for (int b = 0; b < bins; ++b) {
      const double center = -extent + (b + 0.5) * (2.0 * extent / bins);
      row(seed, input, "qge_histogram", "count", FormatDouble(center),
          std::to_string(counts[b]));
    }
    row(seed, input, "qge_histogram", "mean", "", FormatDouble(Mean(r.qge)));
  }

  const std::string all = "mean";
  row("", all, "correlation", "tau", "qge", FormatOptional(tau_qge_mean.value()));
  row("", all, "correlation", "rho", "qge", FormatOptional(rho_qge_mean.value()));
  std::vector<double> ks, curve;
  json curve_json = json::array();
  std::optional<int> k_star;
  for (int k = 0; k < kmax; ++k) {
    const std::string label = "qrand_" + std::to_string(k + 1);
    const std::optional<double> tau = tau_curve[k].value();
    row("", all, "correlation", "tau", label, FormatOptional(tau));
    row("", all, "correlation", "rho", label, FormatOptional(rho_curve[k].value()));
    curve_json.push_back({{"k", k + 1}, {"tau", OptionalJson(tau)},
                          {"rho", OptionalJson(rho_curve[k].value())}});
    if (tau) {
      ks.push_back(k + 1);
      curve.push_back(*tau);
      if (!k_star && tau_qge_mean.value() &&
          std::abs(*tau - *tau_qge_mean.value()) <= kCurveMatchTolerance) {
        k_star = k + 1;
      }
    }
  }
  row("", all, "delta", "delta_tau", "qge-qrand_1", FormatOptional(delta_tau_mean.value()));
  row("", all, "delta", "delta_rho", "qge-qrand_1", FormatOptional(delta_rho_mean.value()));
  json strata = json::array();
  for (std::size_t s = 0; s < quantiles.size(); ++s) {
    const std::string p = FormatDouble(quantiles[s]);
    row("", all, "stratified", "tau_qge", p, FormatOptional(strat_qge[s].value()));
    row("", all, "stratified", "tau_qrand_1", p, FormatOptional(strat_qrand[s].value()));
    row("", all, "stratified", "delta_tau", p, FormatOptional(strat_delta[s].value()));
    strata.push_back({{"quantile", quantiles[s]},
                      {"tau_qge", OptionalJson(strat_qge[s].value())},
                      {"tau_qrand_1", OptionalJson(strat_qrand[s].value())},
                      {"delta_tau", OptionalJson(strat_delta[s].value())}});
  }
  std::optional<double> curve_trend;
  if (curve.size() >= 2) {
    try {
      curve_trend = SpearmanRho(ks, curve);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateCorrelation) throw;
    }
  }
  if (!delta_tau_mean.value()) {
    throw Error(ErrorCode::kDegenerateCorrelation,
                "every input produced a constant quality series; no correlation is defined");
  }
  RunOutput out;
  out.results_csv = csv.str();
  out.summary = {{"inputs", runs.size()},
                 {"holdout_accuracy", model.report.holdout_accuracy},
                 {"tau_qge", OptionalJson(tau_qge_mean.value())},
                 {"rho_qge", OptionalJson(rho_qge_mean.value())},
                 {"delta_tau", OptionalJson(delta_tau_mean.value())},
                 {"delta_rho", OptionalJson(delta_rho_mean.value())},
                 {"qrand_curve", curve_json},
                 {"qrand_curve_spearman", OptionalJson(curve_trend)},
                 {"k_star", k_star ? json(*k_star) : json(nullptr)},
                 {"k_star_tolerance", kCurveMatchTolerance},
                 {"stratified", strata}};
  return out;
}

RunOutput CmdMetaEval(const RunContext& ctx) {
  const PreparedData prepared = PrepareData(ctx);
  const PreparedModel model = PrepareModel(ctx, prepared);
  const Section s(ctx.config, "metaeval");
  const Section metric(ctx.config, "metric");
  MetaEvalConfig config;
  const MetricParams params = ReadMetricParams(metric, metric.Seed());
  for (const std::string& name : s.Strings("metrics")) {
    MetricKind kind;
    try {
      kind = ParseMetric(name);
    } catch (const Error& e) {
      s.Fail("metrics", e.what());
    }
    if (NeedsMask(kind) && prepared.masks.empty()) {
      s.Fail("metrics", name + " needs ground-truth masks (data.source = 'localization')");
    }
    config.metrics.push_back(StandardMetric(kind, params));
  }
  for (const std::string& label : s.Strings("transforms")) {
    try {
      config.transforms.push_back(ParseTransform(label));
    } catch (const Error& e) {
      s.Fail("transforms", e.what());
    }
  }
  config.explainers.clear();
  for (const std::string& name : s.Strings("explainers")) {
    try {
      config.explainers.push_back(ParseExplainer(name));
    } catch (const Error& e) {
      s.Fail("explainers", e.what());
    }
  }
  if (config.metrics.empty()) s.Fail("metrics", "must not be empty");
  if (config.transforms.empty()) s.Fail("transforms", "must not be empty");
  if (config.explainers.size() < 2) s.Fail("explainers", "needs at least two explainers");
  config.trials = s.Int("trials", 1, 10000);
  config.repetitions = s.Int("repetitions", 1, 10000);
  config.minor_sigma = s.Real("minor_sigma", 1e-12, 1e3);
  config.seed = s.Seed();
  config.mean_baseline = metric.Str("baseline", {"zeros", "mean"}) == "mean";
  config.threads = ctx.threads;
  const std::optional<FeatureGrouping> grouping = MakeGrouping(ctx, prepared);
  config.grouping = grouping ? &*grouping : nullptr;

  const std::vector<std::size_t> picked =
      PickInputs(prepared, s.Int("inputs", 1, 1'000'000), "metaeval.inputs");
  const std::vector<Instance> inputs = Select(prepared.data.instances, picked);
  std::vector<GroundTruthMask> masks;
  for (std::size_t i : picked) {
    if (!prepared.masks.empty()) masks.push_back(prepared.masks[i]);
  }
  const MetaEvalReport report = RunMetaEval(config, model.model, inputs, masks);

  std::ostringstream csv;
  csv << "config_hash,seed,metaeval_seed,metric,transform,target,severity,iac,iec,mc,"
         "degenerate,trials,repetitions\n";
  bool any_mc = false;
  for (const MetaEvalRow& r : report.rows) {
    any_mc = any_mc || r.mc.has_value();
    for (Severity severity : {Severity::kMinor, Severity::kDisruptive}) {
      const bool minor = severity == Severity::kMinor;
      csv << RowPrefix(ctx) << config.seed << "," << r.metric << "," << r.transform << ","
          << TargetName(r.target) << "," << SeverityName(severity) << ","
          << FormatOptional(minor ? r.iac_nr.value : r.iac_ar.value) << ","
          << FormatOptional(minor ? r.iec_nr.value : r.iec_ar.value) << ","
          << FormatOptional(r.mc) << "," << (r.degenerate ? 1 : 0) << "," << report.trials
          << "," << report.repetitions << "\n";
    }
  }
  if (!any_mc) {
    throw Error(ErrorCode::kInsufficientData, "every meta-evaluation cell was skipped");
  }
  RunOutput out;
  out.results_csv = csv.str();
  out.summary = report.ToJson();
  out.summary["holdout_accuracy"] = model.report.holdout_accuracy;
  return out;
}

const std::map<std::string, RunOutput (*)(const RunContext&)>& Commands() {
  static const std::map<std::string, RunOutput (*)(const RunContext&)> kCommands = {
      {"gen-data", &CmdGenData}, {"train", &CmdTrain},       {"explore", &CmdExplore},
      {"compare", &CmdCompare},  {"metaeval", &CmdMetaEval},
  };
  return kCommands;
}

}  // namespace

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kRefuseExhaustive:
    case ErrorCode::kUnsupportedExplainer:
    case ErrorCode::kInvalidM:
    case ErrorCode::kInvalidK:
    case ErrorCode::kInvalidGrouping:
    case ErrorCode::kNeedTwoMethods:
      return kExitConfig;
    case ErrorCode::kLoadError:
    case ErrorCode::kEmptyDataset:
    case ErrorCode::kGenerationFailed:
    case ErrorCode::kInvalidPatch:
    case ErrorCode::kShapeError:
    case ErrorCode::kDegenerateMask:
    case ErrorCode::kInvalidMask:
    case ErrorCode::kInvalidAttribution:
      return kExitData;
    case ErrorCode::kDegenerateCorrelation:
    case ErrorCode::kAllNonPositive:
    case ErrorCode::kInsufficientData:
    case ErrorCode::kDivergedTraining:
    case ErrorCode::kInvalidComponent:
      return kExitDegenerate;
  }
  return kExitFailure;
}

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ConfigHash(const json& resolved) {
  json hashed = resolved;
  hashed.erase("output");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(Fnv1a64(hashed.dump())));
  return buf;
}

json ResolveConfig(const json& raw, std::optional<std::uint64_t> seed_override,
                   const std::optional<std::string>& out_override) {
  if (!raw.is_object()) ConfigFail("<root>", "config must be a JSON object");
  json resolved = DefaultConfig();
  for (const auto& [key, value] : raw.items()) {
    if (key == "seed") {
      if (!IsSeed(value)) ConfigFail("seed", "expected a non-negative integer");
      resolved["seed"] = value;
      continue;
    }
    if (!resolved.contains(key)) ConfigFail(key, "unknown section");
    MergeSection(resolved[key], value, key);
  }
  if (seed_override) resolved["seed"] = *seed_override;
  if (out_override) resolved["output"]["dir"] = *out_override;
  const std::uint64_t master = resolved["seed"].get<std::uint64_t>();
  for (const auto& [name, tag] : kSeededSections) {
    json& seed = resolved[name]["seed"];
    if (seed.is_null()) {
      seed = DeriveSeed(master, tag);
    } else if (!IsSeed(seed)) {
      ConfigFail(std::string(name) + ".seed", "expected a non-negative integer or null");
    }
  }
  const json& target = resolved["model"]["target_accuracy"];
  if (!target.is_null() && !target.is_number()) {
    ConfigFail("model.target_accuracy", "expected a number or null");
  }
  if (resolved["output"]["dir"].get<std::string>().empty()) {
    ConfigFail("output.dir", "must not be empty");
  }
  return resolved;
}

int Execute(const Invocation& invocation, std::ostream& log) {
  try {
    const auto& commands = Commands();
    const auto command = commands.find(invocation.command);
    if (command == commands.end()) {
      throw Error(ErrorCode::kConfigError, "unknown subcommand '" + invocation.command + "'");
    }
    if (invocation.threads < 0) ConfigFail("--threads", "must be >= 0");
    RunContext ctx;
    ctx.config = ResolveConfig(invocation.config, invocation.seed, invocation.out);
    ctx.hash = ConfigHash(ctx.config);
    ctx.seed = ctx.config["seed"].get<std::uint64_t>();
    ctx.config_dir = invocation.config_dir;
    ctx.threads = invocation.threads;
    ctx.log = &log;

    const fs::path dir = ctx.config["output"]["dir"].get<std::string>();
    const fs::path results = dir / "results.csv";
    if (fs::exists(results) && !invocation.force) {
      ConfigFail("output.dir", results.string() + " already exists; pass --force to overwrite");
    }
    const RunOutput out = command->second(ctx);
    fs::create_directories(dir);
    WriteFile(dir / "config.json", ctx.config.dump(2) + "\n");
    json summary = out.summary;
    summary["command"] = invocation.command;
    summary["config_hash"] = ctx.hash;
    summary["seed"] = ctx.seed;
    WriteFile(dir / "summary.json", summary.dump(2) + "\n");
    for (const auto& [name, content] : out.extra_files) WriteFile(dir / name, content);
    // Written last: its presence marks a completed run.
    WriteFile(results, out.results_csv);
    log << invocation.command << ": wrote " << results.string() << " (config " << ctx.hash
        << ")\n";
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int RunCli(int argc, const char* const* argv, std::ostream& log) {
  CLI::App app{"Quality-gap estimation experiments"};
  app.require_subcommand(1);
  std::string config_path;
  Invocation invocation;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  for (const auto& [name, fn] : Commands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--threads", invocation.threads, "worker cap; 0 uses all cores");
    sub->add_option("--out", out, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "master seed override");
    sub->add_flag("--force", invocation.force, "overwrite an existing results.csv");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  invocation.command = app.get_subcommands().front()->get_name();
  invocation.seed = seed;
  invocation.out = out;
  std::ifstream file(config_path);
  if (!file) {
    log << "error: cannot open config '" << config_path << "'\n";
    return kExitConfig;
  }
  try {
    invocation.config = json::parse(file);
  } catch (const json::parse_error& e) {
    log << "error: " << config_path << ": " << e.what() << "\n";
    return kExitConfig;
  }
  invocation.config_dir = fs::path(config_path).parent_path().string();
  if (invocation.config_dir.empty()) invocation.config_dir = ".";
  return Execute(invocation, log);
}

}  // namespace qge::cli
