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

#include "qge/data.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fixtures.h"
#include "gtest/gtest.h"
#include "qge/error.h"
#include "qge/explain.h"
#include "qge/metrics.h"
#include "qge/model.h"
#include "qge/stats.h"

namespace qge {
namespace {

// A file with the UCI Glass layout: id, nine numeric features, class label
// drawn from {1, 2, 3, 5, 6, 7}; no header.
std::string GlassLayoutCsv(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const int labels[] = {1, 2, 3, 5, 6, 7};
  std::ostringstream out;
  for (int row = 0; row < 214; ++row) {
    out << row + 1;
    for (int f = 0; f < 9; ++f) out << "," << 1.5 + f + 0.3 * n(rng);
    out << "," << labels[row % 6] << "\n";
  }
  return out.str();
}

template <typename F>
ErrorCode CodeOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(CsvTest, GlassLayout) {
  std::istringstream in(GlassLayoutCsv(1));
  CsvSchema schema;
  schema.header = false;
  schema.id_column = 0;
  const TabularDataset data = ParseCsv(in, schema);
  EXPECT_EQ(data.dim(), 9);
  EXPECT_EQ(data.size(), 214u);
  EXPECT_EQ(data.class_count, 6);
  EXPECT_EQ(data.class_labels, (std::vector<std::string>{"1", "2", "3", "5", "6", "7"}));
  EXPECT_TRUE(data.normalized);
  for (int j = 0; j < 9; ++j) {
    std::vector<double> column;
    for (const Instance& inst : data.instances) column.push_back(inst.features[j]);
    EXPECT_NEAR(Mean(column), 0.0, 1e-12);
    EXPECT_NEAR(StdDev(column), 1.0, 1e-12);
  }
}

TEST(CsvTest, LoadFromFileAndMissingFile) {
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "qge_data_test_glass.csv";
  {
    std::ofstream f(path);
    f << GlassLayoutCsv(2);
  }
  CsvSchema schema;
  schema.header = false;
  schema.id_column = 0;
  EXPECT_EQ(LoadCsv(path.string(), schema).size(), 214u);
  std::filesystem::remove(path);
  EXPECT_EQ(CodeOf([&] { LoadCsv(path.string(), schema); }), ErrorCode::kLoadError);
}

TEST(CsvTest, EmptyInput) {
  std::istringstream in("");
  EXPECT_EQ(CodeOf([&] { ParseCsv(in, CsvSchema{}); }), ErrorCode::kEmptyDataset);
  std::istringstream header_only("a,b,label\n");
  EXPECT_EQ(CodeOf([&] { ParseCsv(header_only, CsvSchema{}); }), ErrorCode::kEmptyDataset);
}

TEST(CsvTest, ConstantColumnIsFlagged) {
  std::istringstream in("a,b,label\n1,5,x\n2,5,y\n3,5,x\n");
  const TabularDataset data = ParseCsv(in, CsvSchema{});
  EXPECT_EQ(data.constant_columns, (std::vector<int>{1}));
  EXPECT_EQ(data.std[1], 1.0);
  for (const Instance& inst : data.instances) EXPECT_EQ(inst.features[1], 0.0);
}

TEST(CsvTest, RaggedRowsAndUnknownLabels) {
  std::istringstream ragged("a,b,label\n1,2,x\n1,x\n");
  EXPECT_EQ(CodeOf([&] { ParseCsv(ragged, CsvSchema{}); }), ErrorCode::kLoadError);
  std::istringstream unknown("a,label\n1,x\n2,z\n");
  CsvSchema schema;
  schema.class_labels = {"x", "y"};
  EXPECT_EQ(CodeOf([&] { ParseCsv(unknown, schema); }), ErrorCode::kLoadError);
}

TEST(CsvTest, UnparseableRowsAreRejectedWithLineNumbers) {
  std::istringstream in("a;b;label\n1;2;p\noops;3;q\n4;5;q\n6;7;p\n");
  CsvSchema schema;
  schema.delimiter = ';';
  const TabularDataset data = ParseCsv(in, schema, "mem.csv");
  EXPECT_EQ(data.size(), 3u);
  ASSERT_EQ(data.diagnostics.size(), 1u);
  EXPECT_NE(data.diagnostics[0].find("mem.csv:3"), std::string::npos) << data.diagnostics[0];
}

TEST(CsvTest, NumericLabelsSortNumerically) {
  std::istringstream in("a,label\n1,10\n2,9\n3,10\n4,2\n");
  const TabularDataset data = ParseCsv(in, CsvSchema{});
  EXPECT_EQ(data.class_labels, (std::vector<std::string>{"2", "9", "10"}));
  EXPECT_EQ(*data.instances[0].label, 2);
}

TEST(CsvTest, WriteParseRoundTrip) {
  const TabularDataset blobs = GenBlobs(3, 2, 20, 2.0, 5);
  std::stringstream buffer;
  WriteCsv(blobs, buffer);
  CsvSchema schema;
  schema.normalize = false;
  const TabularDataset back = ParseCsv(buffer, schema);
  ASSERT_EQ(back.size(), blobs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.instances[i].features, blobs.instances[i].features);
    EXPECT_EQ(back.instances[i].label, blobs.instances[i].label);
  }
}

TEST(NormalizationTest, RoundTrip) {
  const TabularDataset data = GenBlobs(5, 3, 60, 3.0, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> raw(5);
    for (double& v : raw) v = u(rng);
    const std::vector<double> back = Denormalize(data, Normalize(data, raw));
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(back[j], raw[j], 1e-12);
  }
}

TEST(GenBlobsTest, ValidationAndDeterminism) {
  EXPECT_THROW(GenBlobs(3, 2, 0, 1.0, 1), Error);
  EXPECT_THROW(GenBlobs(0, 2, 10, 1.0, 1), Error);
  const TabularDataset a = GenBlobs(4, 3, 50, 2.0, 9);
  const TabularDataset b = GenBlobs(4, 3, 50, 2.0, 9);
  ASSERT_EQ(a.size(), 50u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.instances[i].features, b.instances[i].features);
    EXPECT_EQ(a.instances[i].label, b.instances[i].label);
    EXPECT_LT(*a.instances[i].label, 3);
  }
}

TEST(GenBlobsTest, WellSeparatedBlobsAreLearnable) {
  const auto blobs = testing::MakeBlobs(6, 3, 400, 8.0, 17);
  const TrainResult result = testing::TrainMlp(blobs, {32}, 40, 3);
  EXPECT_GE(result.report.holdout_accuracy, 0.95);
}

TEST(GenLocalizationTest, MasksAndDeterminism) {
  const LocalizationDataset a = GenLocalization(8, 8, 20, 3, 4);
  const LocalizationDataset b = GenLocalization(8, 8, 20, 3, 4);
  ASSERT_EQ(a.masks.size(), 20u);
  EXPECT_EQ(a.data.dim(), 64);
  for (std::size_t i = 0; i < a.masks.size(); ++i) {
    EXPECT_EQ(a.masks[i].count(), 9u);
    EXPECT_EQ(a.masks[i].inside(), b.masks[i].inside());
    EXPECT_EQ(a.data.instances[i].features, b.data.instances[i].features);
  }
  EXPECT_EQ(CodeOf([] { GenLocalization(4, 4, 5, 3, 1); }), ErrorCode::kInvalidPatch);
  EXPECT_EQ(CodeOf([] { GenLocalization(4, 4, 5, 0, 1); }), ErrorCode::kInvalidPatch);
}

TEST(GenLocalizationTest, TrainedModelUsesThePatch) {
  const LocalizationDataset loc = GenLocalization(8, 8, 400, 2, 6);
  const Split split = SplitIndices(loc.data.size(), 0.25, 1);
  const std::vector<Instance> train = Select(loc.data.instances, split.train);
  const std::vector<Instance> holdout = Select(loc.data.instances, split.holdout);
  TrainConfig cfg;
  cfg.seed = 2;
  const TrainResult result =
      Train(MlpModel::Random(64, {32}, loc.data.class_count, 3), train, holdout, cfg);
  EXPECT_GE(result.report.holdout_accuracy, 0.9);
  double saliency_rra = 0.0, random_rra = 0.0;
  for (std::size_t i : split.holdout) {
    const Instance& inst = loc.data.instances[i];
    const Attribution sal =
        Explain(ExplainerKind::kSaliency, result.model, inst.features, *inst.label);
    const Attribution rnd =
        Explain(ExplainerKind::kRandom, result.model, inst.features, *inst.label, i);
    saliency_rra += RelevanceRankAccuracy(sal, loc.masks[i]).value;
    random_rra += RelevanceRankAccuracy(rnd, loc.masks[i]).value;
  }
  EXPECT_GT(saliency_rra, random_rra);
}

TEST(SplitTest, PartitionIsDeterministic) {
  const Split a = SplitIndices(100, 0.2, 5);
  const Split b = SplitIndices(100, 0.2, 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.holdout, b.holdout);
  EXPECT_EQ(a.holdout.size(), 20u);
  std::vector<int> seen(100, 0);
  for (std::size_t i : a.train) ++seen[i];
  for (std::size_t i : a.holdout) ++seen[i];
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(ManifestTest, RecordsSchemaAndStats) {
  const TabularDataset data = GenBlobs(3, 2, 10, 1.0, 1);
  const nlohmann::json m = DatasetManifest(data, "blobs", 1);
  EXPECT_EQ(m["rows"], 10);
  EXPECT_EQ(m["dim"], 3);
  EXPECT_EQ(m["mean"].size(), 3u);
  EXPECT_EQ(m["seed"], 1);
}

}  // namespace
}  // namespace qge
