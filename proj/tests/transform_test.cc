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

#include "qge/transform.h"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "qge/error.h"
#include "qge/explain.h"
#include "qge/explore.h"
#include "qge/metrics.h"
#include "qge/model.h"

namespace qge {
namespace {

QualityFunction PixelFlippingOn(const Model& model, std::vector<double> x, int y) {
  MetricContext ctx;
  ctx.model = &model;
  ctx.x = std::move(x);
  ctx.y = y;
  return BindMetric(MetricKind::kPixelFlipping, {}, ctx);
}

TEST(QgeTest, HandExamples) {
  const LinearHeadModel head({{0.8, 0.2}}, {0.0});
  const QualityFunction q = PixelFlippingOn(head, {1, 1}, 0);
  EXPECT_NEAR(Qge(q, std::vector<double>{2, 1}), 0.3, 1e-15);
  const LinearHeadModel symmetric({{1, 1, 1}}, {0.0});
  EXPECT_EQ(Qge(PixelFlippingOn(symmetric, {1, 1, 1}, 0), std::vector<double>{0.2, 0.9, 0.4}), 0.0);
  const LinearHeadModel single({{2.0}}, {0.0});
  EXPECT_EQ(Qge(PixelFlippingOn(single, {1}, 0), std::vector<double>{5.0}), 0.0);
}

TEST(QrandTest, ConstantModelGivesZero) {
  const ConstantModel model(5, {0.2, 0.8});
  const QualityFunction q = PixelFlippingOn(model, {1, 2, 3, 4, 5}, 1);
  for (int k : {1, 3, 10}) {
    for (std::uint64_t seed : {0u, 1u, 99u}) {
      EXPECT_NEAR(QrandK(q, std::vector<double>{5, 4, 3, 2, 1}, k, seed), 0.0, 1e-15);
    }
  }
}

TEST(QrandTest, ExpectationOracle) {
  const LinearHeadModel head({{0.8, 0.2}}, {0.0});
  const QualityFunction q = PixelFlippingOn(head, {1, 1}, 0);
  const std::vector<double> e = {2, 1};
  // Averaging over both possible rankings gives the exact expectation.
  const double exact = q(e) - (q(std::vector<double>{2, 1}) + q(std::vector<double>{1, 2})) / 2.0;
  EXPECT_NEAR(exact, 0.15, 1e-15);
  double mean = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) mean += QrandK(q, e, 1000, s);
  EXPECT_NEAR(mean / seeds, 0.15, 0.01);
}

TEST(CostContractTest, CallCounts) {
  const MlpModel model = MlpModel::Random(5, {8}, 3, 1);
  CountingQuality counter(PixelFlippingOn(model, {1, 0.5, -1, 2, 0}, 0));
  const QualityFunction q = counter.function();
  const std::vector<double> e = {0.3, 0.1, 0.5, 0.2, 0.4};
  Qge(q, e);
  EXPECT_EQ(counter.calls(), 2);
  for (int k : {1, 5, 10}) {
    counter.reset();
    QrandK(q, e, k, 7);
    EXPECT_EQ(counter.calls(), k + 1);
  }
}

TEST(QgeProperty, AntisymmetryAndSign) {
  const MlpModel model = MlpModel::Random(6, {12}, 3, 31);
  const QualityFunction q = PixelFlippingOn(model, {0.3, -1.0, 0.8, 1.5, -0.2, 0.6}, 2);
  for (const Attribution& e : SampleExplanations(6, 200, 4)) {
    const double g = Qge(q, e);
    EXPECT_EQ(g, -Qge(q, InvertExplanation(e)));
    EXPECT_EQ(g > 0.0, q(e) > q(InvertExplanation(e)));
  }
}

TEST(QrandTest, SweepPrefixesMatchSingleK) {
  const MlpModel model = MlpModel::Random(4, {6}, 2, 3);
  const QualityFunction q = PixelFlippingOn(model, {1, 2, 3, 4}, 1);
  const std::vector<double> e = {0.4, 0.3, 0.2, 0.1};
  const std::vector<double> sweep = QrandSweep(q, e, 10, 55);
  ASSERT_EQ(sweep.size(), 10u);
  for (int k = 1; k <= 10; ++k) EXPECT_NEAR(sweep[k - 1], QrandK(q, e, k, 55), 1e-15) << k;
  EXPECT_THROW(QrandK(q, e, 0, 1), Error);
}

TEST(TransformSpecTest, LabelsRoundTrip) {
  for (const char* label : {"none", "qge", "qrand_1", "qrand_12"}) {
    EXPECT_EQ(TransformLabel(ParseTransform(label)), label);
  }
  EXPECT_THROW(ParseTransform("qrand_0"), Error);
  EXPECT_THROW(ParseTransform("qrand_x"), Error);
  EXPECT_THROW(ParseTransform("rank"), Error);
}

TEST(ApplyTransformTest, NoneIsIdentity) {
  const MlpModel model = MlpModel::Random(4, {6}, 2, 3);
  const QualityFunction q = PixelFlippingOn(model, {1, 2, 3, 4}, 1);
  const std::vector<double> e = {0.4, 0.3, 0.2, 0.1};
  const auto [qv, qt] = ApplyTransform({TransformKind::kNone, 1, 0}, q, e, 3);
  EXPECT_EQ(qv, qt);
  const auto [q2, g] = ApplyTransform({TransformKind::kQge, 1, 0}, q, e, 3);
  EXPECT_EQ(g, Qge(q, e));
}

TEST(TransformSeriesTest, ShapesAndScheduleIndependence) {
  const MlpModel model = MlpModel::Random(4, {6}, 2, 3);
  const QualityFunction q = PixelFlippingOn(model, {1, 2, 3, 4}, 1);
  const std::vector<Attribution> all = EnumerateRankings(4);
  const ScoreSeries none = TransformSeries({TransformKind::kNone, 1, 0}, q, all, 2);
  EXPECT_EQ(none.q, none.qt);
  const ScoreSeries qge = TransformSeries({TransformKind::kQge, 1, 0}, q, all, 3);
  EXPECT_EQ(qge.q.size(), 24u);
  EXPECT_EQ(qge.qt.size(), 24u);
  const TransformSpec qrand{TransformKind::kQrand, 4, 17};
  const ScoreSeries serial = TransformSeriesSerial(qrand, q, all);
  for (int threads : {1, 2, 4}) {
    const ScoreSeries parallel = TransformSeries(qrand, q, all, threads);
    EXPECT_EQ(parallel.q, serial.q);
    EXPECT_EQ(parallel.qt, serial.qt);
  }
}

}  // namespace
}  // namespace qge
