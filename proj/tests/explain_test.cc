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

#include "qge/explain.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "gtest/gtest.h"
#include "qge/error.h"
#include "qge/model.h"

namespace qge {
namespace {

TEST(ExplainTest, SaliencyOnZeroModelIsZero) {
  const MlpModel model = MlpModel::Zeros(4, {6}, 3);
  for (double v : Explain(ExplainerKind::kSaliency, model, std::vector<double>{1, 2, 3, 4}, 0)) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(ExplainTest, SaliencyAndInputTimesGradient) {
  const MlpModel model = MlpModel::Random(4, {8}, 3, 17);
  const std::vector<double> x = {0.5, -1.0, 2.0, 0.0};
  const std::vector<double> g = model.Gradient(x, 2);
  const Attribution sal = Explain(ExplainerKind::kSaliency, model, x, 2);
  const Attribution ixg = Explain(ExplainerKind::kInputXGradient, model, x, 2);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(sal[i], std::abs(g[i]));
    EXPECT_EQ(ixg[i], x[i] * g[i]);
  }
}

TEST(ExplainTest, RandomIsSeedDeterministic) {
  const MlpModel model = MlpModel::Random(5, {4}, 2, 1);
  const std::vector<double> x(5, 1.0);
  const Attribution a = Explain(ExplainerKind::kRandom, model, x, 0, 42);
  EXPECT_EQ(a, Explain(ExplainerKind::kRandom, model, x, 0, 42));
  EXPECT_NE(a, Explain(ExplainerKind::kRandom, model, x, 0, 43));
  for (double v : a) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(ExplainTest, IntegratedGradientsConvergesToReference) {
  const MlpModel model =
      MlpModel::LinearSoftmax({{1.0, -0.5, 2.0, 0.3}, {-1.0, 0.7, 0.1, 0.4}, {0.2, 0.2, -1.5, 1.0}},
                              {0.1, 0.0, -0.1});
  const std::vector<double> x = {0.8, -0.4, 0.6, 1.2};
  const Attribution coarse = Explain(ExplainerKind::kIntegratedGradients, model, x, 0);
  const Attribution fine = IntegratedGradients(model, x, 0, 10000);
  double scale = 0.0;
  for (double v : fine) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < 4; ++i) EXPECT_LE(std::abs(coarse[i] - fine[i]), 0.02 * scale) << i;
  // Completeness: the reference sums to f(x) - f(0).
  double total = 0.0;
  for (double v : fine) total += v;
  const double gap = model.Output(x, 0) - model.Output(std::vector<double>(4, 0.0), 0);
  EXPECT_NEAR(total, gap, 1e-3 * std::abs(gap) + 1e-9);
}

TEST(ExplainTest, IntegratedGradientsOnLinearHeadIsExact) {
  const LinearHeadModel model({{0.8, -0.2, 0.5}}, {0.0});
  const std::vector<double> x = {1.0, 2.0, -3.0};
  const Attribution ig = IntegratedGradients(model, x, 0, kIntegratedGradientSteps);
  EXPECT_NEAR(ig[0], 0.8, 1e-15);
  EXPECT_NEAR(ig[1], -0.4, 1e-15);
  EXPECT_NEAR(ig[2], -1.5, 1e-15);
}

TEST(ExplainTest, OracleLinearNeedsLinearModel) {
  const MlpModel linear = MlpModel::LinearSoftmax({{3, 1, 2}, {0, 0, 0}}, {0, 0});
  const Attribution e = Explain(ExplainerKind::kOracleLinear, linear, std::vector<double>{1, 1, 1}, 0);
  EXPECT_EQ(e, (Attribution{3, 1, 2}));
  try {
    Explain(ExplainerKind::kOracleLinear, MlpModel::Random(3, {4}, 2, 1),
            std::vector<double>{1, 1, 1}, 0);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kUnsupportedExplainer);
  }
}

TEST(ExplainTest, NamesRoundTrip) {
  for (ExplainerKind k : {ExplainerKind::kRandom, ExplainerKind::kSaliency,
                          ExplainerKind::kInputXGradient, ExplainerKind::kIntegratedGradients,
                          ExplainerKind::kOracleLinear}) {
    EXPECT_EQ(ParseExplainer(ExplainerName(k)), k);
  }
  EXPECT_THROW(ParseExplainer("lime"), Error);
}

TEST(PermutationTest, SmallEnumerations) {
  const std::vector<Attribution> two = EnumerateRankings(2);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(ArgsortStable(two[0]), (Ranking{0, 1}));
  EXPECT_EQ(ArgsortStable(two[1]), (Ranking{1, 0}));
  const std::vector<Attribution> three = EnumerateRankings(3);
  std::set<Attribution> distinct(three.begin(), three.end());
  EXPECT_EQ(distinct.size(), 6u);
}

TEST(PermutationTest, LexicographicAndUnranking) {
  PermutationStream stream(4);
  Ranking r, prev;
  std::uint64_t index = 0;
  while (stream.Next(r)) {
    EXPECT_EQ(r, NthPermutation(4, index));
    if (index > 0) EXPECT_TRUE(std::lexicographical_compare(prev.begin(), prev.end(), r.begin(), r.end()));
    prev = r;
    ++index;
  }
  EXPECT_EQ(index, 24u);
}

TEST(PermutationTest, CountsAndNoRepeats) {
  for (int d = 1; d <= 7; ++d) {
    PermutationStream stream(d);
    std::set<Ranking> seen;
    Ranking r;
    while (stream.Next(r)) {
      ASSERT_TRUE(IsPermutation(r));
      seen.insert(r);
    }
    EXPECT_EQ(seen.size(), Factorial(d)) << d;
  }
}

TEST(PermutationTest, TenFeaturesCount) {
  EXPECT_EQ(Factorial(10), 3628800u);
  PermutationStream stream(10);
  Ranking r;
  std::uint64_t count = 0;
  while (stream.Next(r)) ++count;
  EXPECT_EQ(count, 3628800u);
}

TEST(PermutationTest, ChunksPartitionTheStream) {
  for (std::uint64_t chunks : {1u, 3u, 7u, 24u, 50u}) {
    std::vector<Ranking> joined;
    std::uint64_t expected_begin = 0;
    for (const auto& [begin, end] : ChunkRanges(Factorial(4), chunks)) {
      EXPECT_EQ(begin, expected_begin);
      expected_begin = end;
      PermutationStream stream(4, begin, end);
      Ranking r;
      while (stream.Next(r)) joined.push_back(r);
    }
    EXPECT_EQ(expected_begin, 24u);
    std::vector<Ranking> whole;
    PermutationStream stream(4);
    Ranking r;
    while (stream.Next(r)) whole.push_back(r);
    EXPECT_EQ(joined, whole);
  }
}

TEST(PermutationTest, RefusesLargeD) {
  try {
    PermutationStream stream(11);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRefuseExhaustive);
    EXPECT_NE(std::string(e.what()).find("sampl"), std::string::npos);
  }
  EXPECT_THROW(EnumerateRankings(12), Error);
}

TEST(SampleExplanationsTest, DeterministicInRangeAndPrefixStable) {
  const auto a = SampleExplanations(6, 20, 9);
  EXPECT_EQ(a, SampleExplanations(6, 20, 9));
  const auto prefix = SampleExplanations(6, 5, 9);
  EXPECT_TRUE(std::equal(prefix.begin(), prefix.end(), a.begin()));
  for (const Attribution& e : a) {
    ASSERT_EQ(e.size(), 6u);
    for (double v : e) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(SampleExplanationsTest, LargeSampleHasNoDuplicateRanking) {
  const auto samples = SampleExplanations(50, 10000, 123);
  std::set<Ranking> rankings;
  for (const Attribution& e : samples) {
    EXPECT_FALSE(HasTies(e));
    rankings.insert(ArgsortStable(e));
  }
  EXPECT_EQ(rankings.size(), 10000u);
}

TEST(ExplanationJsonlTest, RoundTrip) {
  const std::vector<ExplanationRecord> records = {
      {"7", "saliency", 3, {0.5, 1.25}}, {"8", "random", 9, {0.1, 0.2}}};
  std::stringstream buffer;
  WriteExplanationsJsonl(buffer, records);
  const std::vector<ExplanationRecord> back = ReadExplanationsJsonl(buffer);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].input_id, "8");
  EXPECT_EQ(back[0].explainer, "saliency");
  EXPECT_EQ(back[1].seed, 9u);
  EXPECT_EQ(back[0].values, records[0].values);
}

}  // namespace
}  // namespace qge
