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

#include "qge/core.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gtest/gtest.h"
#include "qge/error.h"

namespace qge {
namespace {

TEST(ArgsortStableTest, WorkedExample) {
  EXPECT_EQ(ArgsortStable(std::vector<double>{0.1, -0.1, 9.0, 4.0}), (Ranking{1, 0, 3, 2}));
}

TEST(ArgsortStableTest, SingleFeatureAndTies) {
  EXPECT_EQ(ArgsortStable(std::vector<double>{5.0}), (Ranking{0}));
  EXPECT_EQ(ArgsortStable(std::vector<double>{2.0, 2.0, 1.0}), (Ranking{2, 0, 1}));
}

TEST(ArgsortStableTest, RejectsNonFinite) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  for (double bad : {nan, inf, -inf}) {
    try {
      ArgsortStable(std::vector<double>{1.0, bad});
      FAIL() << "expected InvalidAttribution";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidAttribution);
    }
  }
}

TEST(ArgsortStableTest, RejectsEmpty) {
  EXPECT_THROW(ArgsortStable(std::vector<double>{}), Error);
}

TEST(InvertExplanationTest, WorkedExample) {
  EXPECT_EQ(InvertExplanation(std::vector<double>{0.1, -0.1, 9.0, 4.0}),
            (Attribution{4.0, 9.0, -0.1, 0.1}));
}

TEST(InvertExplanationTest, SmallCases) {
  EXPECT_EQ(InvertExplanation(std::vector<double>{7.0}), (Attribution{7.0}));
  EXPECT_EQ(InvertExplanation(std::vector<double>{1.0, 2.0, 3.0}), (Attribution{3.0, 2.0, 1.0}));
}

TEST(NegateExplanationTest, Examples) {
  EXPECT_EQ(NegateExplanation(std::vector<double>{0.1, -0.1, 9.0, 4.0}),
            (Attribution{-0.1, 0.1, -9.0, -4.0}));
  const Attribution zero = NegateExplanation(std::vector<double>{0.0, 0.0});
  EXPECT_EQ(zero, (Attribution{0.0, 0.0}));
  const Attribution neg = NegateExplanation(std::vector<double>{1.0, 2.0});
  EXPECT_EQ(ArgsortStable(neg), (Ranking{1, 0}));
}

TEST(RankingDescendingTest, Examples) {
  EXPECT_EQ(RankingDescending(std::vector<double>{0.1, -0.1, 9.0, 4.0}), (Ranking{2, 3, 0, 1}));
  EXPECT_EQ(RankingDescending(std::vector<double>{5.0}), (Ranking{0}));
  EXPECT_EQ(RankingDescending(std::vector<double>{1.0, 1.0}), (Ranking{1, 0}));
}

Attribution RandomVector(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  Attribution e(d);
  for (double& v : e) v = u(rng);
  return e;
}

TEST(InvertExplanationProperty, ReversalInvolutionAndValuePreservation) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 30);
    const Attribution e = RandomVector(rng, d);
    ASSERT_FALSE(HasTies(e));
    const Attribution inv = InvertExplanation(e);
    Ranking expected = ArgsortStable(e);
    std::reverse(expected.begin(), expected.end());
    EXPECT_EQ(ArgsortStable(inv), expected);
    EXPECT_EQ(ArgsortStable(InvertExplanation(inv)), ArgsortStable(e));
    Attribution a = e, b = inv;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
    Ranking negated = ArgsortStable(NegateExplanation(e));
    EXPECT_EQ(negated, expected);
  }
}

TEST(InvertExplanationProperty, TiedValuesArePreserved) {
  const Attribution e = {1.0, 1.0, 3.0, 2.0};
  Attribution inv = InvertExplanation(e);
  std::sort(inv.begin(), inv.end());
  EXPECT_EQ(inv, (Attribution{1.0, 1.0, 2.0, 3.0}));
}

TEST(RankingToAttributionTest, RoundTrip) {
  const Ranking r = {2, 0, 3, 1};
  const Attribution e = RankingToAttribution(r);
  EXPECT_EQ(e, (Attribution{1.0, 3.0, 0.0, 2.0}));
  EXPECT_EQ(ArgsortStable(e), r);
  EXPECT_TRUE(IsPermutation(r));
  EXPECT_FALSE(IsPermutation(Ranking{0, 0, 1}));
  EXPECT_FALSE(IsPermutation(Ranking{0, 3}));
}

TEST(GroundTruthMaskTest, RejectsDegenerateMasks) {
  EXPECT_THROW(GroundTruthMask({0, 0, 0}), Error);
  EXPECT_THROW(GroundTruthMask({1, 1}), Error);
  try {
    GroundTruthMask({1, 1});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateMask);
  }
  const GroundTruthMask mask({1, 0, 1});
  EXPECT_EQ(mask.count(), 2u);
  EXPECT_TRUE(mask.contains(2));
  EXPECT_FALSE(mask.contains(1));
}

TEST(FeatureGroupingTest, GridAndAggregate) {
  const FeatureGrouping g = FeatureGrouping::Grid(4, 4, 2);
  EXPECT_EQ(g.group_count(), 4);
  EXPECT_EQ(g.raw_size(), 16u);
  EXPECT_EQ(g.group_of(0), 0);
  EXPECT_EQ(g.group_of(3), 1);
  EXPECT_EQ(g.group_of(15), 3);
  std::vector<double> raw(16, 1.0);
  raw[15] = 5.0;
  EXPECT_EQ(g.Aggregate(raw), (Attribution{4.0, 4.0, 4.0, 8.0}));
}

TEST(FeatureGroupingTest, RejectsUnusedGroup) {
  EXPECT_THROW(FeatureGrouping({0, 0, 2}, 3), Error);
  EXPECT_THROW(FeatureGrouping({0, 5}, 2), Error);
}

TEST(JsonTest, AttributionAndRankingRoundTrip) {
  const Attribution e = {0.1, -2.5, 1e-300};
  EXPECT_EQ(AttributionFromJson(AttributionToJson(e)), e);
  const Ranking r = {1, 0, 2};
  EXPECT_EQ(RankingFromJson(RankingToJson(r)), r);
  EXPECT_THROW(RankingFromJson(nlohmann::json::parse("[0, 0]")), Error);
  EXPECT_THROW(AttributionFromJson(nlohmann::json::parse("[1, \"a\"]")), Error);
}

}  // namespace
}  // namespace qge
