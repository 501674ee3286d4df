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
#include <numeric>

#include "qge/error.h"
#include "qge/random.h"

namespace qge {

std::string_view ExplainerName(ExplainerKind kind) {
  switch (kind) {
    case ExplainerKind::kRandom: return "random";
    case ExplainerKind::kSaliency: return "saliency";
    case ExplainerKind::kInputXGradient: return "input_x_gradient";
    case ExplainerKind::kIntegratedGradients: return "integrated_gradients";
    case ExplainerKind::kOracleLinear: return "oracle_linear";
  }
  return "unknown";
}

ExplainerKind ParseExplainer(std::string_view name) {
  for (ExplainerKind k :
       {ExplainerKind::kRandom, ExplainerKind::kSaliency,
        ExplainerKind::kInputXGradient, ExplainerKind::kIntegratedGradients,
        ExplainerKind::kOracleLinear}) {
    if (ExplainerName(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown explainer '" + std::string(name) + "'");
}

Attribution IntegratedGradients(const Model& model, std::span<const double> x,
                                int y, int steps,
                                std::span<const double> baseline) {
  if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "steps must be >= 1");
  const std::size_t d = x.size();
  std::vector<double> base(d, 0.0);
  if (!baseline.empty()) {
    if (baseline.size() != d) throw Error(ErrorCode::kShapeError, "baseline length");
    base.assign(baseline.begin(), baseline.end());
  }
  std::vector<double> point(d);
  Attribution total(d, 0.0);
  for (int s = 1; s <= steps; ++s) {
    const double alpha = static_cast<double>(s) / steps;
    for (std::size_t i = 0; i < d; ++i) point[i] = base[i] + alpha * (x[i] - base[i]);
    const std::vector<double> g = model.Gradient(point, y);
    for (std::size_t i = 0; i < d; ++i) total[i] += g[i];
  }
  for (std::size_t i = 0; i < d; ++i) total[i] *= (x[i] - base[i]) / steps;
  return total;
}

Attribution Explain(ExplainerKind kind, const Model& model,
                    std::span<const double> x, int y, std::uint64_t seed) {
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw Error(ErrorCode::kShapeError, "input dimension does not match model");
  }
  if (y < 0 || y >= model.class_count()) {
    throw Error(ErrorCode::kShapeError, "class index out of range");
  }
  switch (kind) {
    case ExplainerKind::kRandom:
      return SampleExplanations(static_cast<int>(x.size()), 1, seed)[0];
    case ExplainerKind::kSaliency: {
      Attribution g = model.Gradient(x, y);
      for (double& v : g) v = std::abs(v);
      return g;
    }
    case ExplainerKind::kInputXGradient: {
      Attribution g = model.Gradient(x, y);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= x[i];
      return g;
    }
    case ExplainerKind::kIntegratedGradients:
      return IntegratedGradients(model, x, y, kIntegratedGradientSteps);
    case ExplainerKind::kOracleLinear: {
      auto row = model.LinearWeights(y);
      if (!row) {
        throw Error(ErrorCode::kUnsupportedExplainer,
                    "oracle_linear requires a single-layer linear model");
      }
      return *row;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown explainer");
}

std::uint64_t Factorial(int n) {
  std::uint64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

Ranking NthPermutation(int d, std::uint64_t index) {
  std::vector<int> pool(d);
  std::iota(pool.begin(), pool.end(), 0);
  Ranking out;
  out.reserve(d);
  for (int remaining = d; remaining > 0; --remaining) {
    const std::uint64_t block = Factorial(remaining - 1);
    const std::uint64_t pick = index / block;
    index %= block;
    out.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

namespace {

void CheckExhaustive(int d) {
  if (d < 1) throw Error(ErrorCode::kInvalidArgument, "D must be >= 1");
  if (d > kMaxExhaustiveFeatures) {
    throw Error(ErrorCode::kRefuseExhaustive,
                "D=" + std::to_string(d) + " exceeds the exhaustive limit of " +
                    std::to_string(kMaxExhaustiveFeatures) +
                    " features; use sampled exploration instead");
  }
}

}  // namespace

PermutationStream::PermutationStream(int d)
    : PermutationStream(d, 0, d >= 1 && d <= kMaxExhaustiveFeatures ? Factorial(d) : 0) {}

PermutationStream::PermutationStream(int d, std::uint64_t begin, std::uint64_t end)
    : d_(d), next_index_(begin), end_(end) {
  CheckExhaustive(d);
  if (begin > end || end > Factorial(d)) {
    throw Error(ErrorCode::kInvalidArgument, "permutation chunk out of range");
  }
}

bool PermutationStream::Next(Ranking& out) {
  if (next_index_ >= end_) return false;
  if (current_.empty()) {
    current_ = NthPermutation(d_, next_index_);
  } else {
    std::next_permutation(current_.begin(), current_.end());
  }
  ++next_index_;
  out = current_;
  return true;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> ChunkRanges(
    std::uint64_t total, std::uint64_t chunks) {
  chunks = std::max<std::uint64_t>(1, std::min(chunks, std::max<std::uint64_t>(total, 1)));
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  const std::uint64_t base = total / chunks;
  const std::uint64_t extra = total % chunks;
  std::uint64_t start = 0;
  for (std::uint64_t c = 0; c < chunks; ++c) {
    const std::uint64_t len = base + (c < extra ? 1 : 0);
    ranges.emplace_back(start, start + len);
    start += len;
  }
  return ranges;
}

std::vector<Attribution> EnumerateRankings(int d) {
  CheckExhaustive(d);
  std::vector<Attribution> out;
  out.reserve(Factorial(d));
  PermutationStream stream(d);
  Ranking r;
  while (stream.Next(r)) out.push_back(RankingToAttribution(r));
  return out;
}

std::vector<Attribution> SampleExplanations(int d, int n, std::uint64_t seed) {
  if (d < 1 || n < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sample_explanations needs D >= 1 and n >= 1");
  }
  Rng rng(seed);
  std::vector<Attribution> out(n, Attribution(d));
  for (Attribution& e : out) {
    for (double& v : e) v = UniformOpen01(rng);
  }
  return out;
}

void WriteExplanationsJsonl(std::ostream& out,
                            std::span<const ExplanationRecord> records) {
  for (const ExplanationRecord& r : records) {
    nlohmann::json j = {{"input_id", r.input_id},
                        {"explainer", r.explainer},
                        {"seed", r.seed},
                        {"values", AttributionToJson(r.values)}};
    out << j.dump() << "\n";
  }
}

std::vector<ExplanationRecord> ReadExplanationsJsonl(std::istream& in) {
  std::vector<ExplanationRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      records.push_back({j.at("input_id").get<std::string>(),
                         j.at("explainer").get<std::string>(),
                         j.at("seed").get<std::uint64_t>(),
                         AttributionFromJson(j.at("values"))});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kLoadError,
                  "explanations line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace qge
