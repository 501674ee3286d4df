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

#ifndef QGE_TESTS_FIXTURES_H_
#define QGE_TESTS_FIXTURES_H_

#include <cmath>
#include <cstdint>
#include <vector>

#include "qge/data.h"
#include "qge/model.h"

namespace qge::testing {

struct BlobSplit {
  TabularDataset data;
  std::vector<Instance> train;
  std::vector<Instance> holdout;
};

inline BlobSplit MakeBlobs(int d, int c, int n, double separation, std::uint64_t seed) {
  BlobSplit out;
  out.data = GenBlobs(d, c, n, separation, seed);
  const Split split = SplitIndices(out.data.size(), 0.25, seed + 1);
  out.train = Select(out.data.instances, split.train);
  out.holdout = Select(out.data.instances, split.holdout);
  return out;
}

inline TrainResult TrainMlp(const BlobSplit& blobs, std::vector<int> hidden, int epochs,
                            std::uint64_t seed) {
  const MlpModel init =
      MlpModel::Random(blobs.data.dim(), hidden, blobs.data.class_count, seed);
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seed = seed + 1;
  return Train(init, blobs.train, blobs.holdout, cfg);
}

// Largest elementwise |a - b| / max(1, |b|).
inline double MaxScaledError(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  }
  return worst;
}

// Central finite differences of f_y with step h.
inline std::vector<double> FiniteDifferenceGradient(const Model& model,
                                                    std::vector<double> x, int y,
                                                    double h = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = model.Output(x, y);
    x[i] = keep - h;
    const double down = model.Output(x, y);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), or the absolute norm when both are tiny.
inline double RelativeError(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

}  // namespace qge::testing

#endif  // QGE_TESTS_FIXTURES_H_
