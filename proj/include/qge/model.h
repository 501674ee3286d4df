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

#ifndef QGE_MODEL_H_
#define QGE_MODEL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qge/core.h"

namespace qge {

// A classifier mapping R^D to C class scores. For the models in this library
// the scores are probabilities, except for the synthetic heads below which
// emit their affine output directly.
class Model {
 public:
  virtual ~Model() = default;

  virtual int input_dim() const = 0;
  virtual int class_count() const = 0;

  virtual std::vector<double> Predict(std::span<const double> x) const = 0;

  // Gradient of Predict(x)[y] with respect to x.
  virtual std::vector<double> Gradient(std::span<const double> x,
                                       int y) const = 0;

  // Row y of the weight matrix if the model is a single affine map.
  virtual std::optional<std::vector<double>> LinearWeights(int /*y*/) const {
    return std::nullopt;
  }

  double Output(std::span<const double> x, int y) const {
    return Predict(x)[y];
  }

 protected:
  void CheckInput(std::span<const double> x) const;
  void CheckClass(int y) const;
};

enum class Activation { kRelu, kIdentity };

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // row-major, out x in
  std::vector<double> biases;
  Activation activation = Activation::kIdentity;
};

// Feedforward network: dense layers, the last followed by softmax.
class MlpModel final : public Model {
 public:
  MlpModel(std::vector<DenseLayer> layers, std::uint64_t init_seed = 0);

  // Hidden layers use ReLU, the output layer is affine. Weights and biases
  // are drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static MlpModel Random(int input_dim, const std::vector<int>& hidden,
                         int class_count, std::uint64_t init_seed);

  // Same architecture with all parameters zero (uniform output).
  static MlpModel Zeros(int input_dim, const std::vector<int>& hidden,
                        int class_count);

  // softmax(W x + b) with W of shape C x D.
  static MlpModel LinearSoftmax(const std::vector<std::vector<double>>& weights,
                                std::vector<double> biases);

  int input_dim() const override { return layers_.front().in; }
  int class_count() const override { return layers_.back().out; }
  std::uint64_t init_seed() const { return init_seed_; }

  std::vector<double> Predict(std::span<const double> x) const override;
  std::vector<double> Gradient(std::span<const double> x, int y) const override;
  std::optional<std::vector<double>> LinearWeights(int y) const override;

  // Softmax output plus the gradient of the cross-entropy loss with respect
  // to every parameter, accumulated into `grads` (same layout as layers()).
  double AccumulateLossGradient(std::span<const double> x, int label,
                                std::vector<DenseLayer>& grads) const;

  // Fresh parameters from the init distribution, same architecture.
  MlpModel Reinitialized(std::uint64_t seed) const;

  std::vector<int> HiddenSizes() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

 private:
  // Pre-activation and activation values of every layer.
  void ForwardTrace(std::span<const double> x,
                    std::vector<std::vector<double>>& pre,
                    std::vector<std::vector<double>>& post) const;

  std::vector<DenseLayer> layers_;
  std::uint64_t init_seed_ = 0;
};

// Affine head without softmax: Predict(x) = W x + b. Used as a closed-form
// "probability head" in metric oracle tests.
class LinearHeadModel final : public Model {
 public:
  LinearHeadModel(std::vector<std::vector<double>> weights,
                  std::vector<double> biases);

  int input_dim() const override { return static_cast<int>(weights_[0].size()); }
  int class_count() const override { return static_cast<int>(weights_.size()); }
  std::vector<double> Predict(std::span<const double> x) const override;
  std::vector<double> Gradient(std::span<const double> x, int y) const override;
  std::optional<std::vector<double>> LinearWeights(int y) const override;

 private:
  std::vector<std::vector<double>> weights_;
  std::vector<double> biases_;
};

// Ignores its input.
class ConstantModel final : public Model {
 public:
  ConstantModel(int input_dim, std::vector<double> outputs);

  int input_dim() const override { return input_dim_; }
  int class_count() const override { return static_cast<int>(outputs_.size()); }
  std::vector<double> Predict(std::span<const double> x) const override;
  std::vector<double> Gradient(std::span<const double> x, int y) const override;

 private:
  int input_dim_;
  std::vector<double> outputs_;
};

int PredictClass(const Model& model, std::span<const double> x);

// Fraction of labelled instances classified correctly.
double Accuracy(const Model& model, std::span<const Instance> data);

enum class MaskAugment { kNone, kZeros, kMean };

struct TrainConfig {
  int epochs = 40;
  int batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  // With probability `mask_probability` a training sample has k ~ U{0..D}
  // randomly chosen features replaced by zeros or the training-split mean.
  MaskAugment mask_augment = MaskAugment::kNone;
  double mask_probability = 0.5;
  // Stop as soon as holdout accuracy >= fraction * target_accuracy. Only
  // active when target_accuracy is set.
  double stop_at_accuracy_fraction = 1.0;
  std::optional<double> target_accuracy;
};

struct TrainReport {
  double holdout_accuracy = 0.0;
  double train_accuracy = 0.0;
  double final_loss = 0.0;
  std::int64_t steps = 0;
  int epochs_run = 0;
  bool stopped_early = false;
};

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

// Minibatch SGD on cross-entropy. `holdout` may be empty, in which case the
// early-stopping check and holdout accuracy use the training data.
TrainResult Train(const MlpModel& init, std::span<const Instance> train,
                  std::span<const Instance> holdout, const TrainConfig& config);

nlohmann::json MlpToJson(const MlpModel& model);
MlpModel MlpFromJson(const nlohmann::json& j);
void SaveMlp(const MlpModel& model, const std::string& path);
MlpModel LoadMlp(const std::string& path);

}  // namespace qge

#endif  // QGE_MODEL_H_
