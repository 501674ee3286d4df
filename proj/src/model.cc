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

#include "qge/model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "qge/error.h"
#include "qge/random.h"

namespace qge {
namespace {

void Softmax(std::vector<double>& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - hi);
    total += x;
  }
  for (double& x : v) x /= total;
}

DenseLayer MakeLayer(int in, int out, Activation activation) {
  DenseLayer layer;
  layer.in = in;
  layer.out = out;
  layer.weights.assign(static_cast<std::size_t>(in) * out, 0.0);
  layer.biases.assign(out, 0.0);
  layer.activation = activation;
  return layer;
}

void InitLayer(DenseLayer& layer, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : layer.weights) w = dist(rng);
  for (double& b : layer.biases) b = dist(rng);
}

std::vector<DenseLayer> Architecture(int input_dim,
                                     const std::vector<int>& hidden,
                                     int class_count) {
  if (input_dim < 1 || class_count < 1) {
    throw Error(ErrorCode::kShapeError, "input_dim and class_count must be >= 1");
  }
  std::vector<DenseLayer> layers;
  int in = input_dim;
  for (int width : hidden) {
    if (width < 1) throw Error(ErrorCode::kShapeError, "hidden width must be >= 1");
    layers.push_back(MakeLayer(in, width, Activation::kRelu));
    in = width;
  }
  layers.push_back(MakeLayer(in, class_count, Activation::kIdentity));
  return layers;
}

const char* ActivationName(Activation a) {
  return a == Activation::kRelu ? "relu" : "identity";
}

}  // namespace

void Model::CheckInput(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw Error(ErrorCode::kShapeError,
                "input has " + std::to_string(x.size()) + " features, model expects " +
                    std::to_string(input_dim()));
  }
}

void Model::CheckClass(int y) const {
  if (y < 0 || y >= class_count()) {
    throw Error(ErrorCode::kShapeError, "class index " + std::to_string(y) +
                                            " out of range");
  }
}

MlpModel::MlpModel(std::vector<DenseLayer> layers, std::uint64_t init_seed)
    : layers_(std::move(layers)), init_seed_(init_seed) {
  if (layers_.empty()) throw Error(ErrorCode::kShapeError, "model has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.in < 1 || layer.out < 1 ||
        layer.weights.size() != static_cast<std::size_t>(layer.in) * layer.out ||
        layer.biases.size() != static_cast<std::size_t>(layer.out)) {
      throw Error(ErrorCode::kShapeError,
                  "layer " + std::to_string(l) + " has inconsistent shapes");
    }
    if (l > 0 && layers_[l - 1].out != layer.in) {
      throw Error(ErrorCode::kShapeError,
                  "layer " + std::to_string(l) + " input does not match previous output");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
        !std::all_of(layer.biases.begin(), layer.biases.end(), finite)) {
      throw Error(ErrorCode::kShapeError,
                  "layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

MlpModel MlpModel::Random(int input_dim, const std::vector<int>& hidden,
                          int class_count, std::uint64_t init_seed) {
  std::vector<DenseLayer> layers = Architecture(input_dim, hidden, class_count);
  Rng rng(init_seed);
  for (DenseLayer& layer : layers) InitLayer(layer, rng);
  return MlpModel(std::move(layers), init_seed);
}

MlpModel MlpModel::Zeros(int input_dim, const std::vector<int>& hidden,
                         int class_count) {
  return MlpModel(Architecture(input_dim, hidden, class_count), 0);
}

MlpModel MlpModel::LinearSoftmax(const std::vector<std::vector<double>>& weights,
                                 std::vector<double> biases) {
  if (weights.empty() || weights[0].empty()) {
    throw Error(ErrorCode::kShapeError, "empty weight matrix");
  }
  const int c = static_cast<int>(weights.size());
  const int d = static_cast<int>(weights[0].size());
  if (static_cast<int>(biases.size()) != c) {
    throw Error(ErrorCode::kShapeError, "bias length must equal class count");
  }
  DenseLayer layer = MakeLayer(d, c, Activation::kIdentity);
  for (int i = 0; i < c; ++i) {
    if (static_cast<int>(weights[i].size()) != d) {
      throw Error(ErrorCode::kShapeError, "ragged weight matrix");
    }
    std::copy(weights[i].begin(), weights[i].end(), layer.weights.begin() + i * d);
  }
  layer.biases = std::move(biases);
  return MlpModel({std::move(layer)}, 0);
}

void MlpModel::ForwardTrace(std::span<const double> x,
                            std::vector<std::vector<double>>& pre,
                            std::vector<std::vector<double>>& post) const {
  pre.resize(layers_.size());
  post.resize(layers_.size() + 1);
  post[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    const std::vector<double>& a = post[l];
    std::vector<double>& z = pre[l];
    z.assign(layer.biases.begin(), layer.biases.end());
    for (int o = 0; o < layer.out; ++o) {
      const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
      double acc = 0.0;
      for (int i = 0; i < layer.in; ++i) acc += w[i] * a[i];
      z[o] += acc;
    }
    post[l + 1] = z;
    if (layer.activation == Activation::kRelu) {
      for (double& v : post[l + 1]) v = std::max(v, 0.0);
    }
  }
}

std::vector<double> MlpModel::Predict(std::span<const double> x) const {
  CheckInput(x);
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> z;
  for (const DenseLayer& layer : layers_) {
    z.assign(layer.biases.begin(), layer.biases.end());
    for (int o = 0; o < layer.out; ++o) {
      const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
      double acc = 0.0;
      for (int i = 0; i < layer.in; ++i) acc += w[i] * a[i];
      z[o] += acc;
    }
    if (layer.activation == Activation::kRelu) {
      for (double& v : z) v = std::max(v, 0.0);
    }
    a.swap(z);
  }
  Softmax(a);
  return a;
}

std::vector<double> MlpModel::Gradient(std::span<const double> x, int y) const {
  CheckInput(x);
  CheckClass(y);
  std::vector<std::vector<double>> pre, post;
  ForwardTrace(x, pre, post);
  std::vector<double> p = post.back();
  Softmax(p);

  // d p_y / d logits_j = p_y (delta_yj - p_j)
  std::vector<double> delta(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    delta[j] = p[y] * ((static_cast<int>(j) == y ? 1.0 : 0.0) - p[j]);
  }
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    if (layer.activation == Activation::kRelu) {
      for (int o = 0; o < layer.out; ++o) {
        if (pre[l][o] <= 0.0) delta[o] = 0.0;
      }
    }
    std::vector<double> back(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) back[i] += w[i] * delta[o];
    }
    delta.swap(back);
  }
  return delta;
}

std::optional<std::vector<double>> MlpModel::LinearWeights(int y) const {
  if (layers_.size() != 1 || layers_[0].activation != Activation::kIdentity) {
    return std::nullopt;
  }
  CheckClass(y);
  const DenseLayer& layer = layers_[0];
  auto row = layer.weights.begin() + static_cast<std::ptrdiff_t>(y) * layer.in;
  return std::vector<double>(row, row + layer.in);
}

double MlpModel::AccumulateLossGradient(std::span<const double> x, int label,
                                        std::vector<DenseLayer>& grads) const {
  std::vector<std::vector<double>> pre, post;
  ForwardTrace(x, pre, post);
  std::vector<double> p = post.back();
  Softmax(p);
  const double loss = -std::log(std::max(p[label], 1e-300));

  std::vector<double> delta = p;
  delta[label] -= 1.0;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    DenseLayer& g = grads[l];
    if (layer.activation == Activation::kRelu) {
      for (int o = 0; o < layer.out; ++o) {
        if (pre[l][o] <= 0.0) delta[o] = 0.0;
      }
    }
    const std::vector<double>& a = post[l];
    std::vector<double> back(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const std::size_t row = static_cast<std::size_t>(o) * layer.in;
      g.biases[o] += delta[o];
      for (int i = 0; i < layer.in; ++i) {
        g.weights[row + i] += delta[o] * a[i];
        back[i] += layer.weights[row + i] * delta[o];
      }
    }
    delta.swap(back);
  }
  return loss;
}

MlpModel MlpModel::Reinitialized(std::uint64_t seed) const {
  std::vector<DenseLayer> layers = layers_;
  Rng rng(seed);
  for (DenseLayer& layer : layers) InitLayer(layer, rng);
  return MlpModel(std::move(layers), seed);
}

std::vector<int> MlpModel::HiddenSizes() const {
  std::vector<int> sizes;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) sizes.push_back(layers_[l].out);
  return sizes;
}

LinearHeadModel::LinearHeadModel(std::vector<std::vector<double>> weights,
                                 std::vector<double> biases)
    : weights_(std::move(weights)), biases_(std::move(biases)) {
  if (weights_.empty() || weights_[0].empty() || biases_.size() != weights_.size()) {
    throw Error(ErrorCode::kShapeError, "inconsistent linear head shapes");
  }
  for (const auto& row : weights_) {
    if (row.size() != weights_[0].size()) {
      throw Error(ErrorCode::kShapeError, "ragged weight matrix");
    }
  }
}

std::vector<double> LinearHeadModel::Predict(std::span<const double> x) const {
  CheckInput(x);
  std::vector<double> out = biases_;
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    for (std::size_t i = 0; i < x.size(); ++i) out[c] += weights_[c][i] * x[i];
  }
  return out;
}

std::vector<double> LinearHeadModel::Gradient(std::span<const double> x,
                                              int y) const {
  CheckInput(x);
  CheckClass(y);
  return weights_[y];
}

std::optional<std::vector<double>> LinearHeadModel::LinearWeights(int y) const {
  CheckClass(y);
  return weights_[y];
}

ConstantModel::ConstantModel(int input_dim, std::vector<double> outputs)
    : input_dim_(input_dim), outputs_(std::move(outputs)) {
  if (input_dim_ < 1 || outputs_.empty()) {
    throw Error(ErrorCode::kShapeError, "constant model needs D >= 1 and C >= 1");
  }
}

std::vector<double> ConstantModel::Predict(std::span<const double> x) const {
  CheckInput(x);
  return outputs_;
}

std::vector<double> ConstantModel::Gradient(std::span<const double> x,
                                            int y) const {
  CheckInput(x);
  CheckClass(y);
  return std::vector<double>(input_dim_, 0.0);
}

int PredictClass(const Model& model, std::span<const double> x) {
  const std::vector<double> p = model.Predict(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double Accuracy(const Model& model, std::span<const Instance> data) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "no instances");
  std::size_t correct = 0;
  for (const Instance& inst : data) {
    if (inst.label && PredictClass(model, inst.features) == *inst.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult Train(const MlpModel& init, std::span<const Instance> train,
                  std::span<const Instance> holdout, const TrainConfig& config) {
  if (train.empty()) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  if (config.epochs < 0 || config.batch_size < 1 || config.learning_rate <= 0.0 ||
      config.mask_probability < 0.0 || config.mask_probability > 1.0 ||
      config.stop_at_accuracy_fraction <= 0.0 ||
      config.stop_at_accuracy_fraction > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid training hyperparameters");
  }
  const int d = init.input_dim();
  for (const Instance& inst : train) {
    if (static_cast<int>(inst.features.size()) != d) {
      throw Error(ErrorCode::kShapeError, "training instance has wrong dimension");
    }
    if (!inst.label || *inst.label < 0 || *inst.label >= init.class_count()) {
      throw Error(ErrorCode::kInvalidArgument, "training label missing or out of range");
    }
  }
  const std::span<const Instance> eval_set = holdout.empty() ? train : holdout;

  std::vector<double> mask_value(d, 0.0);
  if (config.mask_augment == MaskAugment::kMean) {
    for (const Instance& inst : train) {
      for (int i = 0; i < d; ++i) mask_value[i] += inst.features[i];
    }
    for (double& v : mask_value) v /= static_cast<double>(train.size());
  }

  MlpModel model = init;
  TrainReport report;
  const bool early_stop = config.target_accuracy.has_value();
  const double stop_threshold =
      early_stop ? config.stop_at_accuracy_fraction * *config.target_accuracy : 0.0;
  auto reached_target = [&]() {
    return early_stop && Accuracy(model, eval_set) >= stop_threshold;
  };

  // Masking draws from its own stream so the batch order does not depend on it.
  Rng rng(config.seed);
  Rng mask_rng(DeriveSeed(config.seed, 1));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<DenseLayer> grads = model.layers();
  std::vector<DenseLayer> velocity = model.layers();
  for (DenseLayer& v : velocity) {
    std::fill(v.weights.begin(), v.weights.end(), 0.0);
    std::fill(v.biases.begin(), v.biases.end(), 0.0);
  }
  std::vector<double> sample(d);
  std::vector<int> feature_ids(d);

  bool stop = reached_target();
  for (int epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size() && !stop;
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (DenseLayer& g : grads) {
        std::fill(g.weights.begin(), g.weights.end(), 0.0);
        std::fill(g.biases.begin(), g.biases.end(), 0.0);
      }
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const Instance& inst = train[order[b]];
        sample = inst.features;
        if (config.mask_augment != MaskAugment::kNone &&
            UniformOpen01(mask_rng) < config.mask_probability) {
          std::uniform_int_distribution<int> count_dist(0, d);
          const int k = count_dist(mask_rng);
          std::iota(feature_ids.begin(), feature_ids.end(), 0);
          std::shuffle(feature_ids.begin(), feature_ids.end(), mask_rng);
          for (int j = 0; j < k; ++j) sample[feature_ids[j]] = mask_value[feature_ids[j]];
        }
        batch_loss += model.AccumulateLossGradient(sample, *inst.label, grads);
      }
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::kDivergedTraining,
                    "loss became non-finite at step " + std::to_string(report.steps));
      }
      const double scale = config.learning_rate / static_cast<double>(end - start);
      auto& layers = model.mutable_layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t i = 0; i < layers[l].weights.size(); ++i) {
          velocity[l].weights[i] =
              config.momentum * velocity[l].weights[i] - scale * grads[l].weights[i];
          layers[l].weights[i] += velocity[l].weights[i];
        }
        for (std::size_t i = 0; i < layers[l].biases.size(); ++i) {
          velocity[l].biases[i] =
              config.momentum * velocity[l].biases[i] - scale * grads[l].biases[i];
          layers[l].biases[i] += velocity[l].biases[i];
        }
      }
      epoch_loss += batch_loss;
      ++report.steps;
      stop = reached_target();
    }
    report.epochs_run = epoch + 1;
    report.final_loss = epoch_loss / static_cast<double>(train.size());
  }
  report.stopped_early = early_stop && stop;
  report.holdout_accuracy = Accuracy(model, eval_set);
  report.train_accuracy = Accuracy(model, train);
  return TrainResult{std::move(model), report};
}

nlohmann::json MlpToJson(const MlpModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& layer : model.layers()) {
    nlohmann::json rows = nlohmann::json::array();
    for (int o = 0; o < layer.out; ++o) {
      auto row = layer.weights.begin() + static_cast<std::ptrdiff_t>(o) * layer.in;
      rows.push_back(std::vector<double>(row, row + layer.in));
    }
    layers.push_back({{"weights", rows},
                      {"biases", layer.biases},
                      {"activation", ActivationName(layer.activation)}});
  }
  return {{"input_dim", model.input_dim()},
          {"class_count", model.class_count()},
          {"init_seed", model.init_seed()},
          {"layers", layers}};
}

MlpModel MlpFromJson(const nlohmann::json& j) {
  auto fail = [](const std::string& what) -> Error {
    return Error(ErrorCode::kLoadError, "weight file: " + what);
  };
  try {
    const int input_dim = j.at("input_dim").get<int>();
    const int class_count = j.at("class_count").get<int>();
    std::vector<DenseLayer> layers;
    for (const auto& jl : j.at("layers")) {
      DenseLayer layer;
      const std::string act = jl.at("activation").get<std::string>();
      if (act == "relu") {
        layer.activation = Activation::kRelu;
      } else if (act == "identity") {
        layer.activation = Activation::kIdentity;
      } else {
        throw fail("unknown activation '" + act + "'");
      }
      const auto& rows = jl.at("weights");
      layer.out = static_cast<int>(rows.size());
      layer.in = layer.out > 0 ? static_cast<int>(rows[0].size()) : 0;
      for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != layer.in) throw fail("ragged weight rows");
        for (const auto& w : row) {
          if (!w.is_number()) throw fail("non-numeric weight");
          layer.weights.push_back(w.get<double>());
        }
      }
      for (const auto& b : jl.at("biases")) {
        if (!b.is_number()) throw fail("non-numeric bias");
        layer.biases.push_back(b.get<double>());
      }
      layers.push_back(std::move(layer));
    }
    const std::uint64_t seed = j.value("init_seed", std::uint64_t{0});
    MlpModel model(std::move(layers), seed);
    if (model.input_dim() != input_dim || model.class_count() != class_count) {
      throw fail("declared dimensions do not match layer shapes");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kLoadError) throw;
    throw fail(e.what());
  }
}

void SaveMlp(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kLoadError, "cannot write " + path);
  out << MlpToJson(model).dump(1) << "\n";
}

MlpModel LoadMlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kLoadError, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kLoadError, path + ": " + e.what());
  }
  return MlpFromJson(j);
}

}  // namespace qge
