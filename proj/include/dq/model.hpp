/* Copyright 2026 The DeepQuarantine Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef DQ_MODEL_HPP_
#define DQ_MODEL_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dq/encode.hpp"
#include "dq/tensor.hpp"

// The two-branch header classifier: a character CNN over the Message-ID, a
// header-name CNN pooled over time, and the mail-client one-hot, concatenated
// into a two-layer dense head with a sigmoid output.

namespace dq {

struct ModelConfig {
  int l = 64;  // Message-ID input length, characters
  int char_embed_dim = 16;
  int header_embed_dim = 16;
  int msgid_filters = 64;
  // Largest kernel first; each conv is followed by a ReLU.
  std::vector<int> msgid_kernel_sizes{7, 5, 3, 3};
  // 1-based conv indices followed by a max pool.
  std::vector<int> msgid_pool_after{1, 4};
  int msgid_pool_window = 3;
  int msgid_pool_stride = 3;
  int header_filters = 64;
  int header_kernel_size = 3;
  int dense_hidden = 128;
  double dropout_rate = 0.5;
  // Width of the mail-client one-hot; 0 means "take it from the table at
  // build time".
  int mua_dim = 0;
};

struct TrainConfig {
  int epochs = 9;
  double lr_initial = 0.01;
  int lr_halving_period = 3;  // epochs per halving
  double momentum = 0.9;
  int batch_size = 128;
  std::uint64_t seed = 1;
};

struct ConvParams {
  Tensor2 w;  // F x (K*E)
  Tensor2 b;  // 1 x F
};

struct DenseParams {
  Tensor2 w;  // Out x In
  Tensor2 b;  // 1 x Out
};

struct ModelParams {
  Tensor2 char_embed;
  std::vector<ConvParams> msgid_convs;
  Tensor2 header_embed;
  ConvParams header_conv;
  DenseParams dense1;
  DenseParams dense2;
};

struct NamedTensor {
  std::string name;
  Tensor2* tensor;
};

struct NamedTensorConst {
  std::string name;
  const Tensor2* tensor;
};

// Stable enumeration of every parameter tensor; the order defines the
// serialization layout and the optimizer traversal.
std::vector<NamedTensor> tensor_list(ModelParams& p);
std::vector<NamedTensorConst> tensor_list(const ModelParams& p);

// Same shapes, all zeros. Gradient and velocity buffers.
ModelParams zeros_like(const ModelParams& p);

struct TrainedModel {
  ModelConfig config;
  FeatureSpace features;
  ModelParams params;
  std::optional<double> threshold;  // quarantine decision boundary, in (0,1)
  std::string model_version;        // content hash of the parameters
  std::string train_fingerprint;    // content hash of the training set, "" if untrained
};

enum class Mode { kInfer, kTrain };

// Validates the shape algebra of cfg against the vocabularies (the error
// names the first layer whose geometry fails) and initializes parameters:
// weights from N(0, 0.05^2) drawn in tensor_list order off one seeded
// generator, biases zero.
TrainedModel build_model(const ModelConfig& cfg, FeatureSpace features,
                         std::uint64_t seed);

// Spam probability in (0,1). Train mode applies inverted dropout with a mask
// drawn from dropout_seed; infer mode is deterministic.
double forward(const TrainedModel& m, const EncodedExample& x,
               Mode mode = Mode::kInfer, std::uint64_t dropout_seed = 0);

// Elementwise infer-mode forward, order-preserving.
std::vector<double> predict_batch(const TrainedModel& m,
                                  std::span<const EncodedExample> xs);

// Forward returning the pre-sigmoid logit under a fixed dropout mask (empty
// mask = no dropout). The deterministic entry point for gradient checks.
double forward_logit(const TrainedModel& m, const EncodedExample& x,
                     std::span<const double> mask);

// forward_logit plus a backward pass seeded with d_logit; parameter gradients
// accumulate into grads (shaped with zeros_like). Returns the logit.
double backprop_logit(const TrainedModel& m, const EncodedExample& x,
                      std::span<const double> mask, double d_logit,
                      ModelParams& grads);

struct EpochStats {
  int epoch;  // 1-based
  double lr;
  double mean_loss;
  double accuracy;
};

// Mini-batch SGD with momentum over seeded shuffles. The learning rate is
// lr_initial * 0.5^(epoch / lr_halving_period). Batch gradients are summed in
// ascending dataset-index order and dropout masks are keyed on (seed, epoch,
// dataset index), so membership of a batch, not its ordering, determines the
// step. Updates m in place and stamps model_version and train_fingerprint.
std::vector<EpochStats> train(TrainedModel& m,
                              std::span<const EncodedExample> dataset,
                              const TrainConfig& tc,
                              const std::function<void(const EpochStats&)>& on_epoch = {});

// Versioned text format; value-exact round trip for every parameter, the
// vocabularies, the threshold, and the identity strings.
void save_model(const TrainedModel& m, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace dq

#endif  // DQ_MODEL_HPP_
