// Copyright 2026 The ToOT Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small convolutional classifier with a maskable global-average-pooling head.
//
// Layout: three stride-2 3x3 conv blocks (widths w, 2w, 4w) take the input
// down by 8x onto the S x S grid, then one stride-1 3x3 conv produces the C
// final feature maps. Every conv is followed by a leaky ReLU. The final
// activations are multiplied by an optional layer mask, averaged per channel
// and fed to a 2-way fully connected layer with softmax.
//
// All activations are stored channel-major across the batch, [C][N][H*W], so
// that each convolution is one GEMM over the whole batch.

#ifndef TOOT_CORE_NN_HPP
#define TOOT_CORE_NN_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "image.hpp"
#include "masking.hpp"

namespace toot {

enum class Label : int { kNegative = 0, kPositive = 1 };

inline int index_of(Label l) { return static_cast<int>(l); }
const char* to_string(Label l);

struct ArchConfig {
  int input_side = 56;
  int grid_side = 7;
  int base_width = 8;
  int channels = 32;
  int classes = 2;
  double leaky_slope = 0.1;

  /// Default layout for a given grid: input side 8 * S.
  static ArchConfig for_grid(int grid_side);

  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

struct ParamBlock {
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int in_side = 0;
  int out_side = 0;
  int stride = 1;
  ParamBlock weight;  // [out][in][3][3]
  ParamBlock bias;    // [out]
};

struct NetworkLayout {
  std::vector<ConvLayer> convs;
  ParamBlock fc_weight;  // [classes][C]
  ParamBlock fc_bias;    // [classes]
  std::size_t param_count = 0;

  static NetworkLayout build(const ArchConfig& arch);
};

/// Weights plus Adadelta accumulators, all in one flat parameter order.
struct ModelState {
  ArchConfig arch;
  std::vector<double> params;
  std::vector<double> accum_grad_sq;   // E[g^2]
  std::vector<double> accum_delta_sq;  // E[dx^2]
  std::uint64_t version = 0;

  NetworkLayout layout() const { return NetworkLayout::build(arch); }
  bool operator==(const ModelState&) const = default;
};

struct TrainingExample {
  std::shared_ptr<const PlanarImage> image;
  Label label = Label::kNegative;
  std::shared_ptr<const LayerMask> mask;  // null means all-ones
};

/// Everything computed by one forward pass over a batch, kept for backprop.
struct ForwardRecord {
  int batch = 0;
  int channels = 0;
  int grid_side = 0;
  std::vector<double> input;                 // [3][N][H*W]
  std::vector<std::vector<double>> columns;  // im2col buffer per conv layer
  std::vector<std::vector<double>> pre;      // conv outputs before activation
  std::vector<std::vector<double>> post;     // conv outputs after leaky ReLU
  std::vector<const LayerMask*> masks;       // per example, null means all-ones
  std::vector<double> masked;                // [C][N][S*S]
  std::vector<double> gap;                   // [N][C]
  std::vector<double> logits;                // [N][classes]
  std::vector<double> probs;                 // [N][classes]

  /// Final conv activations for example n, C x S x S, post-activation, pre-mask.
  std::vector<double> final_activations(int n) const;
  std::vector<double> masked_activations(int n) const;
  std::pair<double, double> logit_pair(int n) const;
  std::pair<double, double> prob_pair(int n) const;
};

struct Gradients {
  std::vector<double> params;         // same layout as ModelState::params
  std::vector<double> feature_grads;  // dL/d(final activations) [C][N][S*S]
  double loss = 0.0;

  /// dL/d(final activation) for example n at (channel, x, y).
  double feature_grad(const ForwardRecord& rec, int n, int c, int x, int y) const;
};

ModelState init_model(const ArchConfig& arch, std::uint64_t seed);

ForwardRecord forward_batch(const ModelState& model, std::span<const TrainingExample> batch);
ForwardRecord forward(const ModelState& model, const TrainingExample& example);

/// Mean softmax cross-entropy gradient over the batch.
Gradients backward(const ModelState& model, std::span<const TrainingExample> batch);
Gradients backward_from(const ModelState& model, std::span<const TrainingExample> batch,
                        const ForwardRecord& record);

struct AdadeltaConfig {
  double rho = 0.95;
  double epsilon = 1e-6;
};

/// Standard Adadelta ordering: E[g^2] first, step from the previous E[dx^2], then
/// E[dx^2]. Throws kNumeric (leaving the model untouched) on non-finite grads.
void adadelta_step(ModelState& model, const Gradients& grads, const AdadeltaConfig& cfg = {});

/// One full training round: forward, backward, update. Returns the loss.
double train_step(ModelState& model, std::span<const TrainingExample> batch,
                  const AdadeltaConfig& cfg = {});

/// Class activation map: sum over channels of fc weight times final
/// activations, unmasked and unnormalized, row-major S x S.
std::vector<double> cam_map(const ModelState& model, const PlanarImage& image, int class_index);

struct Prediction {
  Label label = Label::kNegative;
  double confidence = 0.0;
  double positive = 0.0;
  double negative = 0.0;
};

/// Ties go to the negative class.
Prediction predict(const ModelState& model, const PlanarImage& image);

/// A fixed image set with its first-layer patches precomputed, for repeated
/// evaluation against changing weights (the test set of a session).
class EvalSet {
 public:
  EvalSet(const ArchConfig& arch, std::vector<std::shared_ptr<const PlanarImage>> images);

  std::size_t size() const { return images_.size(); }
  const std::vector<std::shared_ptr<const PlanarImage>>& images() const { return images_; }

 private:
  friend std::vector<Prediction> predict_many(const ModelState& model, const EvalSet& set);

  ArchConfig arch_;
  std::vector<std::shared_ptr<const PlanarImage>> images_;
  std::vector<std::vector<double>> chunk_columns_;
  std::vector<int> chunk_sizes_;
};

/// Batched prediction, evaluated in fixed-size chunks.
std::vector<Prediction> predict_many(const ModelState& model, const EvalSet& set);
std::vector<Prediction> predict_many(const ModelState& model,
                                     std::span<const std::shared_ptr<const PlanarImage>> images);

// Checkpoints: "TOOTCKPT" magic, u32 format version, arch, version, then the
// three parameter-order arrays as raw little-endian IEEE doubles.
void save_checkpoint(const ModelState& model, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_checkpoint(const ModelState& model);
ModelState deserialize_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace toot

#endif  // TOOT_CORE_NN_HPP
