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

#include "nn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "error.hpp"

namespace toot {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;
constexpr int kPredictChunk = 50;

// Gathers 3x3 patches (zero padding 1) into a [Cin*9][N*out_hw] matrix.
void im2col(const std::vector<double>& in, const ConvLayer& L, int batch,
            std::vector<double>& cols) {
  const int in_side = L.in_side;
  const int out_side = L.out_side;
  const int stride = L.stride;
  const std::size_t in_hw = std::size_t(in_side) * in_side;
  const std::size_t out_hw = std::size_t(out_side) * out_side;
  const std::size_t width = out_hw * batch;
  cols.resize(std::size_t(L.in_channels) * kTaps * width);
  for (int ci = 0; ci < L.in_channels; ++ci) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        double* row = &cols[(std::size_t(ci) * kTaps + ky * kKernel + kx) * width];
        // Output columns whose input column ix = ox*stride + kx - 1 is in range.
        int ox_lo = 0;
        while (ox_lo * stride + kx - 1 < 0) ++ox_lo;
        int ox_hi = out_side;
        while (ox_hi > ox_lo && (ox_hi - 1) * stride + kx - 1 >= in_side) --ox_hi;
        for (int n = 0; n < batch; ++n) {
          const double* src = &in[(std::size_t(ci) * batch + n) * in_hw];
          double* dst = row + n * out_hw;
          for (int oy = 0; oy < out_side; ++oy) {
            double* out = dst + oy * out_side;
            const int iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= in_side) {
              std::fill(out, out + out_side, 0.0);
              continue;
            }
            std::fill(out, out + ox_lo, 0.0);
            std::fill(out + ox_hi, out + out_side, 0.0);
            const double* line = src + std::size_t(iy) * in_side + kx - 1;
            for (int ox = ox_lo; ox < ox_hi; ++ox) out[ox] = line[ox * stride];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the input grid.
void col2im(const std::vector<double>& cols, const ConvLayer& L, int batch,
            std::vector<double>& in_grad) {
  const int in_side = L.in_side;
  const int out_side = L.out_side;
  const std::size_t in_hw = std::size_t(in_side) * in_side;
  const std::size_t out_hw = std::size_t(out_side) * out_side;
  const std::size_t width = out_hw * batch;
  in_grad.assign(std::size_t(L.in_channels) * batch * in_hw, 0.0);
  for (int ci = 0; ci < L.in_channels; ++ci) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const double* row = &cols[(std::size_t(ci) * kTaps + ky * kKernel + kx) * width];
        for (int n = 0; n < batch; ++n) {
          double* dst = &in_grad[(std::size_t(ci) * batch + n) * in_hw];
          const double* src = row + n * out_hw;
          for (int oy = 0; oy < out_side; ++oy) {
            const int iy = oy * L.stride + ky - 1;
            if (iy < 0 || iy >= in_side) continue;
            for (int ox = 0; ox < out_side; ++ox) {
              const int ix = ox * L.stride + kx - 1;
              if (ix < 0 || ix >= in_side) continue;
              dst[iy * in_side + ix] += src[oy * out_side + ox];
            }
          }
        }
      }
    }
  }
}

void conv_forward(const ModelState& model, const ConvLayer& L, int batch,
                  const std::vector<double>& cols, std::vector<double>& out) {
  const Eigen::Index k = Eigen::Index(L.in_channels) * kTaps;
  const Eigen::Index m = Eigen::Index(L.out_side) * L.out_side * batch;
  out.resize(std::size_t(L.out_channels) * m);
  ConstMatMap w(model.params.data() + L.weight.offset, L.out_channels, k);
  ConstMatMap x(cols.data(), k, m);
  MatMap z(out.data(), L.out_channels, m);
  z.noalias() = w * x;
  for (int co = 0; co < L.out_channels; ++co) {
    z.row(co).array() += model.params[L.bias.offset + co];
  }
}

void check_example(const ArchConfig& arch, const TrainingExample& ex) {
  if (ex.image == nullptr) fail(ErrorKind::kUsage, "training example has no image");
  if (ex.image->width != arch.input_side || ex.image->height != arch.input_side ||
      ex.image->data.size() != std::size_t(3) * arch.input_side * arch.input_side) {
    fail(ErrorKind::kUsage, "image is " + std::to_string(ex.image->width) + "x" +
                                std::to_string(ex.image->height) + ", model expects " +
                                std::to_string(arch.input_side));
  }
  for (float v : ex.image->data) {
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "non-finite input pixel");
  }
  if (ex.mask && ex.mask->side() != arch.grid_side) {
    fail(ErrorKind::kUsage, "mask side " + std::to_string(ex.mask->side()) +
                                " does not match grid side " + std::to_string(arch.grid_side));
  }
}

// Runs the network from the layer-0 patch matrix onwards. `first_columns`
// overrides rec.columns[0] when the caller has patches precomputed.
void forward_core(const ModelState& model, const NetworkLayout& layout, int n_batch,
                  const std::vector<double>* first_columns, ForwardRecord& rec) {
  const ArchConfig& arch = model.arch;
  const std::size_t n_layers = layout.convs.size();
  rec.columns.resize(n_layers);
  rec.pre.resize(n_layers);
  rec.post.resize(n_layers);
  const double alpha = arch.leaky_slope;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const ConvLayer& L = layout.convs[l];
    const std::vector<double>* cols = &rec.columns[l];
    if (l == 0 && first_columns != nullptr) {
      cols = first_columns;
    } else {
      im2col(l == 0 ? rec.input : rec.post[l - 1], L, n_batch, rec.columns[l]);
    }
    conv_forward(model, L, n_batch, *cols, rec.pre[l]);
    rec.post[l].resize(rec.pre[l].size());
    for (std::size_t i = 0; i < rec.pre[l].size(); ++i) {
      const double z = rec.pre[l][i];
      rec.post[l][i] = z > 0.0 ? z : alpha * z;
    }
  }

  const int C = arch.channels;
  const std::size_t cells = std::size_t(arch.grid_side) * arch.grid_side;
  const std::vector<double>& act = rec.post.back();
  rec.masked = act;
  for (int n = 0; n < n_batch; ++n) {
    if (rec.masks[n] == nullptr) continue;
    const auto& m = rec.masks[n]->grid.values;
    for (int c = 0; c < C; ++c) {
      double* row = &rec.masked[(std::size_t(c) * n_batch + n) * cells];
      for (std::size_t k = 0; k < cells; ++k) row[k] *= m[k];
    }
  }

  rec.gap.assign(std::size_t(n_batch) * C, 0.0);
  for (int c = 0; c < C; ++c) {
    for (int n = 0; n < n_batch; ++n) {
      const double* row = &rec.masked[(std::size_t(c) * n_batch + n) * cells];
      double s = 0.0;
      for (std::size_t k = 0; k < cells; ++k) s += row[k];
      rec.gap[std::size_t(n) * C + c] = s / double(cells);
    }
  }

  const int K = arch.classes;
  rec.logits.assign(std::size_t(n_batch) * K, 0.0);
  rec.probs.assign(std::size_t(n_batch) * K, 0.0);
  const double* fw = model.params.data() + layout.fc_weight.offset;
  const double* fb = model.params.data() + layout.fc_bias.offset;
  for (int n = 0; n < n_batch; ++n) {
    double* lg = &rec.logits[std::size_t(n) * K];
    for (int k = 0; k < K; ++k) {
      double s = fb[k];
      for (int c = 0; c < C; ++c) s += fw[std::size_t(k) * C + c] * rec.gap[std::size_t(n) * C + c];
      lg[k] = s;
    }
    const double mx = *std::max_element(lg, lg + K);
    double z = 0.0;
    double* pr = &rec.probs[std::size_t(n) * K];
    for (int k = 0; k < K; ++k) {
      pr[k] = std::exp(lg[k] - mx);
      z += pr[k];
    }
    for (int k = 0; k < K; ++k) pr[k] /= z;
  }
}

void stack_inputs(std::span<const std::shared_ptr<const PlanarImage>> images, int side,
                  std::vector<double>& out) {
  const int n_batch = int(images.size());
  const std::size_t in_hw = std::size_t(side) * side;
  out.resize(3 * n_batch * in_hw);
  for (int n = 0; n < n_batch; ++n) {
    const auto& data = images[n]->data;
    for (int c = 0; c < 3; ++c) {
      std::transform(data.begin() + c * in_hw, data.begin() + (c + 1) * in_hw,
                     out.begin() + (std::size_t(c) * n_batch + n) * in_hw,
                     [](float v) { return double(v) - 0.5; });
    }
  }
}

// Fills `rec`, reusing its buffers' capacity.
void run_forward_into(const ModelState& model, std::span<const TrainingExample> batch,
                      ForwardRecord& rec) {
  const ArchConfig& arch = model.arch;
  const NetworkLayout layout = model.layout();
  const int n_batch = int(batch.size());
  require(n_batch > 0, ErrorKind::kUsage, "empty batch");
  for (const auto& ex : batch) check_example(arch, ex);

  rec.batch = n_batch;
  rec.channels = arch.channels;
  rec.grid_side = arch.grid_side;
  std::vector<std::shared_ptr<const PlanarImage>> images;
  images.reserve(batch.size());
  rec.masks.resize(n_batch);
  for (int n = 0; n < n_batch; ++n) {
    images.push_back(batch[n].image);
    rec.masks[n] = batch[n].mask.get();
  }
  stack_inputs(images, arch.input_side, rec.input);
  forward_core(model, layout, n_batch, nullptr, rec);
}

ForwardRecord run_forward(const ModelState& model, std::span<const TrainingExample> batch) {
  ForwardRecord rec;
  run_forward_into(model, batch, rec);
  return rec;
}

// Per-thread record reused by the inference-only paths.
ForwardRecord& scratch_record() {
  thread_local ForwardRecord rec;
  return rec;
}

}  // namespace

const char* to_string(Label l) { return l == Label::kPositive ? "positive" : "negative"; }

ArchConfig ArchConfig::for_grid(int grid_side) {
  ArchConfig a;
  a.grid_side = grid_side;
  a.input_side = grid_side * 8;
  return a;
}

void ArchConfig::validate() const {
  require(grid_side >= 4, ErrorKind::kConfig, "grid side must be >= 4");
  require(input_side == grid_side * 8, ErrorKind::kConfig,
          "input side " + std::to_string(input_side) + " does not downsample (x8) onto a " +
              std::to_string(grid_side) + "-cell grid");
  require(base_width >= 1 && channels >= 1, ErrorKind::kConfig, "channel counts must be >= 1");
  require(classes == 2, ErrorKind::kConfig, "class count is fixed at 2");
  require(leaky_slope > 0.0 && leaky_slope < 1.0, ErrorKind::kConfig,
          "leaky slope must lie in (0,1)");
}

NetworkLayout NetworkLayout::build(const ArchConfig& arch) {
  arch.validate();
  NetworkLayout layout;
  std::size_t offset = 0;
  auto block = [&offset](std::size_t size) {
    ParamBlock b{offset, size};
    offset += size;
    return b;
  };
  const int widths[] = {arch.base_width, arch.base_width * 2, arch.base_width * 4};
  int in_ch = 3;
  int side = arch.input_side;
  for (int w : widths) {
    ConvLayer L;
    L.in_channels = in_ch;
    L.out_channels = w;
    L.in_side = side;
    L.out_side = side / 2;
    L.stride = 2;
    L.weight = block(std::size_t(w) * in_ch * kTaps);
    L.bias = block(std::size_t(w));
    layout.convs.push_back(L);
    in_ch = w;
    side /= 2;
  }
  ConvLayer last;
  last.in_channels = in_ch;
  last.out_channels = arch.channels;
  last.in_side = side;
  last.out_side = side;
  last.stride = 1;
  last.weight = block(std::size_t(arch.channels) * in_ch * kTaps);
  last.bias = block(std::size_t(arch.channels));
  layout.convs.push_back(last);
  layout.fc_weight = block(std::size_t(arch.classes) * arch.channels);
  layout.fc_bias = block(std::size_t(arch.classes));
  layout.param_count = offset;
  return layout;
}

std::vector<double> ForwardRecord::final_activations(int n) const {
  const std::size_t cells = std::size_t(grid_side) * grid_side;
  std::vector<double> out(std::size_t(channels) * cells);
  for (int c = 0; c < channels; ++c) {
    std::copy_n(&post.back()[(std::size_t(c) * batch + n) * cells], cells, &out[c * cells]);
  }
  return out;
}

std::vector<double> ForwardRecord::masked_activations(int n) const {
  const std::size_t cells = std::size_t(grid_side) * grid_side;
  std::vector<double> out(std::size_t(channels) * cells);
  for (int c = 0; c < channels; ++c) {
    std::copy_n(&masked[(std::size_t(c) * batch + n) * cells], cells, &out[c * cells]);
  }
  return out;
}

std::pair<double, double> ForwardRecord::logit_pair(int n) const {
  return {logits[std::size_t(n) * 2], logits[std::size_t(n) * 2 + 1]};
}

std::pair<double, double> ForwardRecord::prob_pair(int n) const {
  return {probs[std::size_t(n) * 2], probs[std::size_t(n) * 2 + 1]};
}

double Gradients::feature_grad(const ForwardRecord& rec, int n, int c, int x, int y) const {
  const std::size_t cells = std::size_t(rec.grid_side) * rec.grid_side;
  return feature_grads[(std::size_t(c) * rec.batch + n) * cells + std::size_t(y) * rec.grid_side + x];
}

ModelState init_model(const ArchConfig& arch, std::uint64_t seed) {
  const NetworkLayout layout = NetworkLayout::build(arch);
  ModelState m;
  m.arch = arch;
  m.params.assign(layout.param_count, 0.0);
  m.accum_grad_sq.assign(layout.param_count, 0.0);
  m.accum_delta_sq.assign(layout.param_count, 0.0);
  m.version = 0;

  std::mt19937_64 rng(seed);
  const double gain = 2.0 / (1.0 + arch.leaky_slope * arch.leaky_slope);
  for (const ConvLayer& L : layout.convs) {
    const double fan_in = double(L.in_channels) * kTaps;
    std::normal_distribution<double> dist(0.0, std::sqrt(gain / fan_in));
    for (std::size_t i = 0; i < L.weight.size; ++i) m.params[L.weight.offset + i] = dist(rng);
  }
  std::normal_distribution<double> fc(0.0, std::sqrt(1.0 / arch.channels));
  for (std::size_t i = 0; i < layout.fc_weight.size; ++i) {
    m.params[layout.fc_weight.offset + i] = fc(rng);
  }
  return m;
}

ForwardRecord forward_batch(const ModelState& model, std::span<const TrainingExample> batch) {
  return run_forward(model, batch);
}

ForwardRecord forward(const ModelState& model, const TrainingExample& example) {
  return run_forward(model, std::span<const TrainingExample>(&example, 1));
}

Gradients backward(const ModelState& model, std::span<const TrainingExample> batch) {
  require(!batch.empty(), ErrorKind::kUsage, "backward requires a nonempty batch");
  const ForwardRecord rec = run_forward(model, batch);
  return backward_from(model, batch, rec);
}

Gradients backward_from(const ModelState& model, std::span<const TrainingExample> batch,
                        const ForwardRecord& rec) {
  require(!batch.empty(), ErrorKind::kUsage, "backward requires a nonempty batch");
  require(int(batch.size()) == rec.batch, ErrorKind::kUsage, "record/batch size mismatch");
  const ArchConfig& arch = model.arch;
  const NetworkLayout layout = model.layout();
  const int N = rec.batch;
  const int C = arch.channels;
  const int K = arch.classes;
  const std::size_t cells = std::size_t(arch.grid_side) * arch.grid_side;

  Gradients g;
  g.params.assign(layout.param_count, 0.0);

  // Softmax cross-entropy, averaged over the batch.
  std::vector<double> dlogits(std::size_t(N) * K);
  double loss = 0.0;
  for (int n = 0; n < N; ++n) {
    const int y = index_of(batch[n].label);
    loss -= std::log(std::max(rec.probs[std::size_t(n) * K + y], 1e-300));
    for (int k = 0; k < K; ++k) {
      dlogits[std::size_t(n) * K + k] =
          (rec.probs[std::size_t(n) * K + k] - (k == y ? 1.0 : 0.0)) / double(N);
    }
  }
  g.loss = loss / double(N);

  const double* fw = model.params.data() + layout.fc_weight.offset;
  double* dfw = g.params.data() + layout.fc_weight.offset;
  double* dfb = g.params.data() + layout.fc_bias.offset;
  std::vector<double> dgap(std::size_t(N) * C, 0.0);
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      const double d = dlogits[std::size_t(n) * K + k];
      dfb[k] += d;
      for (int c = 0; c < C; ++c) {
        dfw[std::size_t(k) * C + c] += d * rec.gap[std::size_t(n) * C + c];
        dgap[std::size_t(n) * C + c] += fw[std::size_t(k) * C + c] * d;
      }
    }
  }

  // GAP then mask: dL/dA = dgap / cells * mask.
  g.feature_grads.assign(std::size_t(C) * N * cells, 0.0);
  for (int c = 0; c < C; ++c) {
    for (int n = 0; n < N; ++n) {
      const double d = dgap[std::size_t(n) * C + c] / double(cells);
      double* row = &g.feature_grads[(std::size_t(c) * N + n) * cells];
      const LayerMask* mask = rec.masks[n];
      for (std::size_t k = 0; k < cells; ++k) {
        row[k] = mask == nullptr ? d : d * mask->grid.values[k];
      }
    }
  }

  std::vector<double> dact = g.feature_grads;
  std::vector<double> dz;
  std::vector<double> dcols;
  const double alpha = arch.leaky_slope;
  for (std::size_t li = layout.convs.size(); li-- > 0;) {
    const ConvLayer& L = layout.convs[li];
    const std::vector<double>& pre = rec.pre[li];
    dz.resize(dact.size());
    for (std::size_t i = 0; i < dact.size(); ++i) {
      dz[i] = pre[i] > 0.0 ? dact[i] : alpha * dact[i];
    }
    const Eigen::Index kdim = Eigen::Index(L.in_channels) * kTaps;
    const Eigen::Index m = Eigen::Index(L.out_side) * L.out_side * N;
    ConstMatMap dzm(dz.data(), L.out_channels, m);
    ConstMatMap cols(rec.columns[li].data(), kdim, m);
    MatMap dw(g.params.data() + L.weight.offset, L.out_channels, kdim);
    dw.noalias() = dzm * cols.transpose();
    // Plain loop: Eigen's vectorized sum peels by pointer alignment, which
    // makes the rounding depend on where the buffer landed.
    for (int co = 0; co < L.out_channels; ++co) {
      const double* row = dz.data() + std::size_t(co) * m;
      double s = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) s += row[j];
      g.params[L.bias.offset + co] = s;
    }
    if (li == 0) break;
    ConstMatMap w(model.params.data() + L.weight.offset, L.out_channels, kdim);
    dcols.resize(std::size_t(kdim) * m);
    MatMap dcm(dcols.data(), kdim, m);
    dcm.noalias() = w.transpose() * dzm;
    col2im(dcols, L, N, dact);
  }
  return g;
}

void adadelta_step(ModelState& model, const Gradients& grads, const AdadeltaConfig& cfg) {
  require(cfg.rho > 0.0 && cfg.rho < 1.0, ErrorKind::kUsage, "rho must lie in (0,1)");
  require(cfg.epsilon > 0.0, ErrorKind::kUsage, "epsilon must be positive");
  require(grads.params.size() == model.params.size(), ErrorKind::kUsage,
          "gradient/parameter size mismatch");
  for (double v : grads.params) {
    require(std::isfinite(v), ErrorKind::kNumeric, "non-finite gradient; update rejected");
  }
  const double rho = cfg.rho;
  const double eps = cfg.epsilon;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const double gi = grads.params[i];
    double& eg = model.accum_grad_sq[i];
    double& edx = model.accum_delta_sq[i];
    eg = rho * eg + (1.0 - rho) * gi * gi;
    const double dx = -(std::sqrt(edx + eps) / std::sqrt(eg + eps)) * gi;
    edx = rho * edx + (1.0 - rho) * dx * dx;
    model.params[i] += dx;
  }
  ++model.version;
}

double train_step(ModelState& model, std::span<const TrainingExample> batch,
                  const AdadeltaConfig& cfg) {
  const Gradients g = backward(model, batch);
  adadelta_step(model, g, cfg);
  return g.loss;
}

std::vector<double> cam_map(const ModelState& model, const PlanarImage& image, int class_index) {
  require(class_index >= 0 && class_index < model.arch.classes, ErrorKind::kUsage,
          "class index out of range");
  TrainingExample ex{std::make_shared<PlanarImage>(image), Label::kNegative, nullptr};
  ForwardRecord& rec = scratch_record();
  run_forward_into(model, std::span<const TrainingExample>(&ex, 1), rec);
  const NetworkLayout layout = model.layout();
  const int C = model.arch.channels;
  const std::size_t cells = std::size_t(model.arch.grid_side) * model.arch.grid_side;
  const double* fw = model.params.data() + layout.fc_weight.offset + std::size_t(class_index) * C;
  std::vector<double> cam(cells, 0.0);
  for (int c = 0; c < C; ++c) {
    const double* a = &rec.post.back()[std::size_t(c) * cells];
    for (std::size_t k = 0; k < cells; ++k) cam[k] += fw[c] * a[k];
  }
  return cam;
}

namespace {

Prediction from_probs(double p_neg, double p_pos) {
  Prediction p;
  p.negative = p_neg;
  p.positive = p_pos;
  if (p_pos > p_neg) {
    p.label = Label::kPositive;
    p.confidence = p_pos;
  } else {
    p.label = Label::kNegative;
    p.confidence = p_neg;
  }
  return p;
}

}  // namespace

Prediction predict(const ModelState& model, const PlanarImage& image) {
  TrainingExample ex{std::make_shared<PlanarImage>(image), Label::kNegative, nullptr};
  ForwardRecord& rec = scratch_record();
  run_forward_into(model, std::span<const TrainingExample>(&ex, 1), rec);
  return from_probs(rec.probs[0], rec.probs[1]);
}

EvalSet::EvalSet(const ArchConfig& arch, std::vector<std::shared_ptr<const PlanarImage>> images)
    : arch_(arch), images_(std::move(images)) {
  const NetworkLayout layout = NetworkLayout::build(arch_);
  std::vector<double> stacked;
  for (std::size_t start = 0; start < images_.size(); start += kPredictChunk) {
    const std::size_t end = std::min(images_.size(), start + kPredictChunk);
    for (std::size_t i = start; i < end; ++i) {
      check_example(arch_, TrainingExample{images_[i], Label::kNegative, nullptr});
    }
    const std::span<const std::shared_ptr<const PlanarImage>> chunk(images_.data() + start,
                                                                    end - start);
    stack_inputs(chunk, arch_.input_side, stacked);
    chunk_columns_.emplace_back();
    im2col(stacked, layout.convs[0], int(chunk.size()), chunk_columns_.back());
    chunk_sizes_.push_back(int(chunk.size()));
  }
}

std::vector<Prediction> predict_many(const ModelState& model, const EvalSet& set) {
  require(model.arch.input_side == set.arch_.input_side &&
              model.arch.base_width == set.arch_.base_width,
          ErrorKind::kUsage, "evaluation set was prepared for a different architecture");
  const NetworkLayout layout = model.layout();
  std::vector<Prediction> out;
  out.reserve(set.size());
  ForwardRecord& rec = scratch_record();
  for (std::size_t c = 0; c < set.chunk_columns_.size(); ++c) {
    const int n_batch = set.chunk_sizes_[c];
    rec.batch = n_batch;
    rec.channels = model.arch.channels;
    rec.grid_side = model.arch.grid_side;
    rec.masks.assign(n_batch, nullptr);
    forward_core(model, layout, n_batch, &set.chunk_columns_[c], rec);
    for (int n = 0; n < n_batch; ++n) {
      out.push_back(from_probs(rec.probs[std::size_t(n) * 2], rec.probs[std::size_t(n) * 2 + 1]));
    }
  }
  return out;
}

std::vector<Prediction> predict_many(const ModelState& model,
                                     std::span<const std::shared_ptr<const PlanarImage>> images) {
  EvalSet set(model.arch, {images.begin(), images.end()});
  return predict_many(model, set);
}

}  // namespace toot
