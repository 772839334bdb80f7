// Copyright 2026 The kws Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kws/mfcc.hpp"
#include "kws/nn.hpp"
#include "kws/rng.hpp"
#include "kws/tensor.hpp"

namespace kws::model {

enum class Family { TcResnet, Resnet2d, Resnet2dPool };

std::string_view family_name(Family f);

struct ModelSpec {
  Family family = Family::TcResnet;
  int depth = 8;  // 8 or 14 (temporal family only)
  double width_multiplier = 1.0;
  int n_classes = 12;
  int input_t = 98;
  int input_f = 40;
};

// CLI spellings: tc-resnet8, tc-resnet14, 2d-resnet8, 2d-resnet8-pool, each
// with an optional width-multiplier suffix such as tc-resnet8-1.5.
std::optional<ModelSpec> spec_from_name(std::string_view name);
std::string spec_name(const ModelSpec& spec);

void validate_spec(const ModelSpec& spec);

// Round-half-up channel widths {c0, c1, c2, c3} from base {16, 24, 32, 48}.
int64_t scaled_channels(double k, int64_t base);
std::array<int64_t, 4> channel_schedule(const ModelSpec& spec);

struct BlockPlan {
  int64_t stride;  // applied to every strided spatial dim of the family
  int64_t cin, cout;
};

// Depth 8: strides {2,2,2} over {c1,c2,c3}. Depth 14: {2,1,2,1,2,1} with
// channel pairs {c1,c1,c2,c2,c3,c3}.
std::vector<BlockPlan> block_schedule(const ModelSpec& spec);

struct ConvLayer {
  std::string name;
  Tensor w;     // [kh][kw][cin][cout]
  Tensor bias;  // empty unless folded
  int64_t sh = 1, sw = 1;
  Tensor grad_w, grad_bias;
  Tensor cached_in;  // train-mode batched input
};

struct BnLayer {
  std::string name;
  nn::BatchNormParams p;
  Tensor grad_gamma, grad_beta;
  Tensor cached_xhat, cached_var;
  int64_t cached_rows = 0;
};

struct ResBlock {
  int64_t stride = 1;
  bool has_projection = false;
  ConvLayer conv1, conv2;
  BnLayer bn1, bn2;
  ConvLayer sc_conv;
  BnLayer sc_bn;
  // pre-activation caches for the three ReLUs and the residual add
  Tensor cached_b1, cached_bs, cached_sum;
};

struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;  // nullptr for moving statistics
  bool trainable;
};

class Model {
 public:
  Model(const ModelSpec& spec, uint64_t rng_seed);

  const ModelSpec& spec() const { return spec_; }
  bool folded() const { return folded_; }
  nn::Mode mode() const { return mode_; }
  void set_mode(nn::Mode mode);
  void set_dropout_p(float p) { dropout_p_ = p; }
  float dropout_p() const { return dropout_p_; }

  // Expected per-sample input shape [h][w][c]: temporal models consume
  // t x 1 x f, the 2D ablations t x f x 1.
  std::array<int64_t, 3> input_hwc() const;

  static Tensor input_from_mfcc(const features::MfccMatrix& m, const ModelSpec& spec);

  // input is [batch][h][w][c]; returns [batch][n_classes] logits.
  Tensor forward(const Tensor& input, Pcg32* dropout_rng = nullptr);
  Tensor forward_single(const Tensor& input, Pcg32* dropout_rng = nullptr);

  // Gradients of the scalar sum(grad_logits . logits); call after a
  // train-mode forward on the same batch.
  void backward(const Tensor& grad_logits);

  std::vector<ParamRef> params();
  int64_t param_scalar_count() const;
  void zero_grads();

  // Absorbs every BN layer into the preceding convolution; infer mode only.
  Model fold_batchnorm() const;

  std::vector<uint8_t> save_checkpoint() const;
  static Model load_checkpoint(std::span<const uint8_t> blob);
  void save_checkpoint_file(const std::string& path) const;
  static Model load_checkpoint_file(const std::string& path);

 private:
  struct Structure {};
  Model(Structure, const ModelSpec& spec, bool folded);  // zeroed structure

  void init_params(uint64_t rng_seed);
  Tensor block_forward(ResBlock& block, const Tensor& x);
  Tensor block_backward(ResBlock& block, const Tensor& grad_out);

  ModelSpec spec_;
  bool folded_ = false;
  nn::Mode mode_ = nn::Mode::Infer;
  float dropout_p_ = 0.5f;

  ConvLayer conv0_;
  BnLayer bn0_;
  bool pre_pool_ = false;  // avg_pool2d(4,4) after the first conv-BN-ReLU
  std::vector<ResBlock> blocks_;
  Tensor fc_w_, fc_grad_w_;

  // head caches
  Tensor cached_input_, cached_b0_, cached_pool_in_, cached_dropout_mask_,
      cached_fc_in_;
  std::vector<int64_t> gap_in_shape_;
};

}  // namespace kws::model
