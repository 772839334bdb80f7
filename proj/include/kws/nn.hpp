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

// Tensor-level layer operations. Shapes are channel-last: activations
// [h][w][c], conv weights [kh][kw][cin][cout], fc weights [cin][cout].
// All convolutions use SAME padding and carry no bias unless one is passed
// explicitly (folded models do).

#include <cstdint>
#include <optional>

#include "kws/nn_kernels.hpp"
#include "kws/rng.hpp"
#include "kws/tensor.hpp"

namespace kws::nn {

enum class Mode { Train, Infer };

Tensor conv2d_forward(const Tensor& x, const Tensor& w, int64_t stride_h,
                      int64_t stride_w, const Tensor* bias = nullptr);

// Temporal convolution: the h=1 special case on [t][1][c] inputs with
// [k][1][cin][cout] kernels. Shares the 2D path, so the two agree bitwise.
Tensor conv_temporal_forward(const Tensor& x, const Tensor& w, int64_t stride,
                             const Tensor* bias = nullptr);

struct ConvGrads {
  Tensor grad_x;
  Tensor grad_w;
};

ConvGrads conv_backward(const Tensor& x, const Tensor& w, int64_t stride_h,
                        int64_t stride_w, const Tensor& grad_out);

struct BatchNormParams {
  Tensor gamma, beta;
  Tensor moving_mean, moving_var;
  float epsilon = 1e-3f;
  float momentum = 0.99f;

  static BatchNormParams identity(int64_t channels);
};

struct BatchNormCache {
  Tensor xhat;
  Tensor batch_mean, batch_var;
  int64_t rows = 0;
};

// Channel = last axis; all leading axes are reduced in train mode. Train
// mode updates the moving statistics in place.
Tensor batchnorm_forward(const Tensor& x, BatchNormParams& params, Mode mode,
                         BatchNormCache* cache = nullptr);

struct BatchNormGrads {
  Tensor grad_x;
  Tensor grad_gamma, grad_beta;
};

BatchNormGrads batchnorm_backward(const Tensor& x, const BatchNormParams& params,
                                  const Tensor& grad_out);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

// Mean over every leading (spatial) axis, per channel; output keeps rank
// with all spatial dims collapsed to 1.
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& x, const Tensor& grad_out);

Tensor avg_pool2d(const Tensor& x, int64_t window = 4, int64_t stride = 4);
Tensor avg_pool2d_backward(const Tensor& x, const Tensor& grad_out,
                           int64_t window = 4, int64_t stride = 4);

Tensor fully_connected(const Tensor& x, const Tensor& w);

struct FcGrads {
  Tensor grad_x;
  Tensor grad_w;
};

FcGrads fully_connected_backward(const Tensor& x, const Tensor& w,
                                 const Tensor& grad_out);

struct DropoutResult {
  Tensor out;
  Tensor mask;  // 0 or 1/(1-p); empty in infer mode
};

DropoutResult dropout(const Tensor& x, float p, Mode mode, Pcg32& rng);

struct SceResult {
  float loss;
  Tensor grad_logits;
  Tensor probs;
};

SceResult softmax_cross_entropy(const Tensor& logits, int64_t label);

}  // namespace kws::nn
