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

#include "kws/nn.hpp"

#include <string>

namespace kws::nn {

namespace {

ConvGeom geometry_for(const Tensor& x, const Tensor& w, int64_t sh, int64_t sw) {
  if (x.rank() != 3) throw ShapeError("conv input must be rank 3 [h][w][c]");
  if (w.rank() != 4) throw ShapeError("conv weights must be rank 4 [kh][kw][cin][cout]");
  if (x.dim(2) != w.dim(2))
    throw ShapeError("conv channel mismatch: input has " + std::to_string(x.dim(2)) +
                     ", weights expect " + std::to_string(w.dim(2)));
  return conv_geometry(x.dim(0), x.dim(1), x.dim(2), w.dim(0), w.dim(1), w.dim(3), sh, sw);
}

int64_t channels_of(const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("tensor must have a channel axis");
  return x.dim(x.rank() - 1);
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, int64_t stride_h,
                      int64_t stride_w, const Tensor* bias) {
  ConvGeom g = geometry_for(x, w, stride_h, stride_w);
  if (bias != nullptr && bias->numel() != g.cout)
    throw ShapeError("conv bias length must equal output channels");
  Tensor out({g.out_h, g.out_w, g.cout});
  conv2d_forward<float>(g, x.ptr(), w.ptr(), bias == nullptr ? nullptr : bias->ptr(),
                        out.ptr());
  return out;
}

Tensor conv_temporal_forward(const Tensor& x, const Tensor& w, int64_t stride,
                             const Tensor* bias) {
  if (x.rank() != 3 || x.dim(1) != 1)
    throw ShapeError("temporal conv input must be [t][1][c]");
  if (w.rank() != 4 || w.dim(1) != 1)
    throw ShapeError("temporal conv weights must be [k][1][cin][cout]");
  return conv2d_forward(x, w, stride, 1, bias);
}

ConvGrads conv_backward(const Tensor& x, const Tensor& w, int64_t stride_h,
                        int64_t stride_w, const Tensor& grad_out) {
  ConvGeom g = geometry_for(x, w, stride_h, stride_w);
  if (grad_out.rank() != 3 || grad_out.dim(0) != g.out_h || grad_out.dim(1) != g.out_w ||
      grad_out.dim(2) != g.cout)
    throw ShapeError("conv grad_out shape does not match forward output");
  ConvGrads grads{Tensor(x.shape), Tensor(w.shape)};
  conv2d_backward<float>(g, x.ptr(), w.ptr(), grad_out.ptr(), grads.grad_x.ptr(),
                         grads.grad_w.ptr());
  return grads;
}

BatchNormParams BatchNormParams::identity(int64_t channels) {
  BatchNormParams p;
  p.gamma = Tensor({channels});
  p.gamma.fill(1.0f);
  p.beta = Tensor({channels});
  p.moving_mean = Tensor({channels});
  p.moving_var = Tensor({channels});
  p.moving_var.fill(1.0f);
  return p;
}

Tensor batchnorm_forward(const Tensor& x, BatchNormParams& params, Mode mode,
                         BatchNormCache* cache) {
  int64_t c = channels_of(x);
  if (params.gamma.numel() != c)
    throw ShapeError("batchnorm parameter length does not match channel count");
  int64_t rows = x.numel() / c;
  Tensor out(x.shape);
  if (mode == Mode::Infer) {
    batchnorm_forward_infer<float>(x.ptr(), rows, c, params.gamma.ptr(),
                                   params.beta.ptr(), params.moving_mean.ptr(),
                                   params.moving_var.ptr(), params.epsilon, out.ptr());
    return out;
  }
  Tensor xhat(x.shape), mean({c}), var({c});
  batchnorm_forward_train<float>(x.ptr(), rows, c, params.gamma.ptr(), params.beta.ptr(),
                                 params.epsilon, out.ptr(), xhat.ptr(), mean.ptr(),
                                 var.ptr());
  for (int64_t ch = 0; ch < c; ++ch) {
    params.moving_mean.data[ch] =
        params.momentum * params.moving_mean.data[ch] + (1.0f - params.momentum) * mean.data[ch];
    params.moving_var.data[ch] =
        params.momentum * params.moving_var.data[ch] + (1.0f - params.momentum) * var.data[ch];
  }
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->batch_mean = std::move(mean);
    cache->batch_var = std::move(var);
    cache->rows = rows;
  }
  return out;
}

BatchNormGrads batchnorm_backward(const Tensor& x, const BatchNormParams& params,
                                  const Tensor& grad_out) {
  int64_t c = channels_of(x);
  if (!x.same_shape(grad_out)) throw ShapeError("batchnorm grad_out shape mismatch");
  int64_t rows = x.numel() / c;
  // Recompute the batch statistics the forward pass would have used.
  Tensor out(x.shape), xhat(x.shape), mean({c}), var({c});
  batchnorm_forward_train<float>(x.ptr(), rows, c, params.gamma.ptr(), params.beta.ptr(),
                                 params.epsilon, out.ptr(), xhat.ptr(), mean.ptr(),
                                 var.ptr());
  BatchNormGrads g{Tensor(x.shape), Tensor({c}), Tensor({c})};
  batchnorm_backward<float>(xhat.ptr(), grad_out.ptr(), rows, c, params.gamma.ptr(),
                            var.ptr(), params.epsilon, g.grad_x.ptr(),
                            g.grad_gamma.ptr(), g.grad_beta.ptr());
  return g;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape);
  relu_forward<float>(x.ptr(), x.numel(), out.ptr());
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  if (!x.same_shape(grad_out)) throw ShapeError("relu grad_out shape mismatch");
  Tensor gx(x.shape);
  relu_backward<float>(x.ptr(), grad_out.ptr(), x.numel(), gx.ptr());
  return gx;
}

Tensor global_avg_pool(const Tensor& x) {
  int64_t c = channels_of(x);
  int64_t positions = x.numel() / c;
  if (positions < 1) throw ShapeError("global_avg_pool needs a nonempty spatial extent");
  std::vector<int64_t> out_shape(x.shape.size(), 1);
  out_shape.back() = c;
  Tensor out(out_shape);
  global_avg_pool_forward<float>(x.ptr(), positions, c, out.ptr());
  return out;
}

Tensor global_avg_pool_backward(const Tensor& x, const Tensor& grad_out) {
  int64_t c = channels_of(x);
  if (grad_out.numel() != c) throw ShapeError("global_avg_pool grad_out must be [*, c]");
  Tensor gx(x.shape);
  global_avg_pool_backward<float>(grad_out.ptr(), x.numel() / c, c, gx.ptr());
  return gx;
}

Tensor avg_pool2d(const Tensor& x, int64_t window, int64_t stride) {
  if (x.rank() != 3) throw ShapeError("avg_pool2d input must be [h][w][c]");
  Tensor out({same_out_dim(x.dim(0), stride), same_out_dim(x.dim(1), stride), x.dim(2)});
  avg_pool2d_forward<float>(x.ptr(), x.dim(0), x.dim(1), x.dim(2), window, stride,
                            out.ptr());
  return out;
}

Tensor avg_pool2d_backward(const Tensor& x, const Tensor& grad_out, int64_t window,
                           int64_t stride) {
  Tensor gx(x.shape);
  avg_pool2d_backward<float>(grad_out.ptr(), x.dim(0), x.dim(1), x.dim(2), window,
                             stride, gx.ptr());
  return gx;
}

Tensor fully_connected(const Tensor& x, const Tensor& w) {
  if (w.rank() != 2) throw ShapeError("fc weights must be [cin][cout]");
  if (x.numel() != w.dim(0)) throw ShapeError("fc input length does not match weights");
  Tensor y({w.dim(1)});
  fc_forward<float>(x.ptr(), w.dim(0), w.dim(1), w.ptr(), y.ptr());
  return y;
}

FcGrads fully_connected_backward(const Tensor& x, const Tensor& w,
                                 const Tensor& grad_out) {
  if (grad_out.numel() != w.dim(1)) throw ShapeError("fc grad_out length mismatch");
  FcGrads g{Tensor(x.shape), Tensor(w.shape)};
  fc_backward<float>(x.ptr(), w.ptr(), grad_out.ptr(), w.dim(0), w.dim(1),
                     g.grad_x.ptr(), g.grad_w.ptr());
  return g;
}

DropoutResult dropout(const Tensor& x, float p, Mode mode, Pcg32& rng) {
  if (p < 0.0f || p >= 1.0f) throw Error("dropout probability must be in [0, 1)");
  if (mode == Mode::Infer || p == 0.0f) {
    DropoutResult r;
    r.out = x;
    return r;
  }
  DropoutResult r{Tensor(x.shape), Tensor(x.shape)};
  dropout_mask<float>(rng, p, x.numel(), r.mask.ptr());
  for (int64_t i = 0; i < x.numel(); ++i) r.out.data[i] = x.data[i] * r.mask.data[i];
  return r;
}

SceResult softmax_cross_entropy(const Tensor& logits, int64_t label) {
  SceResult r{0.0f, Tensor(logits.shape), Tensor(logits.shape)};
  r.loss = softmax_cross_entropy<float>(logits.ptr(), logits.numel(), label,
                                        r.grad_logits.ptr(), r.probs.ptr());
  return r;
}

}  // namespace kws::nn
