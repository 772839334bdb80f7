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

// Raw neural-network kernels, templated on the scalar type. Production runs
// them on float, where the hot loops route through the runtime-selected SIMD
// kernel set; the gradient-check suite instantiates the same code on double.
//
// Layout conventions (row-major throughout):
//   activations  [h][w][c]           channel-last
//   conv weights [kh][kw][cin][cout]
//   fc weights   [cin][cout]

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <type_traits>

#include "kws/error.hpp"
#include "kws/rng.hpp"
#include "kws/simd.hpp"

namespace kws::nn {

template <class T>
inline void axpy(T* dst, const T* x, T a, int64_t n) {
  if constexpr (std::is_same_v<T, float>) {
    simd::active().axpy(dst, x, a, n);
  } else {
    for (int64_t i = 0; i < n; ++i) dst[i] = std::fma(a, x[i], dst[i]);
  }
}

template <class T>
inline T dot(const T* a, const T* b, int64_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return simd::active().dot(a, b, n);
  } else {
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) acc = std::fma(a[i], b[i], acc);
    return acc;
  }
}

// SAME padding: output length = ceil(in / stride); the shorter half of the
// padding goes in front.
inline int64_t same_out_dim(int64_t in, int64_t stride) {
  return (in + stride - 1) / stride;
}

inline int64_t same_pad_before(int64_t in, int64_t k, int64_t stride) {
  int64_t out = same_out_dim(in, stride);
  int64_t total = std::max<int64_t>((out - 1) * stride + k - in, 0);
  return total / 2;
}

struct ConvGeom {
  int64_t in_h, in_w, cin;
  int64_t kh, kw, cout;
  int64_t sh, sw;
  int64_t out_h, out_w;
  int64_t pad_top, pad_left;
};

inline ConvGeom conv_geometry(int64_t in_h, int64_t in_w, int64_t cin, int64_t kh,
                              int64_t kw, int64_t cout, int64_t sh, int64_t sw) {
  if (in_h < 1 || in_w < 1 || cin < 1 || kh < 1 || kw < 1 || cout < 1 || sh < 1 || sw < 1)
    throw ShapeError("convolution geometry must be positive");
  ConvGeom g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.cin = cin;
  g.kh = kh;
  g.kw = kw;
  g.cout = cout;
  g.sh = sh;
  g.sw = sw;
  g.out_h = same_out_dim(in_h, sh);
  g.out_w = same_out_dim(in_w, sw);
  g.pad_top = same_pad_before(in_h, kh, sh);
  g.pad_left = same_pad_before(in_w, kw, sw);
  return g;
}

// out[oh][ow][o] = sum_{kh,kw,ci} pad(x)[oh*sh+kh][ow*sw+kw][ci] * w[kh][kw][ci][o]
// Vectorized across output channels: every (tap, ci) contributes one axpy of
// the weight row scaled by the input value, so the per-element reduction
// order is identical in the scalar and SIMD paths.
template <class T>
void conv2d_forward(const ConvGeom& g, const T* x, const T* w, const T* bias, T* out) {
  for (int64_t oh = 0; oh < g.out_h; ++oh) {
    for (int64_t ow = 0; ow < g.out_w; ++ow) {
      T* orow = out + (oh * g.out_w + ow) * g.cout;
      if (bias != nullptr)
        std::copy(bias, bias + g.cout, orow);
      else
        std::fill(orow, orow + g.cout, T(0));
      for (int64_t kh = 0; kh < g.kh; ++kh) {
        int64_t ih = oh * g.sh - g.pad_top + kh;
        if (ih < 0 || ih >= g.in_h) continue;
        for (int64_t kw = 0; kw < g.kw; ++kw) {
          int64_t iw = ow * g.sw - g.pad_left + kw;
          if (iw < 0 || iw >= g.in_w) continue;
          const T* xrow = x + (ih * g.in_w + iw) * g.cin;
          const T* wtap = w + (kh * g.kw + kw) * g.cin * g.cout;
          for (int64_t ci = 0; ci < g.cin; ++ci)
            axpy(orow, wtap + ci * g.cout, xrow[ci], g.cout);
        }
      }
    }
  }
}

// Gradients of sum(gout . forward(x, w)). gx/gw/gbias are overwritten.
template <class T>
void conv2d_backward(const ConvGeom& g, const T* x, const T* w, const T* gout,
                     T* gx, T* gw, T* gbias = nullptr) {
  std::fill(gx, gx + g.in_h * g.in_w * g.cin, T(0));
  std::fill(gw, gw + g.kh * g.kw * g.cin * g.cout, T(0));
  if (gbias != nullptr) std::fill(gbias, gbias + g.cout, T(0));
  for (int64_t oh = 0; oh < g.out_h; ++oh) {
    for (int64_t ow = 0; ow < g.out_w; ++ow) {
      const T* grow = gout + (oh * g.out_w + ow) * g.cout;
      if (gbias != nullptr)
        for (int64_t o = 0; o < g.cout; ++o) gbias[o] += grow[o];
      for (int64_t kh = 0; kh < g.kh; ++kh) {
        int64_t ih = oh * g.sh - g.pad_top + kh;
        if (ih < 0 || ih >= g.in_h) continue;
        for (int64_t kw = 0; kw < g.kw; ++kw) {
          int64_t iw = ow * g.sw - g.pad_left + kw;
          if (iw < 0 || iw >= g.in_w) continue;
          const T* xrow = x + (ih * g.in_w + iw) * g.cin;
          T* gxrow = gx + (ih * g.in_w + iw) * g.cin;
          const T* wtap = w + (kh * g.kw + kw) * g.cin * g.cout;
          T* gwtap = gw + (kh * g.kw + kw) * g.cin * g.cout;
          for (int64_t ci = 0; ci < g.cin; ++ci) {
            axpy(gwtap + ci * g.cout, grow, xrow[ci], g.cout);
            gxrow[ci] += dot(wtap + ci * g.cout, grow, g.cout);
          }
        }
      }
    }
  }
}

// Batch statistics over all non-channel axes (rows = product of them).
// Biased variance; two-pass for stability. xhat may be null in inference-free
// call sites that only need the output.
template <class T>
void batchnorm_forward_train(const T* x, int64_t rows, int64_t c, const T* gamma,
                             const T* beta, T eps, T* out, T* xhat, T* batch_mean,
                             T* batch_var) {
  for (int64_t ch = 0; ch < c; ++ch) batch_mean[ch] = T(0);
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = x + r * c;
    for (int64_t ch = 0; ch < c; ++ch) batch_mean[ch] += row[ch];
  }
  for (int64_t ch = 0; ch < c; ++ch) batch_mean[ch] /= T(rows);
  for (int64_t ch = 0; ch < c; ++ch) batch_var[ch] = T(0);
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = x + r * c;
    for (int64_t ch = 0; ch < c; ++ch) {
      T d = row[ch] - batch_mean[ch];
      batch_var[ch] += d * d;
    }
  }
  for (int64_t ch = 0; ch < c; ++ch) batch_var[ch] /= T(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = x + r * c;
    T* orow = out + r * c;
    T* hrow = xhat == nullptr ? nullptr : xhat + r * c;
    for (int64_t ch = 0; ch < c; ++ch) {
      T h = (row[ch] - batch_mean[ch]) / std::sqrt(batch_var[ch] + eps);
      if (hrow != nullptr) hrow[ch] = h;
      orow[ch] = gamma[ch] * h + beta[ch];
    }
  }
}

template <class T>
void batchnorm_forward_infer(const T* x, int64_t rows, int64_t c, const T* gamma,
                             const T* beta, const T* mean, const T* var, T eps, T* out) {
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = x + r * c;
    T* orow = out + r * c;
    for (int64_t ch = 0; ch < c; ++ch)
      orow[ch] = gamma[ch] * (row[ch] - mean[ch]) / std::sqrt(var[ch] + eps) + beta[ch];
  }
}

// Train-mode gradients through the batch statistics.
template <class T>
void batchnorm_backward(const T* xhat, const T* gout, int64_t rows, int64_t c,
                        const T* gamma, const T* batch_var, T eps, T* gx, T* ggamma,
                        T* gbeta) {
  for (int64_t ch = 0; ch < c; ++ch) {
    ggamma[ch] = T(0);
    gbeta[ch] = T(0);
  }
  for (int64_t r = 0; r < rows; ++r) {
    const T* grow = gout + r * c;
    const T* hrow = xhat + r * c;
    for (int64_t ch = 0; ch < c; ++ch) {
      ggamma[ch] += grow[ch] * hrow[ch];
      gbeta[ch] += grow[ch];
    }
  }
  for (int64_t r = 0; r < rows; ++r) {
    const T* grow = gout + r * c;
    const T* hrow = xhat + r * c;
    T* gxrow = gx + r * c;
    for (int64_t ch = 0; ch < c; ++ch) {
      T inv_std = T(1) / std::sqrt(batch_var[ch] + eps);
      gxrow[ch] = gamma[ch] * inv_std *
                  (grow[ch] - gbeta[ch] / T(rows) - hrow[ch] * ggamma[ch] / T(rows));
    }
  }
}

template <class T>
void relu_forward(const T* x, int64_t n, T* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

// Gradient at exactly 0 is 0.
template <class T>
void relu_backward(const T* x, const T* gout, int64_t n, T* gx) {
  for (int64_t i = 0; i < n; ++i) gx[i] = x[i] > T(0) ? gout[i] : T(0);
}

// Double accumulator: the head is tiny and the mean is then exact to one
// rounding of the output type.
template <class T>
void global_avg_pool_forward(const T* x, int64_t positions, int64_t c, T* out) {
  for (int64_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (int64_t p = 0; p < positions; ++p) acc += double(x[p * c + ch]);
    out[ch] = T(acc / double(positions));
  }
}

template <class T>
void global_avg_pool_backward(const T* gout, int64_t positions, int64_t c, T* gx) {
  for (int64_t p = 0; p < positions; ++p) {
    T* row = gx + p * c;
    for (int64_t ch = 0; ch < c; ++ch) row[ch] = gout[ch] / T(positions);
  }
}

// SAME average pooling with count_include_pad semantics: padded cells count
// as zeros and the divisor is always the full window area.
template <class T>
void avg_pool2d_forward(const T* x, int64_t h, int64_t w, int64_t c, int64_t win,
                        int64_t stride, T* out) {
  int64_t out_h = same_out_dim(h, stride);
  int64_t out_w = same_out_dim(w, stride);
  int64_t pad_top = same_pad_before(h, win, stride);
  int64_t pad_left = same_pad_before(w, win, stride);
  T inv_area = T(1) / T(win * win);
  for (int64_t oh = 0; oh < out_h; ++oh) {
    for (int64_t ow = 0; ow < out_w; ++ow) {
      T* orow = out + (oh * out_w + ow) * c;
      std::fill(orow, orow + c, T(0));
      for (int64_t kh = 0; kh < win; ++kh) {
        int64_t ih = oh * stride - pad_top + kh;
        if (ih < 0 || ih >= h) continue;
        for (int64_t kw = 0; kw < win; ++kw) {
          int64_t iw = ow * stride - pad_left + kw;
          if (iw < 0 || iw >= w) continue;
          const T* xrow = x + (ih * w + iw) * c;
          for (int64_t ch = 0; ch < c; ++ch) orow[ch] += xrow[ch];
        }
      }
      for (int64_t ch = 0; ch < c; ++ch) orow[ch] *= inv_area;
    }
  }
}

template <class T>
void avg_pool2d_backward(const T* gout, int64_t h, int64_t w, int64_t c, int64_t win,
                         int64_t stride, T* gx) {
  int64_t out_h = same_out_dim(h, stride);
  int64_t out_w = same_out_dim(w, stride);
  int64_t pad_top = same_pad_before(h, win, stride);
  int64_t pad_left = same_pad_before(w, win, stride);
  T inv_area = T(1) / T(win * win);
  std::fill(gx, gx + h * w * c, T(0));
  for (int64_t oh = 0; oh < out_h; ++oh) {
    for (int64_t ow = 0; ow < out_w; ++ow) {
      const T* grow = gout + (oh * out_w + ow) * c;
      for (int64_t kh = 0; kh < win; ++kh) {
        int64_t ih = oh * stride - pad_top + kh;
        if (ih < 0 || ih >= h) continue;
        for (int64_t kw = 0; kw < win; ++kw) {
          int64_t iw = ow * stride - pad_left + kw;
          if (iw < 0 || iw >= w) continue;
          T* gxrow = gx + (ih * w + iw) * c;
          for (int64_t ch = 0; ch < c; ++ch) gxrow[ch] += grow[ch] * inv_area;
        }
      }
    }
  }
}

// y = x^T W, no bias.
template <class T>
void fc_forward(const T* x, int64_t cin, int64_t cout, const T* w, T* y) {
  std::fill(y, y + cout, T(0));
  for (int64_t ci = 0; ci < cin; ++ci) axpy(y, w + ci * cout, x[ci], cout);
}

template <class T>
void fc_backward(const T* x, const T* w, const T* gy, int64_t cin, int64_t cout,
                 T* gx, T* gw) {
  std::fill(gw, gw + cin * cout, T(0));
  for (int64_t ci = 0; ci < cin; ++ci) {
    axpy(gw + ci * cout, gy, x[ci], cout);
    gx[ci] = dot(w + ci * cout, gy, cout);
  }
}

// Numerically stable cross entropy; grad/probs are optional outputs.
template <class T>
T softmax_cross_entropy(const T* z, int64_t n, int64_t label, T* grad = nullptr,
                        T* probs = nullptr) {
  if (label < 0 || label >= n) throw Error("softmax_cross_entropy: label out of range");
  T zmax = z[0];
  for (int64_t i = 1; i < n; ++i) zmax = std::max(zmax, z[i]);
  T sum = T(0);
  for (int64_t i = 0; i < n; ++i) sum += std::exp(z[i] - zmax);
  T loss = std::log(sum) + zmax - z[label];
  if (grad != nullptr || probs != nullptr) {
    for (int64_t i = 0; i < n; ++i) {
      T p = std::exp(z[i] - zmax) / sum;
      if (probs != nullptr) probs[i] = p;
      if (grad != nullptr) grad[i] = p - (i == label ? T(1) : T(0));
    }
  }
  return loss;
}

// Inverted dropout: the mask holds 0 or 1/(1-p), so inference never rescales.
template <class T>
void dropout_mask(Pcg32& rng, T p, int64_t n, T* mask) {
  T keep = T(1) / (T(1) - p);
  for (int64_t i = 0; i < n; ++i) mask[i] = rng.next_double() < double(p) ? T(0) : keep;
}

}  // namespace kws::nn
