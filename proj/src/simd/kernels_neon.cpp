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

#include "kws/simd.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

namespace kws::simd {

namespace {

void axpy_neon(float* dst, const float* x, float a, int64_t n) {
  const float32x4_t va = vdupq_n_f32(a);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t vx = vld1q_f32(x + i);
    float32x4_t vd = vld1q_f32(dst + i);
    vst1q_f32(dst + i, vfmaq_f32(vd, va, vx));
  }
  for (; i < n; ++i) dst[i] = std::fma(a, x[i], dst[i]);
}

float dot_neon(const float* a, const float* b, int64_t n) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t va = vld1q_f32(a + i);
    float32x4_t vb = vld1q_f32(b + i);
    acc = vfmaq_f32(acc, va, vb);
  }
  float sum = vaddvq_f32(acc);
  for (; i < n; ++i) sum = std::fma(a[i], b[i], sum);
  return sum;
}

}  // namespace

const Kernels* neon_kernels() {
  static const Kernels k{axpy_neon, dot_neon, "neon"};
  return &k;
}

}  // namespace kws::simd

#else

namespace kws::simd {

const Kernels* neon_kernels() { return nullptr; }

}  // namespace kws::simd

#endif
