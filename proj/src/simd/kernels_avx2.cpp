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

// Compiled with -mavx2 -mfma on x86-64 only; see src/CMakeLists.txt.

#include "kws/simd.hpp"

#if defined(KWS_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

namespace kws::simd {

namespace {

void axpy_avx2(float* dst, const float* x, float a, int64_t n) {
  const __m256 va = _mm256_set1_ps(a);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vx = _mm256_loadu_ps(x + i);
    __m256 vd = _mm256_loadu_ps(dst + i);
    _mm256_storeu_ps(dst + i, _mm256_fmadd_ps(va, vx, vd));
  }
  for (; i < n; ++i) dst[i] = std::fma(a, x[i], dst[i]);
}

float dot_avx2(const float* a, const float* b, int64_t n) {
  __m256 acc = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 va = _mm256_loadu_ps(a + i);
    __m256 vb = _mm256_loadu_ps(b + i);
    acc = _mm256_fmadd_ps(va, vb, acc);
  }
  __m128 lo = _mm256_castps256_ps128(acc);
  __m128 hi = _mm256_extractf128_ps(acc, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  float sum = _mm_cvtss_f32(s);
  for (; i < n; ++i) sum = std::fma(a[i], b[i], sum);
  return sum;
}

bool cpu_supported() {
#if defined(__GNUC__) || defined(__clang__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

}  // namespace

const Kernels* avx2_kernels() {
  static const Kernels k{axpy_avx2, dot_avx2, "avx2"};
  static const bool ok = cpu_supported();
  return ok ? &k : nullptr;
}

}  // namespace kws::simd

#else

namespace kws::simd {

const Kernels* avx2_kernels() { return nullptr; }

}  // namespace kws::simd

#endif
