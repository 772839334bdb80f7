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

#include <cmath>

#include "kws/simd.hpp"

namespace kws::simd {

namespace {

// One fused rounding per element, matching the vector FMA variants exactly.
void axpy_scalar(float* dst, const float* x, float a, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dst[i] = std::fma(a, x[i], dst[i]);
}

float dot_scalar(const float* a, const float* b, int64_t n) {
  float acc = 0.0f;
  for (int64_t i = 0; i < n; ++i) acc = std::fma(a[i], b[i], acc);
  return acc;
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{axpy_scalar, dot_scalar, "scalar"};
  return k;
}

}  // namespace kws::simd
