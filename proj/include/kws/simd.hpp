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

#include <cstdint>

namespace kws::simd {

// The two inner loops every convolution and fully-connected kernel in this
// codebase reduces to:
//
//   axpy:  dst[i] += a * x[i]     (broadcast-multiply-accumulate over a row)
//   dot:   sum_i a[i] * b[i]
//
// The scalar reference uses std::fma so that axpy is bitwise identical to
// the vector variants (one rounding per element, same evaluation order).
// dot reduces in lane-parallel order under SIMD and is only equal to the
// scalar reference up to accumulation-order rounding.

using AxpyFn = void (*)(float* dst, const float* x, float a, int64_t n);
using DotFn = float (*)(const float* a, const float* b, int64_t n);

struct Kernels {
  AxpyFn axpy;
  DotFn dot;
  const char* name;
};

// Scalar reference kernels; always available.
const Kernels& scalar_kernels();

// AVX2+FMA variants; nullptr when not compiled in or not supported by the
// CPU we are running on.
const Kernels* avx2_kernels();

// NEON variants (aarch64); nullptr elsewhere.
const Kernels* neon_kernels();

// Kernel set selected at startup: best available unless the environment
// variable KWS_SIMD=scalar asks for the reference path.
const Kernels& active();

// Test hook: override the active set (nullptr restores auto-selection).
void set_active(const Kernels* k);

}  // namespace kws::simd
