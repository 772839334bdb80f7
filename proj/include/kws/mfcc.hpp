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
#include <iosfwd>
#include <span>
#include <vector>

#include "kws/audio.hpp"
#include "kws/error.hpp"

namespace kws::features {

// 30 ms windows, 10 ms hop, 40 log-mel bands between 20 Hz and 4 kHz,
// orthonormal DCT-II keeping all 40 coefficients. A 1 s clip yields 98x40.
struct FeatureConfig {
  double window_len_s = 0.030;
  double hop_len_s = 0.010;
  int n_mfcc = 40;
  int n_mels = 40;
  int fft_size = 512;
  double mel_fmin = 20.0;
  double mel_fmax = 4000.0;
  double log_floor = 1e-12;

  int window_samples(int sample_rate) const;
  int hop_samples(int sample_rate) const;
};

struct MfccMatrix {
  int64_t t = 0;
  int64_t f = 0;
  std::vector<float> values;  // row-major t x f

  float at(int64_t row, int64_t col) const { return values[size_t(row * f + col)]; }
};

// Frame i covers samples [i*hop, i*hop + window); no padding, so the count
// is 1 + floor((N - window) / hop).
int64_t frame_count(int64_t n_samples, int window, int hop);
std::vector<std::span<const float>> frame_signal(const audio::AudioClip& clip,
                                                 const FeatureConfig& config);

// Hann window, zero-padding to fft_size, |DFT|^2 of bins 0..fft_size/2.
std::vector<double> power_spectrum(std::span<const float> frame,
                                   const FeatureConfig& config,
                                   int sample_rate = audio::kSampleRate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters, peak 1.0, centers uniform on the mel scale; row-major
// n_mels x (fft_size/2 + 1).
std::vector<double> mel_filterbank(const FeatureConfig& config,
                                   int sample_rate = audio::kSampleRate);

// Orthonormal DCT-II basis, row-major n x n; C * C^T = I.
std::vector<double> dct_matrix(int n);

MfccMatrix compute_mfcc(const audio::AudioClip& clip, const FeatureConfig& config);

// Binary container: magic "MFC1", u32 t, u32 f, u32 reserved, then t*f
// little-endian f32 values row-major.
void write_mfc(std::ostream& out, const MfccMatrix& m);
MfccMatrix read_mfc(std::istream& in);

}  // namespace kws::features
