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

#include "kws/mfcc.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

namespace kws::features {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / double(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

void validate(const FeatureConfig& c, int sample_rate) {
  if (c.n_mfcc > c.n_mels) throw Error("feature config: n_mfcc must be <= n_mels");
  if (!is_pow2(c.fft_size)) throw Error("feature config: fft_size must be a power of two");
  if (c.fft_size < c.window_samples(sample_rate))
    throw Error("feature config: fft_size must cover the analysis window");
  if (c.mel_fmin < 0.0 || c.mel_fmin >= c.mel_fmax || c.mel_fmax > sample_rate / 2.0)
    throw Error("feature config: mel range must satisfy 0 <= fmin < fmax <= rate/2");
  if (c.n_mels < 1) throw Error("feature config: n_mels must be positive");
}

}  // namespace

int FeatureConfig::window_samples(int sample_rate) const {
  return int(std::lround(window_len_s * sample_rate));
}

int FeatureConfig::hop_samples(int sample_rate) const {
  return int(std::lround(hop_len_s * sample_rate));
}

int64_t frame_count(int64_t n_samples, int window, int hop) {
  if (n_samples < window) throw Error("clip shorter than one analysis window");
  return 1 + (n_samples - window) / hop;
}

std::vector<std::span<const float>> frame_signal(const audio::AudioClip& clip,
                                                 const FeatureConfig& config) {
  int window = config.window_samples(clip.sample_rate);
  int hop = config.hop_samples(clip.sample_rate);
  int64_t count = frame_count(clip.size(), window, hop);
  std::vector<std::span<const float>> frames;
  frames.reserve(size_t(count));
  for (int64_t i = 0; i < count; ++i)
    frames.emplace_back(clip.samples.data() + i * hop, size_t(window));
  return frames;
}

std::vector<double> power_spectrum(std::span<const float> frame,
                                   const FeatureConfig& config, int sample_rate) {
  validate(config, sample_rate);
  const int n = config.fft_size;
  if (int(frame.size()) > n) throw Error("frame longer than fft_size");
  std::vector<std::complex<double>> buf(size_t(n), {0.0, 0.0});
  const size_t w = frame.size();
  for (size_t i = 0; i < w; ++i) {
    // Periodic Hann window.
    double win = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(w));
    buf[i] = frame[i] * win;
  }
  fft(buf);
  std::vector<double> power(size_t(n / 2 + 1));
  for (size_t k = 0; k < power.size(); ++k) power[k] = std::norm(buf[k]);
  return power;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(const FeatureConfig& config, int sample_rate) {
  validate(config, sample_rate);
  const int n_bins = config.fft_size / 2 + 1;
  const int n_mels = config.n_mels;

  // n_mels + 2 edge points uniform on the mel scale; filter i rises over
  // (edge[i], edge[i+1]) and falls over (edge[i+1], edge[i+2]).
  double mel_lo = hz_to_mel(config.mel_fmin);
  double mel_hi = hz_to_mel(config.mel_fmax);
  std::vector<double> edges_hz(size_t(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges_hz[size_t(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / double(n_mels + 1));

  std::vector<double> fb(size_t(n_mels) * size_t(n_bins), 0.0);
  double bin_hz = double(sample_rate) / config.fft_size;
  for (int m = 0; m < n_mels; ++m) {
    double left = edges_hz[size_t(m)];
    double center = edges_hz[size_t(m) + 1];
    double right = edges_hz[size_t(m) + 2];
    bool any = false;
    for (int k = 0; k < n_bins; ++k) {
      double hz = k * bin_hz;
      double w = 0.0;
      if (hz > left && hz < center)
        w = (hz - left) / (center - left);
      else if (hz >= center && hz < right)
        w = (right - hz) / (right - center);
      if (w > 0.0) {
        fb[size_t(m) * size_t(n_bins) + size_t(k)] = w;
        any = true;
      }
    }
    if (!any)
      throw Error("mel filterbank: filter " + std::to_string(m) +
                  " covers no FFT bin; too many bands for the frequency range");
  }
  return fb;
}

std::vector<double> dct_matrix(int n) {
  std::vector<double> m(size_t(n) * size_t(n));
  for (int k = 0; k < n; ++k) {
    double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (int i = 0; i < n; ++i)
      m[size_t(k) * size_t(n) + size_t(i)] =
          scale * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
  }
  return m;
}

MfccMatrix compute_mfcc(const audio::AudioClip& clip, const FeatureConfig& config) {
  validate(config, clip.sample_rate);
  auto frames = frame_signal(clip, config);
  const int n_bins = config.fft_size / 2 + 1;
  std::vector<double> fb = mel_filterbank(config, clip.sample_rate);
  std::vector<double> dct = dct_matrix(config.n_mels);

  MfccMatrix out;
  out.t = int64_t(frames.size());
  out.f = config.n_mfcc;
  out.values.resize(size_t(out.t * out.f));

  std::vector<double> logmel(size_t(config.n_mels));
  for (size_t fi = 0; fi < frames.size(); ++fi) {
    std::vector<double> power = power_spectrum(frames[fi], config, clip.sample_rate);
    for (int m = 0; m < config.n_mels; ++m) {
      double e = 0.0;
      const double* row = fb.data() + size_t(m) * size_t(n_bins);
      for (int k = 0; k < n_bins; ++k) e += row[k] * power[size_t(k)];
      logmel[size_t(m)] = std::log(e + config.log_floor);
    }
    for (int k = 0; k < config.n_mfcc; ++k) {
      double acc = 0.0;
      const double* row = dct.data() + size_t(k) * size_t(config.n_mels);
      for (int m = 0; m < config.n_mels; ++m) acc += row[m] * logmel[size_t(m)];
      out.values[fi * size_t(out.f) + size_t(k)] = float(acc);
    }
  }
  return out;
}

void write_mfc(std::ostream& out, const MfccMatrix& m) {
  out.write("MFC1", 4);
  uint32_t t = uint32_t(m.t), f = uint32_t(m.f), reserved = 0;
  out.write(reinterpret_cast<const char*>(&t), 4);
  out.write(reinterpret_cast<const char*>(&f), 4);
  out.write(reinterpret_cast<const char*>(&reserved), 4);
  out.write(reinterpret_cast<const char*>(m.values.data()),
            std::streamsize(m.values.size() * sizeof(float)));
}

MfccMatrix read_mfc(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MFC1", 4) != 0)
    throw LoadError("mfc: bad magic");
  uint32_t t = 0, f = 0, reserved = 0;
  in.read(reinterpret_cast<char*>(&t), 4);
  in.read(reinterpret_cast<char*>(&f), 4);
  in.read(reinterpret_cast<char*>(&reserved), 4);
  if (!in) throw LoadError("mfc: truncated header");
  MfccMatrix m;
  m.t = t;
  m.f = f;
  m.values.resize(size_t(t) * size_t(f));
  in.read(reinterpret_cast<char*>(m.values.data()),
          std::streamsize(m.values.size() * sizeof(float)));
  if (!in) throw LoadError("mfc: truncated payload");
  return m;
}

}  // namespace kws::features
