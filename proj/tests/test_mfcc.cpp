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

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kws/mfcc.hpp"
#include "oracles.hpp"

using namespace kws;
using namespace kws::features;

namespace {

audio::AudioClip random_clip(uint64_t seed, int64_t n = 16000, float lo = -0.5f,
                             float hi = 0.5f) {
  Pcg32 rng(seed);
  audio::AudioClip clip;
  clip.samples.resize(size_t(n));
  for (float& v : clip.samples) v = float(rng.uniform(lo, hi));
  return clip;
}

}  // namespace

TEST_CASE("frame counts") {
  CHECK(frame_count(16000, 480, 160) == 98);
  CHECK(frame_count(480, 480, 160) == 1);
  CHECK_THROWS_AS(frame_count(479, 480, 160), Error);

  FeatureConfig config;
  audio::AudioClip clip = random_clip(1);
  auto frames = frame_signal(clip, config);
  CHECK(frames.size() == 98);
  CHECK(frames[0].size() == 480);
  // frame i starts at i * hop
  CHECK(frames[3].data() == clip.samples.data() + 3 * 160);

  // the count formula holds for arbitrary lengths
  Pcg32 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    int64_t n = 480 + rng.next_below(30000);
    audio::AudioClip c = random_clip(rep + 10, n);
    CHECK(int64_t(frame_signal(c, config).size()) == 1 + (n - 480) / 160);
  }
}

TEST_CASE("power spectrum") {
  FeatureConfig config;
  std::vector<float> zeros(480, 0.0f);
  auto silent = power_spectrum(std::span<const float>(zeros), config);
  CHECK(silent.size() == 257);
  for (double v : silent) CHECK(v == 0.0);

  // bin-centered sinusoid peaks at its bin
  const int k = 32;  // 1000 Hz
  std::vector<float> tone(480);
  for (size_t i = 0; i < tone.size(); ++i)
    tone[i] = std::sin(2.0 * M_PI * double(k) * 16000.0 / 512.0 * double(i) / 16000.0);
  auto spec = power_spectrum(std::span<const float>(tone), config);
  size_t argmax = 0;
  for (size_t i = 1; i < spec.size(); ++i)
    if (spec[i] > spec[argmax]) argmax = i;
  CHECK(argmax == k);

  // random frame against the naive O(n^2) DFT
  audio::AudioClip clip = random_clip(3, 480);
  auto got = power_spectrum(std::span<const float>(clip.samples), config);
  auto want = oracles::dft_power(oracles::widen(clip.samples), 512);
  CHECK(oracles::rel_err_inf(got, want) < 1e-6);
}

TEST_CASE("mel scale and filterbank") {
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-4));
  CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-9));

  FeatureConfig config;
  auto fb = mel_filterbank(config);
  const int n_bins = 257;
  REQUIRE(fb.size() == size_t(40 * n_bins));

  // every filter touches at least one bin, weights in [0, 1]
  for (int m = 0; m < 40; ++m) {
    double row_max = 0.0;
    for (int k = 0; k < n_bins; ++k) {
      double w = fb[size_t(m * n_bins + k)];
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
      row_max = std::max(row_max, w);
    }
    CHECK(row_max > 0.0);
  }

  // centers strictly increasing in Hz: the argmax bin must not decrease and
  // the analytic centers are strictly ordered
  double mel_lo = hz_to_mel(20.0), mel_hi = hz_to_mel(4000.0);
  double prev = 0.0;
  for (int m = 0; m < 40; ++m) {
    double center = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / 41.0);
    CHECK(center > prev);
    prev = center;
  }

  FeatureConfig bad;
  bad.n_mels = 4000;  // far more bands than resolvable bins at the low end
  CHECK_THROWS_AS(mel_filterbank(bad), Error);
}

TEST_CASE("orthonormal DCT-II basis") {
  auto m = dct_matrix(40);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 40; ++k) dot += m[size_t(i * 40 + k)] * m[size_t(j * 40 + k)];
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
}

TEST_CASE("compute_mfcc shape and stationarity") {
  FeatureConfig config;
  audio::AudioClip clip = random_clip(5);
  MfccMatrix m = compute_mfcc(clip, config);
  CHECK(m.t == 98);
  CHECK(m.f == 40);
  for (float v : m.values) CHECK(std::isfinite(v));

  // constant-amplitude input: every frame sees the same samples
  audio::AudioClip flat;
  flat.samples.assign(16000, 0.37f);
  MfccMatrix fm = compute_mfcc(flat, config);
  for (int64_t t = 1; t < fm.t; ++t)
    for (int64_t f = 0; f < fm.f; ++f)
      CHECK(fm.at(t, f) == doctest::Approx(fm.at(0, f)).epsilon(1e-9));
}

TEST_CASE("compute_mfcc equals the straight-line composition of its stages") {
  FeatureConfig config;
  audio::AudioClip clip = random_clip(6);
  MfccMatrix got = compute_mfcc(clip, config);

  auto frames = frame_signal(clip, config);
  auto fb = mel_filterbank(config);
  auto dct = dct_matrix(config.n_mels);
  const int n_bins = config.fft_size / 2 + 1;
  for (size_t t = 0; t < frames.size(); ++t) {
    auto power = oracles::dft_power(
        std::vector<double>(frames[t].begin(), frames[t].end()), config.fft_size);
    std::vector<double> logmel(40);
    for (int m = 0; m < 40; ++m) {
      double e = 0.0;
      for (int k = 0; k < n_bins; ++k) e += fb[size_t(m * n_bins + k)] * power[size_t(k)];
      logmel[size_t(m)] = std::log(e + config.log_floor);
    }
    for (int k = 0; k < 40; ++k) {
      double want = 0.0;
      for (int m = 0; m < 40; ++m) want += dct[size_t(k * 40 + m)] * logmel[size_t(m)];
      CHECK(std::abs(double(got.at(int64_t(t), k)) - want) <
            1e-6 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("scaling the waveform only moves coefficient zero") {
  FeatureConfig config;
  audio::AudioClip clip = random_clip(8, 16000, 0.1f, 0.9f);  // well above the floor
  const float alpha = 3.0f;
  audio::AudioClip scaled = clip;
  for (float& v : scaled.samples) v *= alpha;

  MfccMatrix base = compute_mfcc(clip, config);
  MfccMatrix big = compute_mfcc(scaled, config);
  // power scales by alpha^2, log adds 2 ln(alpha) per band, and the DCT of a
  // constant hits only coefficient 0 with sqrt(n_mels) gain
  double delta0 = 2.0 * std::log(double(alpha)) * std::sqrt(40.0);
  for (int64_t t = 0; t < base.t; ++t) {
    CHECK(double(big.at(t, 0)) - double(base.at(t, 0)) ==
          doctest::Approx(delta0).epsilon(1e-5));
    for (int64_t f = 1; f < base.f; ++f)
      CHECK(std::abs(double(big.at(t, f)) - double(base.at(t, f))) < 1e-4);
  }
}

TEST_CASE("mfc container round trip") {
  FeatureConfig config;
  MfccMatrix m = compute_mfcc(random_clip(9), config);
  std::stringstream buf;
  write_mfc(buf, m);
  std::string bytes = buf.str();
  CHECK(bytes.size() == 16 + size_t(m.t * m.f) * 4);
  CHECK(bytes.substr(0, 4) == "MFC1");

  std::stringstream in(bytes);
  MfccMatrix back = read_mfc(in);
  CHECK(back.t == m.t);
  CHECK(back.f == m.f);
  CHECK(back.values == m.values);

  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_mfc(bad), LoadError);
  std::stringstream truncated(bytes.substr(0, 100));
  CHECK_THROWS_AS(read_mfc(truncated), LoadError);
}
