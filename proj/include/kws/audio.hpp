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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kws/error.hpp"
#include "kws/rng.hpp"

namespace kws::audio {

inline constexpr int kSampleRate = 16000;
inline constexpr int64_t kClipSamples = 16000;  // fixed 1 s inputs

// 12-way label set: ten command words plus silence and unknown.
inline constexpr int kNumClasses = 12;
inline constexpr int kSilenceLabel = 10;
inline constexpr int kUnknownLabel = 11;

const std::array<std::string_view, kNumClasses>& class_names();
int label_from_name(std::string_view name);  // -1 if not a class name
int target_word_label(std::string_view word);  // -1 if not one of the ten words

struct AudioClip {
  std::vector<float> samples;  // amplitudes in [-1, 1]
  int sample_rate = kSampleRate;

  int64_t size() const { return static_cast<int64_t>(samples.size()); }
};

enum class Split { Train, Validation, Test };

std::string_view split_name(Split s);

struct DatasetEntry {
  std::string path;  // relative to the dataset root; synthesized for silence
  int label = 0;
  Split split = Split::Train;
};

struct AugmentConfig {
  double shift_range_s = 0.1;
  double noise_coeff_max = 0.1;
  double noise_prob = 0.8;
  uint64_t rng_seed = 0;
};

// RIFF/WAVE, 16-bit signed PCM, mono, 16 kHz. Sample s maps to s/32768.
AudioClip decode_wav(std::span<const uint8_t> bytes);

// Inverse container for tests and tooling (clamps, rounds to nearest).
std::vector<uint8_t> encode_wav(const AudioClip& clip);

AudioClip read_wav_file(const std::string& path);

// Deterministic, speaker-consistent split from the SHA-1 of the basename
// with any "_nohash_..." suffix removed: p = (digest mod 2^27) * 100 / (2^27 - 1).
Split assign_split(std::string_view filename, double val_pct, double test_pct);

// Walks root/<word>/*.wav, keeps the ten target words, relabels a
// deterministic sample of the remaining words as unknown (unknown_pct of
// each split) and synthesizes silence entries (silence_pct of each split).
// root must contain a _background_noise_ directory; its files never appear
// as utterance entries.
std::vector<DatasetEntry> build_dataset_index(const std::string& root, double val_pct,
                                              double test_pct, double unknown_pct,
                                              double silence_pct, uint64_t rng_seed);

std::string index_to_csv(const std::vector<DatasetEntry>& entries);

AudioClip pad_or_trim(const AudioClip& clip, int64_t target_len = kClipSamples);

// Positive shift delays the signal (zeros enter at the front).
AudioClip time_shift(const AudioClip& clip, double shift_s, int sample_rate);

// out[i] = clamp(clip[i] + coeff * noise[crop_offset + i], -1, 1)
AudioClip mix_background(const AudioClip& clip, const AudioClip& noise, float coeff,
                         int64_t crop_offset);

// A 1 s crop of an rng-chosen noise file scaled by coeff.
AudioClip make_silence(const std::vector<AudioClip>& noise_files, float coeff,
                       int64_t crop_offset, Pcg32& rng);

// Training-time augmentation: random shift, then background blending with
// probability config.noise_prob. Pure given the rng state.
AudioClip augment(const AudioClip& clip, const AugmentConfig& config,
                  const std::vector<AudioClip>& noise_files, Pcg32& rng);

}  // namespace kws::audio
