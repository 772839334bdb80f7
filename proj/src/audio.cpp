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

#include "kws/audio.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

namespace kws::audio {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "yes", "no", "up", "down", "left", "right",
    "on", "off", "stop", "go", "silence", "unknown"};

constexpr std::string_view kNoiseDir = "_background_noise_";
constexpr std::string_view kSilenceDir = "_silence_";

uint32_t read_u32le(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

uint16_t read_u16le(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

void put_u32le(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(uint8_t(x));
  v.push_back(uint8_t(x >> 8));
  v.push_back(uint8_t(x >> 16));
  v.push_back(uint8_t(x >> 24));
}

void put_u16le(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(uint8_t(x));
  v.push_back(uint8_t(x >> 8));
}

}  // namespace

const std::array<std::string_view, kNumClasses>& class_names() { return kClassNames; }

int label_from_name(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (kClassNames[size_t(i)] == name) return i;
  return -1;
}

int target_word_label(std::string_view word) {
  int id = label_from_name(word);
  return id >= 0 && id < kSilenceLabel ? id : -1;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

AudioClip decode_wav(std::span<const uint8_t> bytes) {
  if (bytes.size() < 12) throw DecodeError("wav: file shorter than the RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0)
    throw DecodeError("wav: bad RIFF magic");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DecodeError("wav: bad WAVE form type");

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    uint32_t chunk_len = read_u32le(chunk + 4);
    if (pos + 8 + chunk_len > bytes.size())
      throw DecodeError("wav: truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw DecodeError("wav: fmt chunk too short");
      format = read_u16le(chunk + 8);
      channels = read_u16le(chunk + 10);
      rate = read_u32le(chunk + 12);
      bits = read_u16le(chunk + 22);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw DecodeError("wav: missing fmt chunk");
  if (format != 1) throw DecodeError("wav: audio format must be PCM (1)");
  if (channels != 1) throw DecodeError("wav: channel count must be mono (1)");
  if (rate != kSampleRate)
    throw DecodeError("wav: sample rate must be 16000 Hz");
  if (bits != 16) throw DecodeError("wav: bit depth must be 16");
  if (data == nullptr) throw DecodeError("wav: missing data chunk");
  if (data_len % 2 != 0) throw DecodeError("wav: odd data chunk length");

  AudioClip clip;
  clip.sample_rate = kSampleRate;
  clip.samples.resize(data_len / 2);
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    int16_t s = static_cast<int16_t>(read_u16le(data + 2 * i));
    clip.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return clip;
}

std::vector<uint8_t> encode_wav(const AudioClip& clip) {
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  std::vector<uint8_t> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32le(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  put_u32le(out, uint32_t(clip.sample_rate));
  put_u32le(out, uint32_t(clip.sample_rate) * 2);
  put_u16le(out, 2);
  put_u16le(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32le(out, 2 * n);
  for (float x : clip.samples) {
    float v = std::clamp(x, -1.0f, 1.0f);
    long q = std::lrint(double(v) * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    put_u16le(out, uint16_t(int16_t(q)));
  }
  return out;
}

AudioClip read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("wav: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

Split assign_split(std::string_view filename, double val_pct, double test_pct) {
  // Strip directory, then everything from "_nohash_" on, so all utterances
  // of one speaker land in the same split.
  size_t slash = filename.find_last_of("/\\");
  std::string_view base =
      slash == std::string_view::npos ? filename : filename.substr(slash + 1);
  size_t nohash = base.find("_nohash_");
  if (nohash != std::string_view::npos) base = base.substr(0, nohash);

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(base.data(), base.size(), digest, &digest_len, EVP_sha1(), nullptr) != 1)
    throw Error("sha1 digest failed");

  // digest mod 2^27 = the low 27 bits of the big-endian digest value.
  uint32_t low = (uint32_t(digest[digest_len - 4]) << 24) |
                 (uint32_t(digest[digest_len - 3]) << 16) |
                 (uint32_t(digest[digest_len - 2]) << 8) |
                 uint32_t(digest[digest_len - 1]);
  constexpr uint32_t kMaxPerClass = (1u << 27) - 1;
  uint32_t bucket = low & kMaxPerClass;
  double pct = bucket * (100.0 / kMaxPerClass);

  if (pct < val_pct) return Split::Validation;
  if (pct < val_pct + test_pct) return Split::Test;
  return Split::Train;
}

std::vector<DatasetEntry> build_dataset_index(const std::string& root, double val_pct,
                                              double test_pct, double unknown_pct,
                                              double silence_pct, uint64_t rng_seed) {
  fs::path base(root);
  if (!fs::is_directory(base)) throw IndexError("dataset root not found: " + root);
  if (!fs::is_directory(base / kNoiseDir))
    throw IndexError("dataset root has no " + std::string(kNoiseDir) + " directory");

  std::vector<std::string> words;
  for (const auto& e : fs::directory_iterator(base))
    if (e.is_directory() && e.path().filename().string() != kNoiseDir)
      words.push_back(e.path().filename().string());
  std::sort(words.begin(), words.end());

  std::vector<DatasetEntry> known;
  std::array<std::vector<DatasetEntry>, 3> unknown_pool;  // per split
  std::array<int64_t, 3> known_per_split = {0, 0, 0};

  for (const std::string& word : words) {
    int label = target_word_label(word);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(base / word))
      if (e.is_regular_file() && e.path().extension() == ".wav")
        files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    for (const std::string& f : files) {
      DatasetEntry entry;
      entry.path = word + "/" + f;
      entry.split = assign_split(f, val_pct, test_pct);
      if (label >= 0) {
        entry.label = label;
        known_per_split[size_t(entry.split)]++;
        known.push_back(std::move(entry));
      } else {
        entry.label = kUnknownLabel;
        unknown_pool[size_t(entry.split)].push_back(std::move(entry));
      }
    }
  }

  // Sample the unknown quota per split and synthesize silence entries sized
  // against the known-word counts.
  std::vector<DatasetEntry> result = std::move(known);
  Pcg32 rng(mix_seed(rng_seed, 0x756e6b6eULL));  // "unkn"
  for (int s = 0; s < 3; ++s) {
    auto& pool = unknown_pool[size_t(s)];
    int64_t want = static_cast<int64_t>(
        std::ceil(double(known_per_split[size_t(s)]) * unknown_pct / 100.0));
    want = std::min<int64_t>(want, int64_t(pool.size()));
    // Partial Fisher-Yates over the pool, deterministic across platforms.
    for (int64_t i = 0; i < want; ++i) {
      int64_t j = i + rng.next_below(uint32_t(pool.size() - i));
      std::swap(pool[size_t(i)], pool[size_t(j)]);
      result.push_back(pool[size_t(i)]);
    }
    int64_t silence = static_cast<int64_t>(
        std::ceil(double(known_per_split[size_t(s)]) * silence_pct / 100.0));
    for (int64_t i = 0; i < silence; ++i) {
      DatasetEntry entry;
      entry.path = std::string(kSilenceDir) + "/" +
                   std::string(split_name(Split(s))) + "_" + std::to_string(i) + ".wav";
      entry.label = kSilenceLabel;
      entry.split = Split(s);
      result.push_back(std::move(entry));
    }
  }
  return result;
}

std::string index_to_csv(const std::vector<DatasetEntry>& entries) {
  std::string out = "path,label,split\n";
  for (const DatasetEntry& e : entries) {
    out += e.path;
    out += ',';
    out += kClassNames[size_t(e.label)];
    out += ',';
    out += split_name(e.split);
    out += '\n';
  }
  return out;
}

AudioClip pad_or_trim(const AudioClip& clip, int64_t target_len) {
  if (target_len <= 0) throw Error("pad_or_trim: target length must be positive");
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(size_t(target_len), 0.0f);
  int64_t n = std::min<int64_t>(clip.size(), target_len);
  std::copy_n(clip.samples.begin(), n, out.samples.begin());
  return out;
}

AudioClip time_shift(const AudioClip& clip, double shift_s, int sample_rate) {
  int64_t shift = std::llround(shift_s * sample_rate);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.size(), 0.0f);
  int64_t n = clip.size();
  for (int64_t i = 0; i < n; ++i) {
    int64_t src = i - shift;
    if (src >= 0 && src < n) out.samples[size_t(i)] = clip.samples[size_t(src)];
  }
  return out;
}

AudioClip mix_background(const AudioClip& clip, const AudioClip& noise, float coeff,
                         int64_t crop_offset) {
  if (noise.size() < clip.size() + crop_offset)
    throw Error("mix_background: noise clip too short for the requested crop");
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(clip.samples.size());
  for (int64_t i = 0; i < clip.size(); ++i) {
    float v = clip.samples[size_t(i)] + coeff * noise.samples[size_t(crop_offset + i)];
    out.samples[size_t(i)] = std::clamp(v, -1.0f, 1.0f);
  }
  return out;
}

AudioClip make_silence(const std::vector<AudioClip>& noise_files, float coeff,
                       int64_t crop_offset, Pcg32& rng) {
  if (noise_files.empty()) throw Error("make_silence: no background noise files");
  const AudioClip& noise = noise_files[rng.next_below(uint32_t(noise_files.size()))];
  AudioClip zero;
  zero.samples.assign(size_t(kClipSamples), 0.0f);
  int64_t max_offset = std::max<int64_t>(noise.size() - kClipSamples, 0);
  return mix_background(zero, noise, coeff, std::min(crop_offset, max_offset));
}

AudioClip augment(const AudioClip& clip, const AugmentConfig& config,
                  const std::vector<AudioClip>& noise_files, Pcg32& rng) {
  double shift_s = rng.uniform(-config.shift_range_s, config.shift_range_s);
  AudioClip out = time_shift(clip, shift_s, clip.sample_rate);
  if (!noise_files.empty() && rng.next_double() < config.noise_prob) {
    float coeff = float(rng.uniform(0.0, config.noise_coeff_max));
    const AudioClip& noise = noise_files[rng.next_below(uint32_t(noise_files.size()))];
    int64_t max_offset = std::max<int64_t>(noise.size() - out.size(), 0);
    int64_t offset = max_offset > 0 ? int64_t(rng.next_below(uint32_t(max_offset))) : 0;
    out = mix_background(out, noise, coeff, offset);
  }
  return out;
}

}  // namespace kws::audio
