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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "kws/audio.hpp"
#include "oracles.hpp"

using namespace kws;
using namespace kws::audio;
namespace fs = std::filesystem;

namespace {

AudioClip impulse_clip(int64_t n, int64_t at) {
  AudioClip c;
  c.samples.assign(size_t(n), 0.0f);
  c.samples[size_t(at)] = 1.0f;
  return c;
}

std::vector<uint8_t> wav_of(const std::vector<float>& samples) {
  AudioClip c;
  c.samples = samples;
  return encode_wav(c);
}

}  // namespace

TEST_CASE("decode_wav: scaling, zero payload, malformed container") {
  AudioClip max;
  max.samples = {32767.0f / 32768.0f};
  std::vector<uint8_t> bytes = encode_wav(max);
  AudioClip back = decode_wav(bytes);
  CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-9));

  AudioClip zeros;
  zeros.samples.assign(16000, 0.0f);
  AudioClip z = decode_wav(encode_wav(zeros));
  CHECK(z.size() == 16000);
  for (float v : z.samples) CHECK(v == 0.0f);

  std::vector<uint8_t> rifx = encode_wav(zeros);
  rifx[3] = 'X';  // RIFF -> RIFX
  CHECK_THROWS_WITH_AS(decode_wav(rifx), doctest::Contains("RIFF"), DecodeError);
}

TEST_CASE("decode_wav: rejects unsupported formats naming the field") {
  std::vector<uint8_t> base = wav_of({0.0f, 0.1f, -0.1f});

  auto patched = [&](size_t offset, uint8_t value) {
    std::vector<uint8_t> b = base;
    b[offset] = value;
    return b;
  };
  // fmt chunk layout: format@20, channels@22, rate@24, bits@34
  CHECK_THROWS_WITH_AS(decode_wav(patched(20, 3)), doctest::Contains("format"),
                       DecodeError);
  CHECK_THROWS_WITH_AS(decode_wav(patched(22, 2)), doctest::Contains("channel"),
                       DecodeError);
  CHECK_THROWS_WITH_AS(decode_wav(patched(24, 0x22)), doctest::Contains("rate"),
                       DecodeError);
  CHECK_THROWS_WITH_AS(decode_wav(patched(34, 8)), doctest::Contains("depth"),
                       DecodeError);

  std::vector<uint8_t> truncated(base.begin(), base.begin() + 30);
  CHECK_THROWS_AS(decode_wav(truncated), DecodeError);
}

TEST_CASE("assign_split matches the reference hashing scheme") {
  // expected values computed with an independent SHA-1 implementation:
  //   "abc"      -> 60.19756615309094 %
  //   "0ab3b47d" ->  9.130575575907345 %
  //   "two"      -> 18.735202541464584 %
  CHECK(assign_split("abc_nohash_0.wav", 10, 10) == Split::Train);
  CHECK(assign_split("abc_nohash_7.wav", 10, 10) == Split::Train);
  CHECK(assign_split("dir/abc_nohash_1.wav", 10, 10) == Split::Train);
  CHECK(assign_split("0ab3b47d_nohash_3.wav", 10, 10) == Split::Validation);
  CHECK(assign_split("two_nohash_0.wav", 10, 10) == Split::Test);

  // boundary behaviour around the frozen percentage of "abc"
  CHECK(assign_split("abc_nohash_0.wav", 61, 10) == Split::Validation);
  CHECK(assign_split("abc_nohash_0.wav", 55, 10) == Split::Test);
  CHECK(assign_split("abc_nohash_0.wav", 60.19, 0.1) == Split::Test);
}

TEST_CASE("assign_split ignores everything but the stripped basename") {
  for (const char* name : {"x_nohash_0.wav", "x_nohash_99.wav", "a/b/x_nohash_1.wav",
                           "x_nohash_0_nohash_2.wav"})
    CHECK(assign_split(name, 23, 17) == assign_split("x_nohash_5.wav", 23, 17));
}

TEST_CASE("assign_split with zero percentages trains everything") {
  Pcg32 rng(4242);
  for (int i = 0; i < 50; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%08x_nohash_%d.wav", rng.next(), i);
    CHECK(assign_split(name, 0, 0) == Split::Train);
  }
}

TEST_CASE("split fractions over a synthetic corpus stay near 80/10/10") {
  Pcg32 rng(777);
  int counts[3] = {0, 0, 0};
  const int speakers = 4000;
  for (int i = 0; i < speakers; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%08x%08x", rng.next(), rng.next());
    for (int u = 0; u < 2; ++u) {
      char file[96];
      std::snprintf(file, sizeof(file), "%s_nohash_%d.wav", name, u);
      counts[int(assign_split(file, 10, 10))]++;
    }
  }
  double total = speakers * 2.0;
  // +-1.5 percentage points
  CHECK(std::abs(counts[int(Split::Train)] / total - 0.80) < 0.015);
  CHECK(std::abs(counts[int(Split::Validation)] / total - 0.10) < 0.015);
  CHECK(std::abs(counts[int(Split::Test)] / total - 0.10) < 0.015);
}

TEST_CASE("pad_or_trim") {
  AudioClip short_clip;
  short_clip.samples.assign(15000, 0.25f);
  AudioClip padded = pad_or_trim(short_clip);
  CHECK(padded.size() == 16000);
  CHECK(padded.samples[14999] == 0.25f);
  for (int64_t i = 15000; i < 16000; ++i) CHECK(padded.samples[size_t(i)] == 0.0f);

  AudioClip exact;
  exact.samples.assign(16000, 0.5f);
  CHECK(pad_or_trim(exact).samples == exact.samples);

  AudioClip long_clip;
  long_clip.samples.assign(17000, 0.0f);
  long_clip.samples[100] = 1.0f;
  long_clip.samples[16500] = 1.0f;
  AudioClip trimmed = pad_or_trim(long_clip);
  CHECK(trimmed.size() == 16000);
  CHECK(trimmed.samples[100] == 1.0f);

  // idempotent at the same target length
  AudioClip twice = pad_or_trim(pad_or_trim(short_clip));
  CHECK(twice.samples == padded.samples);
}

TEST_CASE("time_shift moves the impulse and keeps the length") {
  AudioClip clip = impulse_clip(16000, 0);
  AudioClip same = time_shift(clip, 0.0, 16000);
  CHECK(same.samples == clip.samples);

  AudioClip delayed = time_shift(clip, 0.1, 16000);
  CHECK(delayed.size() == 16000);
  CHECK(delayed.samples[1600] == 1.0f);
  CHECK(delayed.samples[0] == 0.0f);

  AudioClip advanced = time_shift(impulse_clip(16000, 1600), -0.1, 16000);
  CHECK(advanced.samples[0] == 1.0f);
}

TEST_CASE("mix_background") {
  AudioClip clip;
  clip.samples.assign(100, 0.25f);
  AudioClip noise;
  noise.samples.assign(300, 1.0f);

  CHECK(mix_background(clip, noise, 0.0f, 7).samples == clip.samples);

  AudioClip zeros;
  zeros.samples.assign(100, 0.0f);
  AudioClip mixed = mix_background(zeros, noise, 0.1f, 0);
  for (float v : mixed.samples) CHECK(v == doctest::Approx(0.1f));

  // elementwise loop oracle with clamping
  Pcg32 rng(55);
  AudioClip a, n;
  a.samples.resize(256);
  n.samples.resize(600);
  for (float& v : a.samples) v = float(rng.uniform(-1.0, 1.0));
  for (float& v : n.samples) v = float(rng.uniform(-1.0, 1.0));
  const float coeff = 0.8f;
  const int64_t offset = 13;
  AudioClip got = mix_background(a, n, coeff, offset);
  for (size_t i = 0; i < a.samples.size(); ++i) {
    double want = double(a.samples[i]) + double(coeff) * double(n.samples[i + 13]);
    want = std::min(1.0, std::max(-1.0, want));
    CHECK(std::abs(double(got.samples[i]) - want) < 1e-7);
  }

  CHECK_THROWS_AS(mix_background(clip, AudioClip{}, 0.5f, 0), Error);
}

TEST_CASE("make_silence") {
  AudioClip noise;
  noise.samples.assign(40000, 0.5f);
  std::vector<AudioClip> bank = {noise};

  Pcg32 rng(1);
  AudioClip silent = make_silence(bank, 0.0f, 100, rng);
  CHECK(silent.size() == 16000);
  for (float v : silent.samples) CHECK(v == 0.0f);

  Pcg32 r1(42), r2(42);
  AudioClip a = make_silence(bank, 0.3f, 5, r1);
  AudioClip b = make_silence(bank, 0.3f, 5, r2);
  CHECK(a.samples == b.samples);
  CHECK(a.samples[0] == doctest::Approx(0.15f));

  std::vector<AudioClip> empty;
  Pcg32 r3(0);
  CHECK_THROWS_AS(make_silence(empty, 0.1f, 0, r3), Error);
}

TEST_CASE("augment with zero shift range and zero noise probability is the identity") {
  Pcg32 data_rng(66);
  AudioClip clip;
  clip.samples.resize(16000);
  for (float& v : clip.samples) v = float(data_rng.uniform(-0.5, 0.5));
  AugmentConfig config;
  config.shift_range_s = 0.0;
  config.noise_prob = 0.0;
  Pcg32 rng(3);
  AudioClip out = augment(clip, config, {}, rng);
  CHECK(out.samples == clip.samples);
}

namespace {

struct TempTree {
  fs::path root;
  explicit TempTree(const std::string& tag) {
    root = fs::temp_directory_path() / ("kws_test_" + tag);
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~TempTree() { fs::remove_all(root); }

  void add_wav(const std::string& rel, const std::vector<float>& samples) {
    fs::path p = root / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    auto bytes = wav_of(samples);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              std::streamsize(bytes.size()));
  }
};

const std::vector<float> kTinyWave = {0.0f, 0.1f, -0.1f, 0.2f};

}  // namespace

TEST_CASE("build_dataset_index") {
  TempTree tree("index");
  Pcg32 rng(88);
  const char* targets[] = {"yes", "no",  "up",   "down", "left",
                           "right", "on", "off", "stop", "go"};
  for (const char* word : targets)
    for (int i = 0; i < 6; ++i) {
      char name[96];
      std::snprintf(name, sizeof(name), "%s/%08x_nohash_0.wav", word, rng.next());
      tree.add_wav(name, kTinyWave);
    }
  for (int i = 0; i < 8; ++i) {
    char name[96];
    std::snprintf(name, sizeof(name), "cat/%08x_nohash_0.wav", rng.next());
    tree.add_wav(name, kTinyWave);
  }
  tree.add_wav("_background_noise_/hum.wav", std::vector<float>(2000, 0.05f));

  auto index = build_dataset_index(tree.root.string(), 20, 20, 10, 10, 7);

  std::set<int> labels;
  int silence = 0, unknown = 0;
  for (const DatasetEntry& e : index) {
    labels.insert(e.label);
    if (e.label == kSilenceLabel) {
      silence++;
      CHECK(e.path.starts_with("_silence_/"));
    }
    if (e.label == kUnknownLabel) unknown++;
    CHECK(e.path.find("_background_noise_") == std::string::npos);
    if (e.label < kSilenceLabel)
      CHECK(e.split == assign_split(e.path, 20, 20));
  }
  CHECK(labels.count(kSilenceLabel) == 1);
  CHECK(labels.count(kUnknownLabel) == 1);
  CHECK(silence > 0);
  CHECK(unknown > 0);
  CHECK(unknown <= 8);

  // determinism: byte-identical CSV for the same seed
  auto again = build_dataset_index(tree.root.string(), 20, 20, 10, 10, 7);
  CHECK(index_to_csv(index) == index_to_csv(again));

  // with unknown and silence disabled, only the ten target labels remain
  auto plain = build_dataset_index(tree.root.string(), 20, 20, 0, 0, 7);
  std::set<int> plain_labels;
  for (const DatasetEntry& e : plain) plain_labels.insert(e.label);
  CHECK(plain_labels.size() == 10);
  CHECK(plain_labels.count(kSilenceLabel) == 0);

  CHECK_THROWS_AS(build_dataset_index((tree.root / "nope").string(), 10, 10, 10, 10, 0),
                  IndexError);
}

TEST_CASE("build_dataset_index requires the background noise directory") {
  TempTree tree("nonoise");
  tree.add_wav("yes/a_nohash_0.wav", kTinyWave);
  CHECK_THROWS_AS(build_dataset_index(tree.root.string(), 10, 10, 10, 10, 0), IndexError);
}

TEST_CASE("index csv format") {
  std::vector<DatasetEntry> entries = {
      {"yes/a_nohash_0.wav", 0, Split::Train},
      {"_silence_/train_0.wav", kSilenceLabel, Split::Validation},
  };
  CHECK(index_to_csv(entries) ==
        "path,label,split\n"
        "yes/a_nohash_0.wav,yes,train\n"
        "_silence_/train_0.wav,silence,validation\n");
}
