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

// Writes a small synthetic Speech-Commands-style dataset for the CLI
// pipeline test: per-word tone bursts plus a background noise track.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "kws/audio.hpp"
#include "kws/rng.hpp"

namespace fs = std::filesystem;
using namespace kws;

namespace {

void write_wav(const fs::path& path, const audio::AudioClip& clip) {
  fs::create_directories(path.parent_path());
  auto bytes = audio::encode_wav(clip);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

audio::AudioClip tone(double freq, uint64_t seed) {
  Pcg32 rng(seed);
  audio::AudioClip clip;
  clip.samples.resize(16000);
  for (size_t i = 0; i < clip.samples.size(); ++i)
    clip.samples[i] = float(0.4 * std::sin(2.0 * M_PI * freq * double(i) / 16000.0) +
                            0.05 * rng.uniform(-1.0, 1.0));
  return clip;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <output-root>\n", argv[0]);
    return 2;
  }
  fs::path root = argv[1];
  const char* words[] = {"yes", "no",  "up",   "down", "left",
                         "right", "on", "off", "stop", "go", "cat"};
  Pcg32 name_rng(424242);
  int word_id = 0;
  for (const char* word : words) {
    double freq = 300.0 + 150.0 * word_id++;
    for (int i = 0; i < 12; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%08x_nohash_%d.wav", name_rng.next(), i % 2);
      write_wav(root / word / name, tone(freq, mix_seed(uint64_t(word_id), uint64_t(i))));
    }
  }

  Pcg32 noise_rng(7);
  audio::AudioClip noise;
  noise.samples.resize(16000 * 4);
  for (float& v : noise.samples) v = float(0.2 * noise_rng.uniform(-1.0, 1.0));
  write_wav(root / "_background_noise_" / "white.wav", noise);
  return 0;
}
