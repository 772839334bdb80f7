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

#include "kws/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include "kws/nn_kernels.hpp"

namespace kws::train {

namespace fs = std::filesystem;

double lr_at(int64_t iter, const TrainConfig& config) {
  if (iter < 0) throw Error("lr_at: negative iteration");
  return config.base_lr / std::pow(config.lr_drop_factor,
                                   double(iter / config.lr_drop_every));
}

void sgd_step(std::vector<model::ParamRef>& params, OptimizerState& state, double lr,
              const TrainConfig& config) {
  std::vector<model::ParamRef*> trainable;
  for (model::ParamRef& p : params)
    if (p.trainable && p.grad != nullptr) trainable.push_back(&p);
  if (state.velocity.empty()) {
    state.velocity.reserve(trainable.size());
    for (model::ParamRef* p : trainable) state.velocity.emplace_back(p->value->shape);
  }
  if (state.velocity.size() != trainable.size())
    throw ShapeError("optimizer state does not match the parameter table");

  const float m = float(config.momentum);
  const float wd = float(config.weight_decay);
  const float flr = float(lr);
  for (size_t i = 0; i < trainable.size(); ++i) {
    Tensor& value = *trainable[i]->value;
    Tensor& grad = *trainable[i]->grad;
    Tensor& vel = state.velocity[i];
    if (!value.same_shape(grad) || !value.same_shape(vel))
      throw ShapeError("sgd_step: shape mismatch for " + trainable[i]->name);
    for (int64_t j = 0; j < value.numel(); ++j) {
      float g = grad.data[size_t(j)] + wd * value.data[size_t(j)];
      vel.data[size_t(j)] = m * vel.data[size_t(j)] + g;
      value.data[size_t(j)] -= flr * vel.data[size_t(j)];
    }
  }
  state.iteration++;
}

std::vector<audio::AudioClip> load_noise_bank(const std::string& root) {
  fs::path dir = fs::path(root) / "_background_noise_";
  if (!fs::is_directory(dir))
    throw IndexError("no _background_noise_ directory under " + root);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav")
      files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::vector<audio::AudioClip> bank;
  for (const std::string& f : files) bank.push_back(audio::read_wav_file(f));
  return bank;
}

ClipLoader make_disk_loader(const std::string& root,
                            std::shared_ptr<std::vector<audio::AudioClip>> noise_bank,
                            uint64_t seed) {
  return [root, noise_bank, seed](const audio::DatasetEntry& entry) {
    if (entry.label == audio::kSilenceLabel) {
      // Synthesized per entry: background crop at a volume in U(0, 1).
      uint64_t h = seed;
      for (char c : entry.path) h = splitmix64(h ^ uint64_t(uint8_t(c)));
      Pcg32 rng(mix_seed(h, 0x73696cULL));
      if (noise_bank == nullptr || noise_bank->empty())
        return audio::pad_or_trim(audio::AudioClip{}, audio::kClipSamples);
      float coeff = float(rng.next_double());
      const audio::AudioClip& probe = (*noise_bank)[0];
      int64_t span = std::max<int64_t>(probe.size() - audio::kClipSamples, 1);
      int64_t offset = int64_t(rng.next_below(uint32_t(std::min<int64_t>(span, 1u << 30))));
      return audio::make_silence(*noise_bank, coeff, offset, rng);
    }
    return audio::read_wav_file((fs::path(root) / entry.path).string());
  };
}

namespace {

struct Batch {
  Tensor input;  // [batch][h][w][c]
  std::vector<int> labels;
};

Batch assemble_batch(model::Model& m, const std::vector<const audio::DatasetEntry*>& picks,
                     const audio::AugmentConfig& augment, bool do_augment,
                     const ClipLoader& loader,
                     const std::vector<audio::AudioClip>& noise_bank, int64_t iter) {
  const features::FeatureConfig feat;
  auto hwc = m.input_hwc();
  int64_t sample_elems = hwc[0] * hwc[1] * hwc[2];
  Batch batch;
  batch.input = Tensor({int64_t(picks.size()), hwc[0], hwc[1], hwc[2]});
  for (size_t i = 0; i < picks.size(); ++i) {
    const audio::DatasetEntry& entry = *picks[i];
    audio::AudioClip clip = audio::pad_or_trim(loader(entry));
    if (do_augment && entry.label != audio::kSilenceLabel) {
      Pcg32 rng(mix_seed(augment.rng_seed, uint64_t(iter), i));
      clip = audio::augment(clip, augment, noise_bank, rng);
    }
    features::MfccMatrix feats = features::compute_mfcc(clip, feat);
    Tensor x = model::Model::input_from_mfcc(feats, m.spec());
    std::copy(x.data.begin(), x.data.end(),
              batch.input.data.begin() + int64_t(i) * sample_elems);
    batch.labels.push_back(entry.label);
  }
  return batch;
}

}  // namespace

Scores score_entries(model::Model& m, const std::vector<audio::DatasetEntry>& entries,
                     const ClipLoader& loader) {
  if (entries.empty()) throw Error("score_entries: no entries");
  nn::Mode saved = m.mode();
  m.set_mode(nn::Mode::Infer);
  const features::FeatureConfig feat;
  const int n_classes = m.spec().n_classes;
  Scores scores;
  scores.probs.resize(entries.size() * size_t(n_classes));
  scores.labels.reserve(entries.size());

  constexpr int64_t kChunk = 64;
  auto hwc = m.input_hwc();
  int64_t sample_elems = hwc[0] * hwc[1] * hwc[2];
  for (size_t start = 0; start < entries.size(); start += kChunk) {
    size_t n = std::min<size_t>(kChunk, entries.size() - start);
    Tensor input({int64_t(n), hwc[0], hwc[1], hwc[2]});
    for (size_t i = 0; i < n; ++i) {
      audio::AudioClip clip = audio::pad_or_trim(loader(entries[start + i]));
      features::MfccMatrix feats = features::compute_mfcc(clip, feat);
      Tensor x = model::Model::input_from_mfcc(feats, m.spec());
      std::copy(x.data.begin(), x.data.end(),
                input.data.begin() + int64_t(i) * sample_elems);
    }
    Tensor logits = m.forward(input);
    for (size_t i = 0; i < n; ++i) {
      nn::softmax_cross_entropy<float>(logits.ptr() + int64_t(i) * n_classes, n_classes,
                                       0, nullptr,
                                       scores.probs.data() + (start + i) * size_t(n_classes));
      scores.labels.push_back(entries[start + i].label);
    }
  }
  m.set_mode(saved);
  return scores;
}

double accuracy_from_scores(const std::vector<float>& probs, int n_classes,
                            const std::vector<int>& labels) {
  if (labels.empty()) throw Error("accuracy: empty entry list");
  size_t correct = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    const float* row = probs.data() + i * size_t(n_classes);
    int argmax = 0;
    for (int c = 1; c < n_classes; ++c)
      if (row[c] > row[argmax]) argmax = c;
    if (argmax == labels[i]) correct++;
  }
  return double(correct) / double(labels.size());
}

double evaluate_accuracy(model::Model& m, const std::vector<audio::DatasetEntry>& entries,
                         const ClipLoader& loader) {
  Scores s = score_entries(m, entries, loader);
  return accuracy_from_scores(s.probs, m.spec().n_classes, s.labels);
}

TrainResult train_loop(model::Model& m, const std::vector<audio::DatasetEntry>& index,
                       const TrainConfig& config, const audio::AugmentConfig& augment,
                       const ClipLoader& loader,
                       const std::vector<audio::AudioClip>& noise_bank) {
  std::vector<const audio::DatasetEntry*> train_entries;
  std::vector<audio::DatasetEntry> val_entries;
  for (const audio::DatasetEntry& e : index) {
    if (e.split == audio::Split::Train) train_entries.push_back(&e);
    if (e.split == audio::Split::Validation) val_entries.push_back(e);
  }
  if (train_entries.empty()) throw Error("train_loop: empty train split");
  if (val_entries.empty()) throw Error("train_loop: empty validation split");

  m.set_mode(nn::Mode::Train);
  m.set_dropout_p(float(config.dropout_p));

  OptimizerState opt;
  TrainResult result;
  result.metrics_csv = "iter,lr,train_loss,val_acc\n";
  int64_t rounds_without_improvement = 0;
  char buf[128];

  for (int64_t iter = 0; iter < config.total_iters; ++iter) {
    // Uniform with replacement; reseeded per iteration.
    Pcg32 pick_rng(mix_seed(config.rng_seed, 0xba7c4ULL, uint64_t(iter)));
    std::vector<const audio::DatasetEntry*> picks;
    picks.reserve(size_t(config.batch_size));
    for (int64_t i = 0; i < config.batch_size; ++i)
      picks.push_back(train_entries[pick_rng.next_below(uint32_t(train_entries.size()))]);

    Batch batch = assemble_batch(m, picks, augment, true, loader, noise_bank, iter);

    Pcg32 dropout_rng(mix_seed(config.rng_seed, 0xd409ULL, uint64_t(iter)));
    m.zero_grads();
    Tensor logits = m.forward(batch.input, &dropout_rng);

    const int n_classes = m.spec().n_classes;
    double loss = 0.0;
    Tensor grad_logits(logits.shape);
    Tensor grad_row({int64_t(n_classes)});
    for (int64_t b = 0; b < int64_t(picks.size()); ++b) {
      loss += nn::softmax_cross_entropy<float>(logits.ptr() + b * n_classes, n_classes,
                                               batch.labels[size_t(b)], grad_row.ptr());
      for (int c = 0; c < n_classes; ++c)
        grad_logits.data[size_t(b * n_classes + c)] =
            grad_row.data[size_t(c)] / float(picks.size());
    }
    loss /= double(picks.size());

    m.backward(grad_logits);
    double lr = lr_at(iter, config);
    auto params = m.params();
    sgd_step(params, opt, lr, config);
    result.iters_run = iter + 1;

    bool eval_now =
        (iter + 1) % config.eval_every == 0 || iter + 1 == config.total_iters;
    std::string val_field;
    if (eval_now) {
      double acc = evaluate_accuracy(m, val_entries, loader);
      m.set_mode(nn::Mode::Train);
      std::snprintf(buf, sizeof(buf), "%.6f", acc);
      val_field = buf;
      if (acc > result.best_val_acc || result.best_iter < 0) {
        result.best_val_acc = acc;
        result.best_iter = iter + 1;
        result.best_checkpoint = m.save_checkpoint();
        rounds_without_improvement = 0;
      } else {
        rounds_without_improvement++;
      }
    }
    std::snprintf(buf, sizeof(buf), "%lld,%.6g,%.6f,", static_cast<long long>(iter), lr,
                  loss);
    result.metrics_csv += buf;
    result.metrics_csv += val_field;
    result.metrics_csv += '\n';

    if (rounds_without_improvement >= config.early_stop_patience) break;
  }

  if (result.best_checkpoint.empty()) result.best_checkpoint = m.save_checkpoint();
  return result;
}

void apply_config_file(const std::string& path, TrainConfig& train_config,
                       audio::AugmentConfig& augment_config) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t eq = line.find('=');
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    if (eq == std::string::npos) {
      if (!trim(line).empty())
        throw Error("config line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw Error("config line " + std::to_string(lineno) + ": empty key or value");
    try {
      if (key == "batch_size") train_config.batch_size = std::stoll(value);
      else if (key == "total_iters") train_config.total_iters = std::stoll(value);
      else if (key == "base_lr") train_config.base_lr = std::stod(value);
      else if (key == "lr_drop_every") train_config.lr_drop_every = std::stoll(value);
      else if (key == "lr_drop_factor") train_config.lr_drop_factor = std::stod(value);
      else if (key == "momentum") train_config.momentum = std::stod(value);
      else if (key == "weight_decay") train_config.weight_decay = std::stod(value);
      else if (key == "dropout_p") train_config.dropout_p = std::stod(value);
      else if (key == "eval_every") train_config.eval_every = std::stoll(value);
      else if (key == "early_stop_patience")
        train_config.early_stop_patience = std::stoll(value);
      else if (key == "rng_seed") train_config.rng_seed = std::stoull(value);
      else if (key == "shift_range_s") augment_config.shift_range_s = std::stod(value);
      else if (key == "noise_coeff_max") augment_config.noise_coeff_max = std::stod(value);
      else if (key == "noise_prob") augment_config.noise_prob = std::stod(value);
      else throw Error("config line " + std::to_string(lineno) + ": unknown key " + key);
    } catch (const std::invalid_argument&) {
      throw Error("config line " + std::to_string(lineno) + ": bad value for " + key);
    }
  }
}

}  // namespace kws::train
