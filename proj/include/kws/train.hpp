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
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kws/audio.hpp"
#include "kws/mfcc.hpp"
#include "kws/model.hpp"

namespace kws::train {

struct TrainConfig {
  int64_t batch_size = 100;
  int64_t total_iters = 30000;
  double base_lr = 0.1;
  int64_t lr_drop_every = 10000;
  double lr_drop_factor = 10.0;
  double momentum = 0.9;
  double weight_decay = 0.001;
  double dropout_p = 0.5;
  int64_t eval_every = 500;
  int64_t early_stop_patience = 10;  // evaluation rounds without improvement
  uint64_t rng_seed = 0;
};

// base_lr / factor^floor(iter / drop_every)
double lr_at(int64_t iter, const TrainConfig& config);

struct OptimizerState {
  std::vector<Tensor> velocity;  // aligned with the trainable params order
  int64_t iteration = 0;
};

// SGD with momentum and coupled L2 weight decay on every trainable
// parameter (moving statistics carry no gradient and are skipped).
void sgd_step(std::vector<model::ParamRef>& params, OptimizerState& state, double lr,
              const TrainConfig& config);

using ClipLoader = std::function<audio::AudioClip(const audio::DatasetEntry&)>;

// Disk-backed loader for a dataset root; silence entries are synthesized
// deterministically per entry path from the noise bank.
ClipLoader make_disk_loader(const std::string& root,
                            std::shared_ptr<std::vector<audio::AudioClip>> noise_bank,
                            uint64_t seed);

std::vector<audio::AudioClip> load_noise_bank(const std::string& root);

struct TrainResult {
  std::vector<uint8_t> best_checkpoint;
  std::string metrics_csv;  // iter,lr,train_loss,val_acc
  double best_val_acc = 0.0;
  int64_t best_iter = -1;
  int64_t iters_run = 0;
};

TrainResult train_loop(model::Model& m, const std::vector<audio::DatasetEntry>& index,
                       const TrainConfig& config, const audio::AugmentConfig& augment,
                       const ClipLoader& loader,
                       const std::vector<audio::AudioClip>& noise_bank);

struct Scores {
  std::vector<float> probs;  // n x n_classes, rows sum to 1
  std::vector<int> labels;
};

// Deterministic preprocessing (pad/trim + MFCC, no augmentation), infer mode.
Scores score_entries(model::Model& m, const std::vector<audio::DatasetEntry>& entries,
                     const ClipLoader& loader);

double accuracy_from_scores(const std::vector<float>& probs, int n_classes,
                            const std::vector<int>& labels);

double evaluate_accuracy(model::Model& m, const std::vector<audio::DatasetEntry>& entries,
                         const ClipLoader& loader);

// Flat key = value lines with # comments, mirroring the TrainConfig and
// AugmentConfig field names.
void apply_config_file(const std::string& path, TrainConfig& train_config,
                       audio::AugmentConfig& augment_config);

}  // namespace kws::train
