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
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "kws/train.hpp"
#include "oracles.hpp"

using namespace kws;
using namespace kws::train;

TEST_CASE("learning rate schedule") {
  TrainConfig config;
  CHECK(lr_at(0, config) == doctest::Approx(0.1));
  CHECK(lr_at(9999, config) == doctest::Approx(0.1));
  CHECK(lr_at(10000, config) == doctest::Approx(0.01));
  CHECK(lr_at(20000, config) == doctest::Approx(0.001));
  CHECK(lr_at(29999, config) == doctest::Approx(0.001));

  double prev = lr_at(0, config);
  for (int64_t it = 1; it < 40000; it += 997) {
    double lr = lr_at(it, config);
    CHECK(lr <= prev + 1e-15);
    prev = lr;
  }
  CHECK_THROWS_AS(lr_at(-1, config), Error);
}

namespace {

struct ScalarParam {
  Tensor value{std::vector<int64_t>{1}};
  Tensor grad{std::vector<int64_t>{1}};

  std::vector<model::ParamRef> refs() {
    return {{"p", &value, &grad, true}};
  }
};

}  // namespace

TEST_CASE("sgd_step basics") {
  TrainConfig config;
  config.weight_decay = 0.0;

  ScalarParam p;
  p.value.data[0] = 1.5f;
  OptimizerState state;
  auto refs = p.refs();
  sgd_step(refs, state, 0.1, config);  // zero grad, zero velocity
  CHECK(p.value.data[0] == 1.5f);

  // one step: param - lr * grad
  p.grad.data[0] = 2.0f;
  sgd_step(refs, state, 0.1, config);
  CHECK(p.value.data[0] == doctest::Approx(1.5f - 0.1f * 2.0f));

  // two steps from rest with constant gradient g: delta = -lr*g*(1 + 1 + m)
  ScalarParam q;
  OptimizerState qstate;
  auto qrefs = q.refs();
  q.grad.data[0] = 3.0f;
  sgd_step(qrefs, qstate, 0.01, config);
  q.grad.data[0] = 3.0f;
  sgd_step(qrefs, qstate, 0.01, config);
  CHECK(q.value.data[0] == doctest::Approx(-0.01 * 3.0 * 2.9).epsilon(1e-6));
  CHECK(qstate.iteration == 2);
}

TEST_CASE("weight decay shrinks parameters even with zero gradients") {
  TrainConfig config;  // weight_decay = 0.001
  ScalarParam p;
  p.value.data[0] = 4.0f;
  OptimizerState state;
  auto refs = p.refs();
  float prev = 4.0f;
  for (int i = 0; i < 10; ++i) {
    sgd_step(refs, state, 0.1, config);
    CHECK(std::abs(p.value.data[0]) < std::abs(prev));
    prev = p.value.data[0];
  }
}

TEST_CASE("moving statistics receive no decay or update from the optimizer") {
  model::Model m(model::ModelSpec{}, 0);
  auto params = m.params();
  std::vector<float> before;
  for (auto& p : params)
    if (!p.trainable) before.insert(before.end(), p.value->data.begin(), p.value->data.end());
  OptimizerState state;
  TrainConfig config;
  sgd_step(params, state, 0.1, config);
  std::vector<float> after;
  for (auto& p : params)
    if (!p.trainable) after.insert(after.end(), p.value->data.begin(), p.value->data.end());
  CHECK(before == after);
}

TEST_CASE("loss on a fixed batch decreases over 20 iterations (k=0.25, lr=0.01)") {
  auto spec = *model::spec_from_name("tc-resnet8-0.25");
  model::Model m(spec, 31);
  m.set_mode(nn::Mode::Train);
  m.set_dropout_p(0.0f);

  Pcg32 rng(17);
  auto hwc = m.input_hwc();
  const int64_t batch = 8;
  Tensor input = oracles::random_tensor({batch, hwc[0], hwc[1], hwc[2]}, rng, -2.0f, 2.0f);
  std::vector<int> labels;
  for (int64_t b = 0; b < batch; ++b) labels.push_back(int(rng.next_below(12)));

  TrainConfig config;
  config.weight_decay = 0.0;
  OptimizerState state;
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 20; ++it) {
    m.zero_grads();
    Tensor logits = m.forward(input);
    double loss = 0.0;
    Tensor grad(logits.shape);
    Tensor row({12});
    for (int64_t b = 0; b < batch; ++b) {
      loss += nn::softmax_cross_entropy<float>(logits.ptr() + b * 12, 12,
                                               labels[size_t(b)], row.ptr());
      for (int c = 0; c < 12; ++c)
        grad.data[size_t(b * 12 + c)] = row.data[size_t(c)] / float(batch);
    }
    loss /= double(batch);
    if (it == 0) first = loss;
    last = loss;
    m.backward(grad);
    auto params = m.params();
    sgd_step(params, state, 0.01, config);
  }
  CHECK(last < first);
}

namespace {

// In-memory two-class dataset: clips synthesized from the entry path.
ClipLoader synthetic_loader() {
  return [](const audio::DatasetEntry& entry) {
    uint64_t h = 0;
    for (char c : entry.path) h = splitmix64(h ^ uint64_t(uint8_t(c)));
    Pcg32 rng(h);
    audio::AudioClip clip;
    clip.samples.resize(16000);
    double freq = entry.label == 0 ? 440.0 : 1320.0;
    for (size_t i = 0; i < clip.samples.size(); ++i)
      clip.samples[i] = float(0.4 * std::sin(2.0 * M_PI * freq * double(i) / 16000.0) +
                              0.05 * rng.uniform(-1.0, 1.0));
    return clip;
  };
}

std::vector<audio::DatasetEntry> tiny_dataset() {
  using audio::Split;
  return {
      {"yes/a.wav", 0, Split::Train},     {"no/b.wav", 1, Split::Train},
      {"yes/c.wav", 0, Split::Train},     {"no/d.wav", 1, Split::Train},
      {"yes/e.wav", 0, Split::Validation}, {"no/f.wav", 1, Split::Validation},
  };
}

TrainConfig tiny_config() {
  TrainConfig config;
  config.batch_size = 4;
  config.total_iters = 12;
  config.eval_every = 6;
  config.early_stop_patience = 100;
  config.base_lr = 0.01;
  config.rng_seed = 5;
  return config;
}

}  // namespace

TEST_CASE("train_loop is byte-deterministic given a seed") {
  audio::AugmentConfig augment;
  augment.shift_range_s = 0.05;
  augment.noise_prob = 0.0;
  augment.rng_seed = 9;

  auto run = [&]() {
    auto spec = *model::spec_from_name("tc-resnet8-0.25");
    model::Model m(spec, 1);
    return train_loop(m, tiny_dataset(), tiny_config(), augment, synthetic_loader(), {});
  };
  TrainResult a = run();
  TrainResult b = run();
  CHECK(a.metrics_csv == b.metrics_csv);
  CHECK(a.best_checkpoint == b.best_checkpoint);
  CHECK(a.iters_run == 12);

  // metrics log shape: header + one row per iteration
  int rows = 0;
  for (char c : a.metrics_csv) rows += c == '\n';
  CHECK(rows == 13);
  CHECK(a.metrics_csv.rfind("iter,lr,train_loss,val_acc\n", 0) == 0);
}

TEST_CASE("train_loop rejects empty splits") {
  audio::AugmentConfig augment;
  auto spec = *model::spec_from_name("tc-resnet8-0.25");
  model::Model m(spec, 1);
  std::vector<audio::DatasetEntry> only_train = {{"yes/a.wav", 0, audio::Split::Train}};
  CHECK_THROWS_AS(
      train_loop(m, only_train, tiny_config(), augment, synthetic_loader(), {}), Error);
}

TEST_CASE("accuracy helpers") {
  // a classifier that always votes class 0 on a balanced 12-class set
  const int n = 12;
  std::vector<float> probs;
  std::vector<int> labels;
  for (int s = 0; s < 24; ++s) {
    for (int c = 0; c < n; ++c) probs.push_back(c == 0 ? 0.9f : 0.1f / 11.0f);
    labels.push_back(s % n);
  }
  CHECK(accuracy_from_scores(probs, n, labels) == doctest::Approx(1.0 / 12.0));

  // perfect oracle
  std::vector<float> perfect;
  for (int s = 0; s < 24; ++s)
    for (int c = 0; c < n; ++c) perfect.push_back(c == labels[size_t(s)] ? 1.0f : 0.0f);
  CHECK(accuracy_from_scores(perfect, n, labels) == 1.0);

  // argmax is invariant to a per-sample shift
  Pcg32 rng(3);
  std::vector<float> scores(24 * n);
  for (float& v : scores) v = float(rng.uniform(0.0, 1.0));
  std::vector<float> shifted = scores;
  for (int s = 0; s < 24; ++s) {
    float shift = float(rng.uniform(-5.0, 5.0));
    for (int c = 0; c < n; ++c) shifted[size_t(s * n + c)] += shift;
  }
  CHECK(accuracy_from_scores(scores, n, labels) ==
        accuracy_from_scores(shifted, n, labels));

  CHECK_THROWS_AS(accuracy_from_scores({}, n, {}), Error);
}

TEST_CASE("config file parsing") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "kws_test_config.cfg";
  {
    std::ofstream out(path);
    out << "# training setup\n"
        << "batch_size = 7\n"
        << "base_lr = 0.05  # inline comment\n"
        << "noise_prob = 0.25\n"
        << "\n";
  }
  TrainConfig config;
  audio::AugmentConfig augment;
  apply_config_file(path.string(), config, augment);
  CHECK(config.batch_size == 7);
  CHECK(config.base_lr == doctest::Approx(0.05));
  CHECK(augment.noise_prob == doctest::Approx(0.25));

  {
    std::ofstream out(path);
    out << "unknown_key = 3\n";
  }
  CHECK_THROWS_AS(apply_config_file(path.string(), config, augment), Error);
  fs::remove(path);

  CHECK_THROWS_AS(apply_config_file("/nonexistent/kws.cfg", config, augment), Error);
}
