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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "kws/audio.hpp"
#include "kws/mfcc.hpp"
#include "kws/model.hpp"
#include "kws/profiler.hpp"
#include "kws/roc.hpp"
#include "kws/train.hpp"

namespace {

using namespace kws;

model::ModelSpec parse_model_name(const std::string& name) {
  auto spec = model::spec_from_name(name);
  if (!spec) throw Error("unknown model name: " + name);
  return *spec;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << content;
}

// Accepts either a model name (random weights) or a checkpoint path.
model::Model model_from_name_or_checkpoint(const std::string& model,
                                           const std::string& checkpoint,
                                           uint64_t seed) {
  if (!checkpoint.empty()) return model::Model::load_checkpoint_file(checkpoint);
  if (model.empty()) throw Error("need --model or --checkpoint");
  if (auto spec = model::spec_from_name(model)) return model::Model(*spec, seed);
  return model::Model::load_checkpoint_file(model);
}

int cmd_featurize(const std::string& wav, const std::string& out) {
  audio::AudioClip clip = audio::pad_or_trim(audio::read_wav_file(wav));
  features::MfccMatrix m = features::compute_mfcc(clip, features::FeatureConfig{});
  std::ofstream os(out, std::ios::binary);
  if (!os) throw Error("cannot open " + out + " for writing");
  features::write_mfc(os, m);
  std::printf("wrote %lldx%lld mfcc matrix to %s\n", static_cast<long long>(m.t),
              static_cast<long long>(m.f), out.c_str());
  return 0;
}

int cmd_split(const std::string& list, const std::string& data_root, double val,
              double test, double unknown_pct, double silence_pct, uint64_t seed,
              const std::string& out) {
  std::string csv;
  if (!data_root.empty()) {
    auto index = audio::build_dataset_index(data_root, val, test, unknown_pct,
                                            silence_pct, seed);
    csv = audio::index_to_csv(index);
  } else if (!list.empty()) {
    std::ifstream in(list);
    if (!in) throw Error("cannot open list file " + list);
    csv = "path,label,split\n";
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      size_t slash = line.find_last_of('/');
      std::string word =
          slash == std::string::npos ? "" : line.substr(0, line.find_last_of('/'));
      size_t inner = word.find_last_of('/');
      if (inner != std::string::npos) word = word.substr(inner + 1);
      csv += line + "," + word + "," +
             std::string(audio::split_name(audio::assign_split(line, val, test))) + "\n";
    }
  } else {
    throw Error("split needs --list or --data-root");
  }
  if (out.empty())
    std::fputs(csv.c_str(), stdout);
  else
    write_text_file(out, csv);
  return 0;
}

int cmd_train(const std::string& data_root, const std::string& model_name,
              const std::string& config_path, uint64_t seed, double val, double test,
              double unknown_pct, double silence_pct, const std::string& out,
              const std::string& metrics_path) {
  train::TrainConfig config;
  audio::AugmentConfig augment;
  if (!config_path.empty()) train::apply_config_file(config_path, config, augment);
  config.rng_seed = seed;
  augment.rng_seed = mix_seed(seed, 0xa46ULL);

  auto index =
      audio::build_dataset_index(data_root, val, test, unknown_pct, silence_pct, seed);
  auto noise = std::make_shared<std::vector<audio::AudioClip>>(
      train::load_noise_bank(data_root));
  train::ClipLoader loader = train::make_disk_loader(data_root, noise, seed);

  model::Model m(parse_model_name(model_name), seed);
  train::TrainResult result =
      train::train_loop(m, index, config, augment, loader, *noise);

  write_text_file(out, std::string(result.best_checkpoint.begin(),
                                   result.best_checkpoint.end()));
  if (!metrics_path.empty()) write_text_file(metrics_path, result.metrics_csv);
  std::printf("best validation accuracy %.4f at iter %lld (%lld iters run)\n",
              result.best_val_acc, static_cast<long long>(result.best_iter),
              static_cast<long long>(result.iters_run));
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& wav) {
  model::Model m = model::Model::load_checkpoint_file(checkpoint);
  audio::AudioClip clip = audio::pad_or_trim(audio::read_wav_file(wav));
  features::MfccMatrix feats = features::compute_mfcc(clip, features::FeatureConfig{});
  Tensor input = model::Model::input_from_mfcc(feats, m.spec());
  Tensor logits = m.forward_single(input);
  Tensor probs(logits.shape);
  nn::softmax_cross_entropy<float>(logits.ptr(), logits.numel(), 0, nullptr, probs.ptr());
  int argmax = 0;
  for (int c = 1; c < int(probs.numel()); ++c)
    if (probs.data[size_t(c)] > probs.data[size_t(argmax)]) argmax = c;
  std::printf("top1: %s\n", std::string(audio::class_names()[size_t(argmax)]).c_str());
  for (int c = 0; c < int(probs.numel()); ++c)
    std::printf("%s %.6f\n", std::string(audio::class_names()[size_t(c)]).c_str(),
                probs.data[size_t(c)]);
  return 0;
}

std::vector<audio::DatasetEntry> entries_for_split(const std::string& data_root,
                                                   double val, double test,
                                                   double unknown_pct,
                                                   double silence_pct, uint64_t seed,
                                                   const std::string& split) {
  auto index =
      audio::build_dataset_index(data_root, val, test, unknown_pct, silence_pct, seed);
  std::vector<audio::DatasetEntry> out;
  for (const audio::DatasetEntry& e : index)
    if (audio::split_name(e.split) == split) out.push_back(e);
  if (out.empty()) throw Error("no entries in split " + split);
  return out;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_root, double val,
             double test, double unknown_pct, double silence_pct, uint64_t seed,
             const std::string& split) {
  model::Model m = model::Model::load_checkpoint_file(checkpoint);
  auto entries =
      entries_for_split(data_root, val, test, unknown_pct, silence_pct, seed, split);
  auto noise = std::make_shared<std::vector<audio::AudioClip>>(
      train::load_noise_bank(data_root));
  train::ClipLoader loader = train::make_disk_loader(data_root, noise, seed);
  double acc = train::evaluate_accuracy(m, entries, loader);
  std::printf("%s accuracy: %.6f (%zu entries)\n", split.c_str(), acc, entries.size());
  return 0;
}

int cmd_eval_roc(const std::string& checkpoint, const std::string& data_root, double val,
                 double test, double unknown_pct, double silence_pct, uint64_t seed,
                 const std::string& split, const std::string& exclude,
                 const std::string& out) {
  model::Model m = model::Model::load_checkpoint_file(checkpoint);
  auto entries =
      entries_for_split(data_root, val, test, unknown_pct, silence_pct, seed, split);
  auto noise = std::make_shared<std::vector<audio::AudioClip>>(
      train::load_noise_bank(data_root));
  train::ClipLoader loader = train::make_disk_loader(data_root, noise, seed);
  train::Scores scores = train::score_entries(m, entries, loader);

  std::vector<int> excluded;
  std::stringstream ss(exclude);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    int id = audio::label_from_name(token);
    if (id < 0) throw Error("unknown class name in --exclude-classes: " + token);
    excluded.push_back(id);
  }

  roc::RocCurve curve =
      roc::roc_micro(scores.probs, m.spec().n_classes, scores.labels, excluded);
  std::string csv = roc::curve_as_csv(curve);
  if (out.empty())
    std::fputs(csv.c_str(), stdout);
  else
    write_text_file(out, csv);
  std::printf("auc: %.6f\n", curve.auc);
  return 0;
}

int cmd_profile(const std::string& model_name, const std::string& out) {
  profiler::CostReport report = profiler::cost_report(parse_model_name(model_name));
  std::fputs(profiler::report_as_table(report).c_str(), stdout);
  if (!out.empty()) write_text_file(out, profiler::report_as_csv(report));
  return 0;
}

int cmd_bench(const std::string& model_name, const std::string& checkpoint, int runs,
              int warmup, uint64_t seed, const std::string& out) {
  model::Model m = model_from_name_or_checkpoint(model_name, checkpoint, seed);
  m.set_mode(nn::Mode::Infer);
  model::Model folded = m.folded() ? std::move(m) : m.fold_batchnorm();

  auto hwc = folded.input_hwc();
  Tensor input({1, hwc[0], hwc[1], hwc[2]});
  Pcg32 rng(mix_seed(seed, 0xbe4cULL));
  for (float& v : input.data) v = float(rng.gaussian());

  profiler::LatencyReport report = profiler::benchmark_latency(folded, input, runs, warmup);
  std::string json = profiler::latency_as_json(report);
  std::printf("%s\n", json.c_str());
  if (!out.empty()) write_text_file(out, json + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"keyword spotting engine: temporal-convolution residual models"};
  app.require_subcommand(1);

  std::string wav, out, list, data_root, model_name, checkpoint, config_path,
      metrics_path, split = "test", exclude;
  double val = 10.0, test = 10.0, unknown_pct = 10.0, silence_pct = 10.0;
  uint64_t seed = 0;
  int runs = 50, warmup = 5;

  auto* featurize = app.add_subcommand("featurize", "wav -> MFCC matrix (MFC1 file)");
  featurize->add_option("--wav", wav, "input wav file")->required();
  featurize->add_option("--out", out, "output .mfc path")->required();

  auto* split_cmd = app.add_subcommand("split", "emit path,label,split CSV");
  split_cmd->add_option("--list", list, "text file with one path per line");
  split_cmd->add_option("--data-root", data_root, "dataset root directory");
  split_cmd->add_option("--val", val, "validation percentage");
  split_cmd->add_option("--test", test, "test percentage");
  split_cmd->add_option("--unknown-pct", unknown_pct, "unknown share per split");
  split_cmd->add_option("--silence-pct", silence_pct, "silence share per split");
  split_cmd->add_option("--seed", seed, "rng seed");
  split_cmd->add_option("--out", out, "output csv (stdout when omitted)");

  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset root");
  train_cmd->add_option("--data-root", data_root, "dataset root")->required();
  train_cmd->add_option("--model", model_name, "model name")->required();
  train_cmd->add_option("--config", config_path, "key = value config file");
  train_cmd->add_option("--seed", seed, "rng seed");
  train_cmd->add_option("--val", val, "validation percentage");
  train_cmd->add_option("--test", test, "test percentage");
  train_cmd->add_option("--unknown-pct", unknown_pct, "unknown share per split");
  train_cmd->add_option("--silence-pct", silence_pct, "silence share per split");
  train_cmd->add_option("--out", out, "checkpoint output path")->required();
  train_cmd->add_option("--metrics", metrics_path, "metrics csv output path");

  auto* infer = app.add_subcommand("infer", "classify one wav file");
  infer->add_option("--model,--checkpoint", checkpoint, "checkpoint path")->required();
  infer->add_option("--wav", wav, "input wav file")->required();

  auto* eval_cmd = app.add_subcommand("eval", "accuracy on a dataset split");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  eval_cmd->add_option("--data-root", data_root, "dataset root")->required();
  eval_cmd->add_option("--split", split, "train|validation|test");
  eval_cmd->add_option("--val", val, "validation percentage");
  eval_cmd->add_option("--test", test, "test percentage");
  eval_cmd->add_option("--unknown-pct", unknown_pct, "unknown share per split");
  eval_cmd->add_option("--silence-pct", silence_pct, "silence share per split");
  eval_cmd->add_option("--seed", seed, "rng seed");

  auto* roc_cmd = app.add_subcommand("eval-roc", "micro-averaged ROC curve + AUC");
  roc_cmd->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  roc_cmd->add_option("--data-root", data_root, "dataset root")->required();
  roc_cmd->add_option("--split", split, "train|validation|test");
  roc_cmd->add_option("--val", val, "validation percentage");
  roc_cmd->add_option("--test", test, "test percentage");
  roc_cmd->add_option("--unknown-pct", unknown_pct, "unknown share per split");
  roc_cmd->add_option("--silence-pct", silence_pct, "silence share per split");
  roc_cmd->add_option("--seed", seed, "rng seed");
  roc_cmd->add_option("--exclude-classes", exclude, "comma-separated class names");
  roc_cmd->add_option("--out", out, "curve csv output (stdout when omitted)");

  auto* profile = app.add_subcommand("profile", "per-layer params/FLOPs table");
  profile->add_option("--model", model_name, "model name")->required();
  profile->add_option("--out", out, "also write CSV to this path");

  auto* bench = app.add_subcommand("bench", "single-threaded latency benchmark");
  bench->add_option("--model", model_name, "model name or checkpoint path");
  bench->add_option("--checkpoint", checkpoint, "checkpoint path");
  bench->add_option("--runs", runs, "timed runs");
  bench->add_option("--warmup", warmup, "warmup runs excluded from stats");
  bench->add_option("--seed", seed, "rng seed for weights/input");
  bench->add_option("--out", out, "also write JSON to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (featurize->parsed()) return cmd_featurize(wav, out);
    if (split_cmd->parsed())
      return cmd_split(list, data_root, val, test, unknown_pct, silence_pct, seed, out);
    if (train_cmd->parsed())
      return cmd_train(data_root, model_name, config_path, seed, val, test, unknown_pct,
                       silence_pct, out, metrics_path);
    if (infer->parsed()) return cmd_infer(checkpoint, wav);
    if (eval_cmd->parsed())
      return cmd_eval(checkpoint, data_root, val, test, unknown_pct, silence_pct, seed,
                      split);
    if (roc_cmd->parsed())
      return cmd_eval_roc(checkpoint, data_root, val, test, unknown_pct, silence_pct,
                          seed, split, exclude, out);
    if (profile->parsed()) return cmd_profile(model_name, out);
    if (bench->parsed())
      return cmd_bench(model_name, checkpoint, runs, warmup, seed, out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
