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

#include "kws/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "kws/nn_kernels.hpp"

namespace kws::profiler {

namespace {

std::string shape3(int64_t h, int64_t w, int64_t c) {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

struct Walk {
  CostReport report;
  int64_t h, w;

  void add(CostRow row) {
    report.total_params_all += row.params_all;
    report.total_params_trainable += row.params_trainable;
    report.total_flops += row.flops;
    report.rows.push_back(std::move(row));
  }

  void conv(const std::string& name, int64_t kh, int64_t kw, int64_t cin, int64_t cout,
            int64_t sh, int64_t sw) {
    h = nn::same_out_dim(h, sh);
    w = nn::same_out_dim(w, sw);
    int64_t params = kh * kw * cin * cout;
    add({name, shape3(h, w, cout), params, params, 2 * params * h * w});
  }

  void bn(const std::string& name, int64_t c) {
    add({name, shape3(h, w, c), 4 * c, 2 * c, 0});
  }

  void zero(const std::string& name, int64_t c) {
    add({name, shape3(h, w, c), 0, 0, 0});
  }

  void pool(const std::string& name, int64_t stride, int64_t c) {
    h = nn::same_out_dim(h, stride);
    w = nn::same_out_dim(w, stride);
    add({name, shape3(h, w, c), 0, 0, 0});
  }
};

}  // namespace

CostReport cost_report(const model::ModelSpec& spec) {
  model::validate_spec(spec);
  bool temporal = spec.family == model::Family::TcResnet;
  auto ch = model::channel_schedule(spec);

  Walk walk;
  walk.h = spec.input_t;
  walk.w = temporal ? 1 : spec.input_f;
  int64_t cin0 = temporal ? spec.input_f : 1;
  int64_t kh = temporal ? 9 : 3;
  int64_t kw = temporal ? 1 : 3;

  walk.conv("conv0", 3, temporal ? 1 : 3, cin0, ch[0], 1, 1);
  walk.bn("conv0/bn", ch[0]);
  walk.zero("conv0/relu", ch[0]);
  if (spec.family == model::Family::Resnet2dPool) walk.pool("avg_pool", 4, ch[0]);

  int block_id = 1;
  for (const model::BlockPlan& p : model::block_schedule(spec)) {
    std::string base = "block" + std::to_string(block_id++);
    int64_t sw = temporal ? 1 : p.stride;
    // shortcut sees the block input geometry
    int64_t in_h = walk.h, in_w = walk.w;
    walk.conv(base + "/conv1", kh, kw, p.cin, p.cout, p.stride, sw);
    walk.bn(base + "/bn1", p.cout);
    walk.zero(base + "/relu1", p.cout);
    walk.conv(base + "/conv2", kh, kw, p.cout, p.cout, 1, 1);
    walk.bn(base + "/bn2", p.cout);
    if (!(p.stride == 1 && p.cin == p.cout)) {
      int64_t out_h = walk.h, out_w = walk.w;
      walk.h = in_h;
      walk.w = in_w;
      walk.conv(base + "/shortcut/conv", 1, 1, p.cin, p.cout, p.stride, sw);
      walk.bn(base + "/shortcut/bn", p.cout);
      walk.zero(base + "/shortcut/relu", p.cout);
      walk.h = out_h;
      walk.w = out_w;
    }
    walk.zero(base + "/add", p.cout);
    walk.zero(base + "/relu2", p.cout);
  }

  walk.h = 1;
  walk.w = 1;
  walk.zero("global_pool", ch[3]);
  walk.zero("dropout", ch[3]);
  int64_t fc_params = ch[3] * spec.n_classes;
  walk.add({"fc", "1x1x" + std::to_string(spec.n_classes), fc_params, fc_params,
            2 * fc_params});
  return walk.report;
}

int64_t count_params(const model::ModelSpec& spec) {
  return cost_report(spec).total_params_all;
}

int64_t count_flops(const model::ModelSpec& spec) { return cost_report(spec).total_flops; }

std::string report_as_table(const CostReport& r) {
  size_t name_w = 5;
  for (const CostRow& row : r.rows) name_w = std::max(name_w, row.name.size());
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-*s  %-12s %12s %12s %14s\n", int(name_w), "layer",
                "out_shape", "params_all", "trainable", "flops");
  out += buf;
  for (const CostRow& row : r.rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %-12s %12lld %12lld %14lld\n", int(name_w),
                  row.name.c_str(), row.out_shape.c_str(),
                  static_cast<long long>(row.params_all),
                  static_cast<long long>(row.params_trainable),
                  static_cast<long long>(row.flops));
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-*s  %-12s %12lld %12lld %14lld\n", int(name_w),
                "TOTAL", "", static_cast<long long>(r.total_params_all),
                static_cast<long long>(r.total_params_trainable),
                static_cast<long long>(r.total_flops));
  out += buf;
  return out;
}

std::string report_as_csv(const CostReport& r) {
  std::string out = "layer,out_shape,params_all,params_trainable,flops\n";
  for (const CostRow& row : r.rows)
    out += row.name + "," + row.out_shape + "," + std::to_string(row.params_all) + "," +
           std::to_string(row.params_trainable) + "," + std::to_string(row.flops) + "\n";
  out += "TOTAL,," + std::to_string(r.total_params_all) + "," +
         std::to_string(r.total_params_trainable) + "," + std::to_string(r.total_flops) +
         "\n";
  return out;
}

std::vector<int64_t> receptive_field(
    const std::vector<std::pair<int64_t, int64_t>>& layers) {
  std::vector<int64_t> out;
  out.reserve(layers.size());
  int64_t r = 1, jump = 1;
  for (const auto& [k, s] : layers) {
    r += (k - 1) * jump;
    jump *= s;
    out.push_back(r);
  }
  return out;
}

LatencyReport benchmark_latency(model::Model& m, const Tensor& input, int runs,
                                int warmup) {
  using clock = std::chrono::steady_clock;
  LatencyReport r;
  r.model = model::spec_name(m.spec());
  r.runs = runs;
  r.warmup = warmup;
  r.threads = 1;

  for (int i = 0; i < warmup; ++i) (void)m.forward(input);
  r.times_ms.reserve(size_t(runs));
  for (int i = 0; i < runs; ++i) {
    auto t0 = clock::now();
    Tensor logits = m.forward(input);
    auto t1 = clock::now();
    // keep the result alive so the pass cannot be elided
    volatile float sink = logits.data[0];
    (void)sink;
    r.times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  double sum = 0.0;
  for (double t : r.times_ms) sum += t;
  r.mean_ms = sum / double(runs);
  double sq = 0.0;
  for (double t : r.times_ms) sq += (t - r.mean_ms) * (t - r.mean_ms);
  r.stddev_ms = runs > 1 ? std::sqrt(sq / double(runs - 1)) : 0.0;
  return r;
}

std::string latency_as_json(const LatencyReport& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["runs"] = r.runs;
  j["warmup"] = r.warmup;
  j["times_ms"] = r.times_ms;
  j["mean_ms"] = r.mean_ms;
  j["stddev_ms"] = r.stddev_ms;
  j["threads"] = r.threads;
  return j.dump(2);
}

}  // namespace kws::profiler
