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
#include <string>
#include <utility>
#include <vector>

#include "kws/model.hpp"

namespace kws::profiler {

// FLOP convention: 2 * MACs for convolutions (over all SAME-padded output
// positions) and fully-connected layers; BN, ReLU, pooling and softmax count
// as zero. This reproduces the published totals for the temporal models.
struct CostRow {
  std::string name;
  std::string out_shape;
  int64_t params_all = 0;
  int64_t params_trainable = 0;
  int64_t flops = 0;
};

struct CostReport {
  std::vector<CostRow> rows;
  int64_t total_params_all = 0;
  int64_t total_params_trainable = 0;
  int64_t total_flops = 0;
};

CostReport cost_report(const model::ModelSpec& spec);
int64_t count_params(const model::ModelSpec& spec);
int64_t count_flops(const model::ModelSpec& spec);

std::string report_as_table(const CostReport& r);
std::string report_as_csv(const CostReport& r);

// r <- r + (k - 1) * jump, jump <- jump * s over (kernel, stride) layers;
// returns the receptive field after each layer, starting from a single cell.
std::vector<int64_t> receptive_field(const std::vector<std::pair<int64_t, int64_t>>& layers);

struct LatencyReport {
  std::string model;
  int runs = 50;
  int warmup = 5;
  int threads = 1;
  std::vector<double> times_ms;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
};

// Times forward() from MFCC-shaped input to logits on the calling thread;
// warmup runs are excluded from the statistics.
LatencyReport benchmark_latency(model::Model& m, const Tensor& input, int runs = 50,
                                int warmup = 5);

std::string latency_as_json(const LatencyReport& r);

}  // namespace kws::profiler
