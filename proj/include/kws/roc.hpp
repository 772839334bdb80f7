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
#include <vector>

namespace kws::roc {

// Axes follow the keyword-spotting convention: x = false alarm rate,
// y = false reject rate, so the lower-left corner is perfect and smaller
// AUC is better.
struct RocPoint {
  double far = 0.0;
  double frr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // threshold descending = FAR ascending
  double auc = 0.0;
};

// Threshold sweep over pooled binary decisions score >= theta, theta running
// over all distinct scores plus {0, 1} in descending order. Ties share one
// curve point. Invariant under strictly monotone score transforms.
RocCurve roc_from_binary(const std::vector<float>& scores,
                         const std::vector<uint8_t>& positive);

// Micro-averaged one-vs-rest sweep over all (sample, class) pairs; scores is
// row-major n x n_classes with rows summing to 1 (+-1e-6). exclude_class
// entries are dropped from the pool before sweeping.
RocCurve roc_micro(const std::vector<float>& scores, int n_classes,
                   const std::vector<int>& labels,
                   const std::vector<int>& exclude_classes = {});

// Trapezoidal integral of FRR over FAR in [0, 1]; the curve is extended to
// the borders horizontally.
double auc(const RocCurve& curve);

std::vector<double> uniform_grid(int points = 101);

// Linear interpolation of each curve's FRR on the grid, averaged pointwise;
// extrapolation clamps to the nearest endpoint.
RocCurve vertical_average(const std::vector<RocCurve>& curves,
                          const std::vector<double>& grid);

std::string curve_as_csv(const RocCurve& curve);

}  // namespace kws::roc
