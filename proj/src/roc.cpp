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

#include "kws/roc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "kws/error.hpp"

namespace kws::roc {

RocCurve roc_from_binary(const std::vector<float>& scores,
                         const std::vector<uint8_t>& positive) {
  if (scores.size() != positive.size())
    throw Error("roc: scores and labels must have the same length");
  int64_t total_pos = 0;
  for (uint8_t p : positive) total_pos += p != 0;
  int64_t total_neg = int64_t(positive.size()) - total_pos;
  if (total_pos == 0) throw Error("roc: no positive decisions in the pool");
  if (total_neg == 0) throw Error("roc: no negative decisions in the pool");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  // Candidate thresholds: distinct scores plus {0, 1}, descending. All
  // decisions sharing one threshold flip atomically.
  std::vector<float> thresholds;
  thresholds.push_back(1.0f);
  thresholds.push_back(0.0f);
  for (size_t i = 0; i < order.size(); ++i)
    if (i == 0 || scores[order[i]] != scores[order[i - 1]])
      thresholds.push_back(scores[order[i]]);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<float>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocCurve curve;
  curve.points.reserve(thresholds.size() + 1);
  curve.points.push_back({0.0, 1.0});  // theta above every score: accept nothing
  size_t idx = 0;
  int64_t tp = 0, fp = 0;
  for (float theta : thresholds) {
    while (idx < order.size() && scores[order[idx]] >= theta) {
      if (positive[order[idx]] != 0)
        tp++;
      else
        fp++;
      idx++;
    }
    double far = double(fp) / double(total_neg);
    double frr = double(total_pos - tp) / double(total_pos);
    if (curve.points.back().far != far || curve.points.back().frr != frr)
      curve.points.push_back({far, frr});
  }
  curve.auc = auc(curve);
  return curve;
}

RocCurve roc_micro(const std::vector<float>& scores, int n_classes,
                   const std::vector<int>& labels,
                   const std::vector<int>& exclude_classes) {
  if (n_classes < 2) throw Error("roc_micro: need at least two classes");
  if (scores.size() != labels.size() * size_t(n_classes))
    throw Error("roc_micro: scores matrix does not match label count");
  for (size_t i = 0; i < labels.size(); ++i) {
    double sum = 0.0;
    for (int c = 0; c < n_classes; ++c) sum += scores[i * size_t(n_classes) + size_t(c)];
    if (std::abs(sum - 1.0) > 1e-6)
      throw Error("roc_micro: score row " + std::to_string(i) + " does not sum to 1");
  }
  std::vector<uint8_t> excluded(size_t(n_classes), 0);
  for (int c : exclude_classes) {
    if (c < 0 || c >= n_classes) throw Error("roc_micro: bad excluded class id");
    excluded[size_t(c)] = 1;
  }

  std::vector<float> pool;
  std::vector<uint8_t> positive;
  pool.reserve(scores.size());
  positive.reserve(scores.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    for (int c = 0; c < n_classes; ++c) {
      if (excluded[size_t(c)]) continue;
      pool.push_back(scores[i * size_t(n_classes) + size_t(c)]);
      positive.push_back(labels[i] == c ? 1 : 0);
    }
  }
  return roc_from_binary(pool, positive);
}

double auc(const RocCurve& curve) {
  if (curve.points.size() < 2) throw Error("auc: need at least two curve points");
  std::vector<RocPoint> pts = curve.points;
  std::sort(pts.begin(), pts.end(),
            [](const RocPoint& a, const RocPoint& b) { return a.far < b.far; });
  double area = 0.0;
  // horizontal extension to the borders
  if (pts.front().far > 0.0) area += pts.front().far * pts.front().frr;
  if (pts.back().far < 1.0) area += (1.0 - pts.back().far) * pts.back().frr;
  for (size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].far - pts[i - 1].far) * 0.5 * (pts[i].frr + pts[i - 1].frr);
  return area;
}

std::vector<double> uniform_grid(int points) {
  std::vector<double> grid(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) grid[size_t(i)] = double(i) / double(points - 1);
  return grid;
}

namespace {

double interpolate_frr(const std::vector<RocPoint>& pts, double far) {
  if (far <= pts.front().far) return pts.front().frr;
  if (far >= pts.back().far) return pts.back().frr;
  size_t hi = 1;
  while (pts[hi].far < far) hi++;
  const RocPoint& a = pts[hi - 1];
  const RocPoint& b = pts[hi];
  if (b.far == a.far) return std::min(a.frr, b.frr);
  double t = (far - a.far) / (b.far - a.far);
  return a.frr + t * (b.frr - a.frr);
}

}  // namespace

RocCurve vertical_average(const std::vector<RocCurve>& curves,
                          const std::vector<double>& grid) {
  if (curves.empty()) throw Error("vertical_average: no curves");
  if (grid.size() < 2) throw Error("vertical_average: grid too small");

  RocCurve out;
  out.points.reserve(grid.size());
  for (double far : grid) out.points.push_back({far, 0.0});
  for (const RocCurve& curve : curves) {
    if (curve.points.empty()) throw Error("vertical_average: empty curve");
    // Collapse duplicate FARs to their best (lowest) FRR so the curve is a
    // function of FAR.
    std::vector<RocPoint> pts = curve.points;
    std::sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
      return a.far < b.far || (a.far == b.far && a.frr < b.frr);
    });
    std::vector<RocPoint> dedup;
    for (const RocPoint& p : pts)
      if (dedup.empty() || dedup.back().far != p.far) dedup.push_back(p);
    for (size_t i = 0; i < grid.size(); ++i)
      out.points[i].frr += interpolate_frr(dedup, grid[i]);
  }
  for (RocPoint& p : out.points) p.frr /= double(curves.size());
  out.auc = auc(out);
  return out;
}

std::string curve_as_csv(const RocCurve& curve) {
  std::string out = "far,frr\n";
  char buf[80];
  for (const RocPoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", p.far, p.frr);
    out += buf;
  }
  return out;
}

}  // namespace kws::roc
