// Copyright 2026 The jodscale Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment design: choosing which pairs to compare next.

#ifndef JODSCALE_DESIGN_HPP_
#define JODSCALE_DESIGN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "jodscale/error.hpp"
#include "jodscale/model.hpp"
#include "jodscale/rng.hpp"
#include "jodscale/scaling.hpp"

namespace jodscale {

using ConditionPair = std::pair<std::size_t, std::size_t>;

struct PairBatch {
  std::vector<ConditionPair> pairs;
  /// Score gap (cross-dataset) or objective value (gMAD) at selection time.
  std::vector<double> rationale;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

struct CrossDatasetOptions {
  std::size_t k = 10;
  double window = 1.0;  // JOD
  int bins = 5;
  std::uint64_t seed = 0;
  /// Unordered pairs (i < j) that must not be selected again.
  std::set<ConditionPair> exclude;
};

/// Pairs of conditions from different datasets whose scores differ by at
/// most `window`, spread round-robin over `bins` equal-width bins of the
/// pair midpoint. Within a bin, candidates are visited in a seeded random
/// order with ties broken by condition id.
inline PairBatch select_cross_dataset_pairs(std::span<const double> q, const std::vector<ConditionId>& conditions,
                                            const CrossDatasetOptions& opt) {
  if (q.size() != conditions.size())
    throw std::invalid_argument("select_cross_dataset_pairs: scores and conditions differ in length");
  if (!(opt.window >= 0) || opt.bins < 1) throw std::invalid_argument("select_cross_dataset_pairs: bad window/bins");
  PairBatch out;
  if (opt.k == 0) return out;
  for (double v : q)
    if (!std::isfinite(v)) throw NumericalError("select_cross_dataset_pairs: non-finite score");
  {
    std::set<std::string> names;
    for (const auto& c : conditions) names.insert(c.dataset);
    if (names.size() < 2) throw IntegrityError("select_cross_dataset_pairs: scale spans fewer than 2 datasets");
  }
  const auto [lo_it, hi_it] = std::minmax_element(q.begin(), q.end());
  const double lo = *lo_it, width = (*hi_it - lo) / opt.bins;

  struct Candidate {
    std::uint64_t key;
    ConditionPair ids;  // ordered so conditions[first] < conditions[second]
    double gap;
  };
  std::vector<std::vector<Candidate>> bins(static_cast<std::size_t>(opt.bins));
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = i + 1; j < q.size(); ++j) {
      if (conditions[i].dataset == conditions[j].dataset) continue;
      const double gap = std::abs(q[i] - q[j]);
      if (gap > opt.window) continue;
      if (opt.exclude.contains({i, j})) continue;
      const double mid = 0.5 * (q[i] + q[j]);
      int b = width > 0 ? static_cast<int>(std::floor((mid - lo) / width)) : 0;
      b = std::clamp(b, 0, opt.bins - 1);
      const auto ids = conditions[i] < conditions[j] ? ConditionPair{i, j} : ConditionPair{j, i};
      bins[static_cast<std::size_t>(b)].push_back({stream_key(opt.seed, {i, j}), ids, gap});
    }
  }
  std::size_t total = 0;
  for (auto& bin : bins) {
    std::sort(bin.begin(), bin.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.key != b.key) return a.key < b.key;
      return std::tie(conditions[a.ids.first], conditions[a.ids.second]) <
             std::tie(conditions[b.ids.first], conditions[b.ids.second]);
    });
    total += bin.size();
  }
  if (total == 0)
    throw IntegrityError(fmt::format(
        "select_cross_dataset_pairs: no cross-dataset pair within {} JOD (score range [{}, {}])", opt.window, lo,
        *hi_it));
  if (total < opt.k)
    warn(fmt::format("select_cross_dataset_pairs: only {} feasible pairs for k = {}", total, opt.k));

  std::vector<std::size_t> cursor(bins.size(), 0);
  while (out.size() < std::min(opt.k, total)) {
    for (std::size_t b = 0; b < bins.size() && out.size() < opt.k; ++b) {
      if (cursor[b] >= bins[b].size()) continue;
      const auto& cand = bins[b][cursor[b]++];
      out.pairs.push_back(cand.ids);
      out.rationale.push_back(cand.gap);
    }
  }
  return out;
}

/// Observed counts for each pair of a batch, (c_ij, c_ji) in batch order.
using BatchCounts = std::vector<std::pair<std::uint64_t, std::uint64_t>>;
using MeasureCallback = std::function<BatchCounts(const PairBatch&, int batch_index)>;

struct IterateOptions {
  int batches = 3;
  std::size_t batch_size = 50;
  double window = 1.0;
  int bins = 5;
  std::uint64_t seed = 0;
  ScaleOptions scale;
};

struct IterationResult {
  UnifiedScale scale;
  DatasetCollection collection;  // input plus every merged batch
  std::vector<PairBatch> trail;
  bool completed = false;
  std::string error;  // set when a batch failed; earlier batches are kept
};

/// Repeats (scale, select a batch, measure it, merge) `batches` times and
/// rescales at the end. Intermediate scales tolerate a disconnected design
/// by scaling components separately. A failing callback stops the loop and
/// the partial result is returned with `error` set.
inline IterationResult iterate_selection(const DatasetCollection& initial, const MeasureCallback& measure,
                                         const IterateOptions& opt) {
  if (opt.batches < 0) throw std::invalid_argument("iterate_selection: batches must be >= 0");
  IterationResult out;
  out.collection = initial;
  auto& c = out.collection;
  std::set<ConditionPair> seen;
  for (const auto& p : c.graph.pairs()) seen.insert({p.i, p.j});

  auto interim = opt.scale;
  interim.per_component = true;
  for (int b = 0; b < opt.batches; ++b) {
    if (opt.batch_size == 0) continue;
    try {
      const auto s = scale(c, interim);
      CrossDatasetOptions sel{opt.batch_size, opt.window, opt.bins, stream_key(opt.seed, {std::uint64_t(b)}), seen};
      auto batch = select_cross_dataset_pairs(s.q, c.conditions, sel);
      const auto counts = measure(batch, b);
      if (counts.size() != batch.size())
        throw IntegrityError(fmt::format("iterate_selection: callback returned {} counts for {} pairs",
                                         counts.size(), batch.size()));
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto [i, j] = batch.pairs[k];
        c.graph.add(i, j, counts[k].first);
        c.graph.add(j, i, counts[k].second);
        seen.insert(std::minmax(i, j));
      }
      out.trail.push_back(std::move(batch));
    } catch (const std::exception& e) {
      out.error = fmt::format("batch {}: {}", b, e.what());
      warn("iterate_selection: " + out.error);
      out.scale = scale(c, interim);
      return out;
    }
  }
  out.scale = scale(c, opt.scale);
  out.completed = true;
  return out;
}

struct GmadOptions {
  std::size_t k = 100;
  double bench_window = 1.0;  // strict: |m_bench gap| < bench_window
  /// Allow a condition to appear in more than one selected pair.
  bool allow_reuse = false;
};

/// Pairs on which the test metric disagrees most with the benchmark metric:
/// maximize |dt| - |db| subject to |db| < bench_window, greedily, with each
/// condition used at most once unless allow_reuse. Ties are broken by
/// (i, j) ascending.
inline PairBatch select_gmad_pairs(std::span<const double> m_test, std::span<const double> m_bench,
                                   const GmadOptions& opt) {
  if (m_test.size() != m_bench.size())
    throw std::invalid_argument("select_gmad_pairs: score vectors differ in length");
  if (opt.k < 1) throw std::invalid_argument("select_gmad_pairs: k must be >= 1");
  struct Candidate {
    double objective;
    std::size_t i, j;
  };
  std::vector<Candidate> cand;
  const std::size_t n = m_test.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double db = std::abs(m_bench[i] - m_bench[j]);
      if (!(db < opt.bench_window)) continue;
      cand.push_back({std::abs(m_test[i] - m_test[j]) - db, i, j});
    }
  std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
    if (a.objective != b.objective) return a.objective > b.objective;
    return std::tie(a.i, a.j) < std::tie(b.i, b.j);
  });
  PairBatch out;
  std::vector<char> used(n, 0);
  for (const auto& c : cand) {
    if (out.size() == opt.k) break;
    if (!opt.allow_reuse && (used[c.i] || used[c.j])) continue;
    used[c.i] = used[c.j] = 1;
    out.pairs.push_back({c.i, c.j});
    out.rationale.push_back(c.objective);
  }
  if (out.size() < opt.k)
    warn(fmt::format("select_gmad_pairs: only {} feasible pairs for k = {}", out.size(), opt.k));
  return out;
}

/// Fraction of pairs that are truly different (|truth gap| >= threshold),
/// declared different by the test metric (|test gap| >= threshold), and
/// ordered the same way by both.
inline double gmad_precision(const PairBatch& batch, std::span<const double> truth, std::span<const double> m_test,
                             double threshold = 1.0) {
  if (batch.empty()) throw std::invalid_argument("gmad_precision: empty batch");
  if (truth.size() != m_test.size()) throw std::invalid_argument("gmad_precision: score vectors differ in length");
  std::size_t correct = 0;
  for (const auto& [i, j] : batch.pairs) {
    const double dt = truth[i] - truth[j];
    const double dm = m_test[i] - m_test[j];
    if (std::abs(dt) >= threshold && std::abs(dm) >= threshold && (dt > 0) == (dm > 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

}  // namespace jodscale

#endif  // JODSCALE_DESIGN_HPP_
