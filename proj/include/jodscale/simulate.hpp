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

// Synthetic observers drawing pairwise comparisons and ratings from known
// ground-truth scores, plus an end-to-end recovery harness.
//
// Every draw comes from its own random stream keyed by (seed, pair or
// record coordinates), so results do not depend on generation order.

#ifndef JODSCALE_SIMULATE_HPP_
#define JODSCALE_SIMULATE_HPP_

#include <chrono>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "jodscale/model.hpp"
#include "jodscale/rng.hpp"
#include "jodscale/scaling.hpp"
#include "jodscale/stats.hpp"

namespace jodscale {

struct GroundTruth {
  std::vector<double> q_true;
  std::map<std::string, LinkParams> links_true;
  ObserverModel model;
  std::uint64_t seed = 0;
};

namespace detail {
inline constexpr std::uint64_t kComparisonStream = 0x636f6d70ULL;
inline constexpr std::uint64_t kRatingStream = 0x72617465ULL;

inline std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace detail

/// Draws n_trials forced choices between i and j. Returns (c_ij, c_ji).
/// `round` selects an independent repetition of the same pair.
inline std::pair<std::uint64_t, std::uint64_t> simulate_comparison(const GroundTruth& truth, std::size_t i,
                                                                   std::size_t j, std::uint64_t n_trials,
                                                                   std::uint64_t round = 0) {
  if (i >= truth.q_true.size() || j >= truth.q_true.size() || i == j)
    throw std::invalid_argument("simulate_comparison: bad condition indices");
  const double p = preference_probability(truth.q_true[i], truth.q_true[j], truth.model);
  Rng rng(truth.seed, {detail::kComparisonStream, i, j, round});
  const auto cij = rng.binomial(n_trials, p);
  return {cij, n_trials - cij};
}

/// Ratings of every condition of `dataset` by n_observers simulated raters:
/// m_ik = (q_i - b) / a + c * sigma * z_ik with z_ik standard normal, i.e.
/// a*m_ik + b ~ N(q_i, a*c*sigma), the rating model used by the scaler.
inline RatingTable simulate_ratings(const GroundTruth& truth, const DatasetCollection& c,
                                    const std::string& dataset, int n_observers) {
  const auto it = truth.links_true.find(dataset);
  if (it == truth.links_true.end())
    throw std::invalid_argument("simulate_ratings: no true link parameters for '" + dataset + "'");
  const LinkParams& link = it->second;
  link.check();
  if (n_observers < 0) throw std::invalid_argument("simulate_ratings: n_observers must be >= 0");
  RatingTable table;
  const auto ds = detail::name_hash(dataset);
  for (std::size_t i : c.conditions_of(dataset)) {
    const double center = (truth.q_true.at(i) - link.b) / link.a;
    for (int k = 0; k < n_observers; ++k) {
      Rng rng(truth.seed, {detail::kRatingStream, ds, i, static_cast<std::uint64_t>(k)});
      table.add(i, fmt::format("obs{:03d}", k), center + link.c * truth.model.sigma * rng.normal());
    }
  }
  return table;
}

struct RecoveryConfig {
  int n_conditions = 50;
  int n_datasets = 2;
  /// Number of datasets (the last ones) measured by rating; -1 means all
  /// but the first.
  int rating_datasets = -1;
  std::uint64_t trials_per_pair = 30;
  int observers = 15;
  /// Extra random cross-dataset pairs on top of the spanning links.
  int graph_density = 10;
  /// Fraction of within-dataset pairs that are measured.
  double within_density = 1.0;
  std::uint64_t seed = 1;
  ScaleOptions scale;
};

struct SyntheticDesign {
  DatasetCollection collection;
  GroundTruth truth;
};

/// Builds a synthetic multi-dataset experiment: one reference per dataset
/// at q = 0, distorted conditions uniform in [-4, -0.1] JOD, within-dataset
/// comparisons for the pairwise datasets and ratings for the others. A
/// random spanning set of cross-dataset links connects the datasets, and
/// `graph_density` extra cross links are added on top.
inline SyntheticDesign make_synthetic_design(const RecoveryConfig& cfg) {
  if (cfg.n_datasets < 1 || cfg.n_conditions < 2 * cfg.n_datasets)
    throw std::invalid_argument("make_synthetic_design: need n_datasets >= 1 and >= 2 conditions per dataset");
  const int n_rating = cfg.rating_datasets < 0 ? cfg.n_datasets - 1 : cfg.rating_datasets;
  if (n_rating > cfg.n_datasets) throw std::invalid_argument("make_synthetic_design: too many rating datasets");
  SyntheticDesign d;
  d.truth.seed = cfg.seed;
  d.truth.model = cfg.scale.model;
  auto& c = d.collection;
  Rng rng(cfg.seed, {0x64657369676eULL});

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(cfg.n_datasets));
  for (int k = 0; k < cfg.n_datasets; ++k) {
    DatasetInfo info;
    info.name = fmt::format("D{}", k);
    info.experiment = k >= cfg.n_datasets - n_rating ? ExperimentType::kRating : ExperimentType::kPairwise;
    c.add_dataset(info);
  }
  for (int n = 0; n < cfg.n_conditions; ++n) {
    const int k = n % cfg.n_datasets;
    const auto& name = c.datasets[static_cast<std::size_t>(k)].name;
    const bool first = members[static_cast<std::size_t>(k)].empty();
    const auto idx = first ? c.add_condition(ConditionId::reference(name, "img"))
                           : c.add_condition(ConditionId::make(name, "img", "dist",
                                                               static_cast<int>(members[static_cast<std::size_t>(k)].size())));
    members[static_cast<std::size_t>(k)].push_back(idx);
    d.truth.q_true.push_back(first ? 0.0 : -rng.uniform(0.1, 4.0));
  }
  for (const auto& info : c.datasets) {
    if (info.experiment != ExperimentType::kRating) continue;
    d.truth.links_true[info.name] = {rng.uniform(0.6, 1.5), rng.uniform(-1.0, 1.0), rng.uniform(0.7, 1.3)};
  }

  std::set<std::pair<std::size_t, std::size_t>> measured;
  auto measure = [&](std::size_t i, std::size_t j) {
    const auto key = std::minmax(i, j);
    if (!measured.insert({key.first, key.second}).second) return;
    const auto [cij, cji] = simulate_comparison(d.truth, key.first, key.second, cfg.trials_per_pair);
    c.graph.add(key.first, key.second, cij);
    c.graph.add(key.second, key.first, cji);
  };
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (c.datasets[k].experiment == ExperimentType::kRating) continue;
    const auto& m = members[k];
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t b = a + 1; b < m.size(); ++b)
        if (cfg.within_density >= 1.0 || rng.uniform() < cfg.within_density) measure(m[a], m[b]);
  }

  // Cross-dataset links: prefer pairs of similar true quality.
  auto cross_pair = [&](std::size_t da, std::size_t db) {
    const auto& A = members[da];
    const auto& B = members[db];
    for (int attempt = 0; attempt < 64; ++attempt) {
      const auto i = A[rng.below(A.size())], j = B[rng.below(B.size())];
      if (std::abs(d.truth.q_true[i] - d.truth.q_true[j]) <= 1.0 || attempt == 63) {
        measure(i, j);
        return;
      }
    }
  };
  for (std::size_t k = 1; k < members.size(); ++k) cross_pair(k, rng.below(k));
  if (members.size() > 1) {
    for (int e = 0; e < cfg.graph_density; ++e) {
      const auto da = rng.below(members.size());
      auto db = rng.below(members.size() - 1);
      if (db >= da) ++db;
      cross_pair(da, db);
    }
  }
  for (const auto& info : c.datasets) {
    if (info.experiment != ExperimentType::kRating || cfg.observers <= 0) continue;
    c.ratings[info.name] = simulate_ratings(d.truth, c, info.name, cfg.observers);
  }
  return d;
}

struct LinkError {
  double a_rel = 0.0;
  double b_abs = 0.0;
  double c_rel = 0.0;
};

struct RecoveryReport {
  double srocc = 0.0;
  double rmse = 0.0;
  std::map<std::string, LinkError> link_errors;
  bool converged = false;
  int iterations = 0;
  double runtime_ms = 0.0;
};

/// Compares a fitted scale with the ground truth it was simulated from.
inline RecoveryReport evaluate_recovery(const SyntheticDesign& d, const UnifiedScale& s) {
  RecoveryReport r;
  r.srocc = stats::spearman(s.q, d.truth.q_true);
  r.rmse = stats::rmse(s.q, d.truth.q_true);
  for (const auto& [name, truth] : d.truth.links_true) {
    const auto it = s.links.find(name);
    if (it == s.links.end()) continue;
    r.link_errors[name] = {std::abs(it->second.a - truth.a) / truth.a, std::abs(it->second.b - truth.b),
                           std::abs(it->second.c - truth.c) / truth.c};
  }
  r.converged = s.converged;
  r.iterations = s.iterations;
  return r;
}

/// Simulates a design, scales it, and reports recovery quality.
inline RecoveryReport recovery_experiment(const RecoveryConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto design = make_synthetic_design(cfg);
  const auto s = scale(design.collection, cfg.scale);
  auto report = evaluate_recovery(design, s);
  report.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace jodscale

#endif  // JODSCALE_SIMULATE_HPP_
