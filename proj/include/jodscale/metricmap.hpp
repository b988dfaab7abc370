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

// Objective-metric to JOD mapping and the validation statistics used to
// judge a quality scale or a metric against subjective data.

#ifndef JODSCALE_METRICMAP_HPP_
#define JODSCALE_METRICMAP_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "jodscale/error.hpp"
#include "jodscale/model.hpp"
#include "jodscale/rng.hpp"
#include "jodscale/stats.hpp"

namespace jodscale {

/// q(o) = a1 / (1 + exp(a2 (o - a3))) + a4 o + a5
struct LogisticParams {
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0;
};

namespace detail {
// 1 / (1 + exp(z)) without overflow.
inline double logistic_tail(double z) {
  if (z > 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}
}  // namespace detail

inline double eval_logistic(const LogisticParams& p, double o) {
  return p.a1 * detail::logistic_tail(p.a2 * (o - p.a3)) + p.a4 * o + p.a5;
}

struct LogisticFit {
  LogisticParams params;
  double rmse = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

struct LmResult {
  std::array<double, 5> p;
  double cost;
  bool converged;
  int iterations;
};

// Levenberg-Marquardt on standardized scores; parameter order a1..a5.
inline LmResult levenberg_marquardt(std::span<const double> x, std::span<const double> y,
                                    std::array<double, 5> p, int max_iter) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd J(n, 5);
  Eigen::VectorXd r(n);
  auto residuals = [&](const std::array<double, 5>& q, Eigen::VectorXd& out) {
    double cost = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = logistic_tail(q[1] * (x[i] - q[2]));
      out(i) = q[0] * s + q[3] * x[i] + q[4] - y[i];
      cost += out(i) * out(i);
    }
    return cost;
  };
  double cost = residuals(p, r);
  double lambda = 1e-3;
  double y_scale = 0;
  for (double v : y) y_scale = std::max(y_scale, std::abs(v));
  y_scale = std::max(y_scale, 1.0);
  Eigen::VectorXd r_try(n);
  int it = 0;
  bool converged = false;
  for (; it < max_iter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = logistic_tail(p[1] * (x[i] - p[2]));
      const double ds = -s * (1 - s);
      J(i, 0) = s;
      J(i, 1) = p[0] * ds * (x[i] - p[2]);
      J(i, 2) = -p[0] * ds * p[1];
      J(i, 3) = x[i];
      J(i, 4) = 1.0;
    }
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= 1e-14 * y_scale * static_cast<double>(n) ||
        cost <= 1e-28 * y_scale * y_scale * static_cast<double>(n)) {
      converged = true;
      break;
    }
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::MatrixXd D = A;
      for (int k = 0; k < 5; ++k) D(k, k) += lambda * std::max(A(k, k), 1e-12);
      const Eigen::VectorXd step = D.ldlt().solve(-g);
      std::array<double, 5> cand;
      for (int k = 0; k < 5; ++k) cand[k] = p[k] + step(k);
      const double c_try = residuals(cand, r_try);
      if (std::isfinite(c_try) && c_try < cost) {
        const double rel = (cost - c_try) / std::max(cost, 1e-300);
        double step_norm = 0, p_norm = 0;
        for (int k = 0; k < 5; ++k) {
          step_norm = std::max(step_norm, std::abs(step(k)));
          p_norm = std::max(p_norm, std::abs(p[k]));
        }
        p = cand;
        cost = c_try;
        r = r_try;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        if (rel < 1e-15 || step_norm <= 1e-14 * (p_norm + 1e-14)) converged = true;
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e16) break;
    }
    if (!improved) {
      // Stationary to working precision.
      converged = g.lpNorm<Eigen::Infinity>() <= 1e-6 * y_scale * static_cast<double>(n);
      break;
    }
    if (converged) break;
  }
  return {p, cost, converged, it};
}

}  // namespace detail

/// Nonlinear least-squares fit of the 5-parameter logistic. Tries several
/// starting points when the first does not converge or does worse than the
/// nested linear model.
inline LogisticFit fit_logistic(std::span<const double> scores, std::span<const double> jod) {
  if (scores.size() != jod.size()) throw std::invalid_argument("fit_logistic: length mismatch");
  if (scores.size() < 6) throw NumericalError("fit_logistic: need at least 6 points");
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!std::isfinite(scores[i]) || !std::isfinite(jod[i])) throw NumericalError("fit_logistic: non-finite input");
  const double mu = stats::mean(scores);
  const double sd = std::sqrt(stats::variance(scores));
  if (!(sd > 0)) throw NumericalError("fit_logistic: all scores are equal");
  std::vector<double> x(scores.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (scores[i] - mu) / sd;
  const std::vector<double> y(jod.begin(), jod.end());

  // Ordinary linear regression (x is standardized: mean 0, variance 1).
  double sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += x[i] * y[i];
  const double slope = sxy / static_cast<double>(x.size());
  const double intercept = stats::mean(y);
  std::vector<double> resid(x.size());
  double trend = 0;
  for (std::size_t i = 0; i < x.size(); ++i) resid[i] = y[i] - (slope * x[i] + intercept);
  double lin_cost = 0;
  for (double v : resid) lin_cost += v * v;
  // Trend of the residual against x, measured on the upper vs lower half.
  {
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    const std::size_t half = order.size() / 2;
    for (std::size_t k = 0; k < order.size(); ++k) trend += (k < half ? -1.0 : 1.0) * resid[order[k]];
  }
  const auto [rmin, rmax] = std::minmax_element(resid.begin(), resid.end());
  const double a1 = *rmax - *rmin;
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  const double a2 = (trend > 0 ? -4.0 : 4.0) / (*xmax - *xmin);
  const double a3 = stats::median(x);

  const std::array<std::array<double, 5>, 3> starts{{
      {a1, a2, a3, slope, intercept - 0.5 * a1},
      {a1, -a2, a3, slope, intercept - 0.5 * a1},
      {0.0, a2, a3, slope, intercept},
  }};
  detail::LmResult best{};
  best.cost = std::numeric_limits<double>::infinity();
  int total_iter = 0;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const auto res = detail::levenberg_marquardt(x, y, starts[s], 500);
    total_iter += res.iterations;
    if (res.cost < best.cost || (res.cost == best.cost && res.converged && !best.converged)) best = res;
    if (best.converged && best.cost <= lin_cost) break;
  }

  LogisticFit fit;
  const auto& p = best.p;
  // Undo the standardization x = (o - mu) / sd.
  fit.params = {p[0], p[1] / sd, p[2] * sd + mu, p[3] / sd, p[4] - p[3] * mu / sd};
  fit.converged = best.converged;
  fit.iterations = total_iter;
  double ss = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double e = eval_logistic(fit.params, scores[i]) - jod[i];
    ss += e * e;
  }
  fit.rmse = std::sqrt(ss / static_cast<double>(scores.size()));
  if (!fit.converged) warn("fit_logistic: did not converge; returning best-effort parameters");
  return fit;
}

struct CorrelationMetrics {
  std::optional<double> srocc;  // empty when a vector has zero variance
  std::optional<double> plcc;
  double rmse = 0.0;
};

/// SROCC (average ranks for ties), PLCC and RMSE. Correlations are left
/// empty, with a warning, when either input is constant.
inline CorrelationMetrics correlation_metrics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("correlation_metrics: length mismatch");
  if (pred.size() < 2) throw std::invalid_argument("correlation_metrics: need at least two points");
  CorrelationMetrics m;
  m.rmse = stats::rmse(pred, truth);
  try {
    m.plcc = stats::pearson(pred, truth);
    m.srocc = stats::spearman(pred, truth);
  } catch (const NumericalError& e) {
    warn(std::string("correlation_metrics: ") + e.what());
  }
  return m;
}

/// SROCC between score differences s_i - s_j and empirical probabilities
/// p̂_ij over the given pairs.
inline double probability_consistency(std::span<const double> scores, const ComparisonGraph& graph,
                                      std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("probability_consistency: empty pair subset");
  if (pairs.size() < 2) throw NumericalError("probability_consistency: rank correlation needs at least two pairs");
  std::vector<double> diff, prob;
  for (const auto& [i, j] : pairs) {
    if (i >= scores.size() || j >= scores.size())
      throw std::invalid_argument("probability_consistency: pair index out of range");
    diff.push_back(scores[i] - scores[j]);
    prob.push_back(empirical_probability(graph, i, j));
  }
  return stats::spearman(diff, prob);
}

struct PairwiseAccuracy {
  double accuracy = 0.0;
  std::size_t considered = 0;
};

/// Fraction of measured pairs whose majority preference (ties excluded)
/// agrees in sign with the score difference, among pairs whose score gap is
/// at least `threshold_jod`. A zero score difference counts as incorrect.
inline PairwiseAccuracy pairwise_accuracy(std::span<const double> scores, const ComparisonGraph& graph,
                                          double threshold_jod) {
  if (!(threshold_jod >= 0)) throw std::invalid_argument("pairwise_accuracy: threshold must be >= 0");
  if (scores.size() != graph.size()) throw std::invalid_argument("pairwise_accuracy: score size mismatch");
  std::size_t considered = 0, correct = 0;
  for (const auto& p : graph.pairs()) {
    if (p.c_ij == p.c_ji) continue;
    const double gap = scores[p.i] - scores[p.j];
    if (!(std::abs(gap) >= threshold_jod)) continue;
    ++considered;
    const int truth = p.c_ij > p.c_ji ? 1 : -1;
    const int pred = gap > 0 ? 1 : -1;
    if (gap != 0 && truth == pred) ++correct;
  }
  if (considered == 0)
    throw NumericalError(fmt::format(
        "pairwise_accuracy: no pair has a score gap >= {} (threshold too high)", threshold_jod));
  return {static_cast<double>(correct) / static_cast<double>(considered), considered};
}

/// Seeded partition into k folds whose sizes differ by at most one (earlier
/// folds are the larger ones). Items keep their input order inside a fold.
template <class T>
std::vector<std::vector<T>> kfold_split(const std::vector<T>& items, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  if (items.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument(fmt::format("kfold_split: {} items cannot fill {} folds", items.size(), k));
  std::vector<std::size_t> perm(items.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(seed, {0x6b666f6c64ULL, static_cast<std::uint64_t>(k)});
  rng.shuffle(perm);
  std::vector<std::vector<std::size_t>> idx(static_cast<std::size_t>(k));
  for (std::size_t pos = 0; pos < perm.size(); ++pos) idx[pos % idx.size()].push_back(perm[pos]);
  std::vector<std::vector<T>> folds(idx.size());
  for (std::size_t f = 0; f < idx.size(); ++f) {
    std::sort(idx[f].begin(), idx[f].end());
    for (std::size_t i : idx[f]) folds[f].push_back(items[i]);
  }
  return folds;
}

}  // namespace jodscale

#endif  // JODSCALE_METRICMAP_HPP_
