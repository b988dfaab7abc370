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

// Joint maximum-likelihood scaling of pairwise comparisons and ratings onto
// one JOD scale.
//
// Observer model (Thurstone Case V): perceived quality of condition i is
// N(q_i, sigma). A pairwise trial prefers i over j with probability
// Phi((q_i - q_j) / (sqrt(2) sigma)); counts are binomial. A rating m_ik of
// dataset d is linked to the scale by a_d * m_ik + b_d ~ N(q_i, a_d c_d sigma).
// Scores of reference conditions are fixed at zero.

#ifndef JODSCALE_SCALING_HPP_
#define JODSCALE_SCALING_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "jodscale/error.hpp"
#include "jodscale/model.hpp"
#include "jodscale/optimize.hpp"
#include "jodscale/rng.hpp"
#include "jodscale/stats.hpp"

namespace jodscale {

/// Case V observer. sigma = 1.048 makes a one-unit score difference
/// correspond to 75% preference, which defines the JOD unit.
struct ObserverModel {
  double sigma = 1.048;

  void check() const {
    if (!(sigma > 0) || !std::isfinite(sigma))
      throw std::invalid_argument("ObserverModel: sigma must be positive and finite");
  }
};

/// Per-dataset linear link between rating units and JOD: JOD = a*m + b, with
/// rating noise multiplier c.
struct LinkParams {
  double a = 1.0;
  double b = 0.0;
  double c = 1.0;

  void check() const {
    if (!(a > 0) || !(c > 0) || !std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c))
      throw std::invalid_argument("LinkParams: require a > 0, c > 0, all finite");
  }
};

struct UnifiedScale {
  std::vector<double> q;
  std::map<std::string, LinkParams> links;
  double log_posterior = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  std::size_t components = 1;
};

struct ScaleOptions {
  bool prior_enabled = true;
  double tol = 1e-6;
  int max_iter = 2000;
  /// Scale each connected component separately instead of failing on a
  /// disconnected design. Scores in different components are not comparable.
  bool per_component = false;
  ObserverModel model;
};

inline double preference_probability(double q_i, double q_j, const ObserverModel& model = {}) {
  return stats::normal_cdf((q_i - q_j) / (std::numbers::sqrt2 * model.sigma));
}

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericalError(fmt::format("{}: non-finite value", what));
}

inline double log_binomial_coefficient(std::uint64_t n, std::uint64_t k) {
  return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)

// Log-likelihood of one measured pair without the binomial coefficient;
// adds d/dq_i to *gi and d/dq_j to *gj when non-null.
inline double pair_loglik(double qi, double qj, std::uint64_t cij, std::uint64_t cji,
                          double sigma, double* gi, double* gj) {
  const double scale = 1.0 / (std::numbers::sqrt2 * sigma);
  const double x = (qi - qj) * scale;
  double ll = 0, dx = 0;
  if (cij) {
    ll += static_cast<double>(cij) * stats::log_normal_cdf(x);
    dx += static_cast<double>(cij) * stats::d_log_normal_cdf(x);
  }
  if (cji) {
    ll += static_cast<double>(cji) * stats::log_normal_cdf(-x);
    dx -= static_cast<double>(cji) * stats::d_log_normal_cdf(-x);
  }
  if (gi) *gi += dx * scale;
  if (gj) *gj -= dx * scale;
  return ll;
}

struct RatingGrad {
  double q = 0, a = 0, b = 0, c = 0;
};

// Log-density of one rating; gradient w.r.t. q_i and the natural link
// parameters accumulated into *g when non-null. Without `observed` this is
// the density of the transformed rating a*m + b; with it, the density of m
// itself, which adds the Jacobian log(a).
inline double rating_logpdf(double m, double q, const LinkParams& link, double sigma, RatingGrad* g,
                            bool observed = false) {
  const double s = link.a * link.c * sigma;
  const double r = link.a * m + link.b - q;
  const double u = r / s;
  if (g) {
    g->q = u / s;
    g->b = -u / s;
    g->a = ((observed ? 0.0 : -1.0) - u * (q - link.b) / s) / link.a;
    g->c = (-1.0 + u * u) / link.c;
  }
  return -std::log(s) - kHalfLog2Pi - 0.5 * u * u + (observed ? std::log(link.a) : 0.0);
}

}  // namespace detail

/// Sum of binomial log-likelihoods over measured pairs, including the
/// binomial coefficients.
inline double pwc_log_likelihood(const ComparisonGraph& graph, std::span<const double> q,
                                 const ObserverModel& model = {}) {
  model.check();
  if (q.size() != graph.size()) throw std::invalid_argument("pwc_log_likelihood: q size mismatch");
  detail::require_finite(q, "pwc_log_likelihood");
  double ll = 0;
  for (const auto& p : graph.pairs())
    ll += detail::log_binomial_coefficient(p.total(), p.c_ij) +
          detail::pair_loglik(q[p.i], q[p.j], p.c_ij, p.c_ji, model.sigma, nullptr, nullptr);
  return ll;
}

/// Sum over the records of one dataset of the Gaussian log-density of the
/// transformed rating a*m + b ~ N(q, a*c*sigma).
inline double rating_log_likelihood(const RatingTable& ratings, std::span<const double> q,
                                    const LinkParams& link, const ObserverModel& model = {}) {
  model.check();
  link.check();
  detail::require_finite(q, "rating_log_likelihood");
  double ll = 0;
  for (const auto& r : ratings.records()) {
    if (r.condition >= q.size()) throw std::invalid_argument("rating_log_likelihood: condition out of range");
    ll += detail::rating_logpdf(r.score, q[r.condition], link, model.sigma, nullptr);
  }
  return ll;
}

/// Gaussian prior: every q_i ~ N(mean(q), sigma).
inline double log_prior(std::span<const double> q, const ObserverModel& model = {}) {
  if (q.empty()) return 0.0;
  const double m = stats::mean(q);
  double lp = 0;
  for (double v : q) {
    const double z = (v - m) / model.sigma;
    lp += -std::log(model.sigma) - detail::kHalfLog2Pi - 0.5 * z * z;
  }
  return lp;
}

/// Objective maximized by scale(). Ratings enter through the density of the
/// observed m, i.e. rating_log_likelihood plus log(a) per record; without
/// that Jacobian the objective grows without bound as a -> 0.
inline double log_posterior(const DatasetCollection& c, std::span<const double> q,
                            const std::map<std::string, LinkParams>& links,
                            const ObserverModel& model, bool prior_enabled) {
  double lp = pwc_log_likelihood(c.graph, q, model);
  for (const auto& [name, table] : c.ratings) {
    if (table.empty()) continue;
    const auto it = links.find(name);
    if (it == links.end()) throw std::invalid_argument("log_posterior: no link parameters for '" + name + "'");
    lp += rating_log_likelihood(table, q, it->second, model) +
          static_cast<double>(table.size()) * std::log(it->second.a);
  }
  if (prior_enabled) lp += log_prior(q, model);
  return lp;
}

struct LinkGradient {
  double a = 0, b = 0, c = 0;
};

struct PosteriorGradient {
  std::vector<double> q;
  std::map<std::string, LinkGradient> links;
};

/// Analytic gradient of log_posterior with respect to every q_i and the
/// natural link parameters (a, b, c) of every rated dataset.
inline PosteriorGradient log_posterior_gradient(const DatasetCollection& c, std::span<const double> q,
                                                const std::map<std::string, LinkParams>& links,
                                                const ObserverModel& model, bool prior_enabled) {
  model.check();
  detail::require_finite(q, "log_posterior_gradient");
  PosteriorGradient g;
  g.q.assign(q.size(), 0.0);
  for (const auto& p : c.graph.pairs())
    detail::pair_loglik(q[p.i], q[p.j], p.c_ij, p.c_ji, model.sigma, &g.q[p.i], &g.q[p.j]);
  for (const auto& [name, table] : c.ratings) {
    if (table.empty()) continue;
    const auto& link = links.at(name);
    link.check();
    auto& gl = g.links[name];
    for (const auto& r : table.records()) {
      detail::RatingGrad rg;
      detail::rating_logpdf(r.score, q[r.condition], link, model.sigma, &rg, true);
      g.q[r.condition] += rg.q;
      gl.a += rg.a;
      gl.b += rg.b;
      gl.c += rg.c;
    }
  }
  if (prior_enabled && !q.empty()) {
    const double m = stats::mean(q);
    for (std::size_t i = 0; i < q.size(); ++i) g.q[i] -= (q[i] - m) / (model.sigma * model.sigma);
  }
  return g;
}

namespace detail {

// Negative log-posterior over the free parameters of one connected
// component: q of non-anchored members, then (log a, b, log c) per rated
// dataset.
class ComponentObjective {
 public:
  ComponentObjective(const DatasetCollection& c, std::span<const std::size_t> members,
                     std::span<const std::size_t> anchored, const ScaleOptions& opt)
      : sigma_(opt.model.sigma), prior_(opt.prior_enabled), members_(members.begin(), members.end()) {
    var_of_.assign(c.size(), -1);
    std::vector<bool> in_component(c.size(), false);
    for (std::size_t i : members) in_component[i] = true;
    std::vector<bool> is_anchor(c.size(), false);
    for (std::size_t i : anchored) is_anchor[i] = true;
    for (std::size_t i : members)
      if (!is_anchor[i]) var_of_[i] = static_cast<int>(n_q_++);
    for (const auto& p : c.graph.pairs())
      if (in_component[p.i]) pairs_.push_back(p);
    std::size_t offset = n_q_;
    for (const auto& [name, table] : c.ratings) {
      if (table.empty() || !in_component[table.records().front().condition]) continue;
      rated_.push_back({name, &table, offset});
      offset += 3;
    }
    n_vars_ = offset;
  }

  std::size_t n_vars() const { return n_vars_; }
  std::size_t n_q() const { return n_q_; }

  struct Rated {
    std::string name;
    const RatingTable* table;
    std::size_t offset;
  };
  const std::vector<Rated>& rated() const { return rated_; }

  double q_of(std::span<const double> x, std::size_t cond) const {
    return var_of_[cond] < 0 ? 0.0 : x[static_cast<std::size_t>(var_of_[cond])];
  }

  static LinkParams link_of(std::span<const double> x, std::size_t offset) {
    return {std::exp(x[offset]), x[offset + 1], std::exp(x[offset + 2])};
  }

  std::vector<double> initial(const DatasetCollection&) const {
    std::vector<double> x(n_vars_, 0.0);
    for (const auto& rs : rated_) {
      std::vector<double> scores;
      scores.reserve(rs.table->size());
      for (const auto& r : rs.table->records()) scores.push_back(r.score);
      const double sd = std::sqrt(stats::variance(scores));
      const double a = 1.0 / sd;
      x[rs.offset] = std::log(a);
      x[rs.offset + 1] = -a * stats::mean(scores);
      x[rs.offset + 2] = 0.0;
    }
    return x;
  }

  double operator()(std::span<const double> x, std::span<double> grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (double v : x)
      if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    double ll = 0;
    for (const auto& p : pairs_) {
      double gi = 0, gj = 0;
      ll += pair_loglik(q_of(x, p.i), q_of(x, p.j), p.c_ij, p.c_ji, sigma_, &gi, &gj);
      if (var_of_[p.i] >= 0) grad[static_cast<std::size_t>(var_of_[p.i])] -= gi;
      if (var_of_[p.j] >= 0) grad[static_cast<std::size_t>(var_of_[p.j])] -= gj;
    }
    for (const auto& rs : rated_) {
      const LinkParams link = link_of(x, rs.offset);
      double ga = 0, gb = 0, gc = 0;
      for (const auto& r : rs.table->records()) {
        RatingGrad rg;
        ll += rating_logpdf(r.score, q_of(x, r.condition), link, sigma_, &rg, true);
        if (var_of_[r.condition] >= 0) grad[static_cast<std::size_t>(var_of_[r.condition])] -= rg.q;
        ga += rg.a;
        gb += rg.b;
        gc += rg.c;
      }
      grad[rs.offset] -= ga * link.a;  // chain rule through a = exp(alpha)
      grad[rs.offset + 1] -= gb;
      grad[rs.offset + 2] -= gc * link.c;
    }
    if (prior_) {
      double m = 0;
      for (std::size_t i : members_) m += q_of(x, i);
      m /= static_cast<double>(members_.size());
      const double inv_var = 1.0 / (sigma_ * sigma_);
      for (std::size_t i : members_) {
        const double d = q_of(x, i) - m;
        ll += -std::log(sigma_) - kHalfLog2Pi - 0.5 * d * d * inv_var;
        if (var_of_[i] >= 0) grad[static_cast<std::size_t>(var_of_[i])] += d * inv_var;
      }
    }
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  }

 private:
  double sigma_;
  bool prior_;
  std::vector<std::size_t> members_;
  std::vector<int> var_of_;
  std::vector<PairCounts> pairs_;
  std::vector<Rated> rated_;
  std::size_t n_q_ = 0;
  std::size_t n_vars_ = 0;
};

inline void check_rated_datasets(const DatasetCollection& c) {
  for (const auto& [name, table] : c.ratings) {
    if (table.empty()) continue;
    const auto first = table.records().front().score;
    bool varies = false;
    for (const auto& r : table.records()) varies |= r.score != first;
    if (!varies) throw DegenerateDatasetError(name, "all ratings are identical (zero variance)");
    bool compared = false;
    for (const auto& [k, v] : c.graph.entries()) {
      if (c.conditions[k.first].dataset == name || c.conditions[k.second].dataset == name) {
        compared = true;
        break;
      }
    }
    if (!compared)
      throw DegenerateDatasetError(
          name, "ratings without any pairwise comparison involving the dataset cannot be placed on "
                "the JOD scale (the rating-to-JOD slope is unidentified)");
  }
}

}  // namespace detail

/// Maximum a-posteriori (or maximum-likelihood when the prior is disabled)
/// scores and link parameters. Non-convergence is reported through
/// `converged`, not thrown.
inline UnifiedScale scale(const DatasetCollection& c, const ScaleOptions& opt = {}) {
  opt.model.check();
  if (!(opt.tol > 0) || opt.max_iter < 0) throw std::invalid_argument("scale: bad tol/max_iter");
  c.validate();
  if (c.size() == 0) throw IntegrityError("scale: collection has no conditions");
  detail::check_rated_datasets(c);

  const auto components = connected_components(c);
  if (components.size() > 1) {
    if (!opt.per_component)
      throw IntegrityError(fmt::format(
          "comparison graph is disconnected ({} components); add cross-dataset comparisons or "
          "scale per component",
          components.size()));
    warn(fmt::format("scaling {} disconnected components independently; JOD values are NOT "
                     "comparable across components",
                     components.size()));
  }

  UnifiedScale out;
  out.q.assign(c.size(), 0.0);
  out.components = components.size();
  out.converged = true;
  for (const auto& members : components) {
    std::vector<std::size_t> anchored;
    for (std::size_t i : members)
      if (c.conditions[i].is_reference) anchored.push_back(i);
    if (anchored.empty()) {
      if (!opt.per_component) throw IntegrityError("scale: no reference condition anchors the scale");
      warn("component containing '" + c.conditions[members.front()].key() +
           "' has no reference; anchoring that condition at 0");
      anchored.push_back(members.front());
    }
    const detail::ComponentObjective objective(c, members, anchored, opt);
    optimize::LbfgsOptions lopt;
    lopt.grad_tol = opt.tol;
    lopt.max_iter = opt.max_iter;
    const auto res = optimize::minimize_lbfgs(
        [&](std::span<const double> x, std::span<double> g) { return objective(x, g); },
        objective.initial(c), lopt);
    for (std::size_t i : members) out.q[i] = objective.q_of(res.x, i);
    for (const auto& rs : objective.rated()) out.links[rs.name] = objective.link_of(res.x, rs.offset);
    out.converged = out.converged && res.converged;
    out.iterations += res.iterations;
    out.grad_norm = std::max(out.grad_norm, res.grad_norm);
  }
  bool finite = true;
  for (double v : out.q) finite &= std::isfinite(v);
  out.log_posterior = finite ? log_posterior(c, out.q, out.links, opt.model, opt.prior_enabled)
                             : std::numeric_limits<double>::quiet_NaN();
  if (!std::isfinite(out.log_posterior)) out.converged = false;
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap confidence intervals

struct BootstrapOptions {
  int n_boot = 200;
  std::uint64_t seed = 0;
  double level = 0.95;
  unsigned threads = 1;
  ScaleOptions scale;
};

struct BootstrapResult {
  std::vector<double> low;
  std::vector<double> high;
  int replicates = 0;
  int failed = 0;
};

/// One bootstrap replicate: every measured pair is redrawn as
/// Binomial(n_ij, p̂_ij) and every condition's ratings are resampled with
/// replacement. Depends only on (seed, replicate).
inline DatasetCollection bootstrap_replicate(const DatasetCollection& c, std::uint64_t seed,
                                             std::uint64_t replicate) {
  DatasetCollection r;
  for (const auto& d : c.datasets) r.add_dataset(d);
  for (const auto& id : c.conditions) r.add_condition(id);
  for (const auto& p : c.graph.pairs()) {
    Rng rng(seed, {0x70616972ULL, replicate, p.i, p.j});
    const double phat = static_cast<double>(p.c_ij) / static_cast<double>(p.total());
    const auto k = rng.binomial(p.total(), phat);
    r.graph.add(p.i, p.j, k);
    r.graph.add(p.j, p.i, p.total() - k);
  }
  std::uint64_t dataset_no = 0;
  for (const auto& [name, table] : c.ratings) {
    std::map<std::size_t, std::vector<const RatingRecord*>> by_condition;
    for (const auto& rec : table.records()) by_condition[rec.condition].push_back(&rec);
    auto& out = r.ratings[name];
    for (const auto& [cond, recs] : by_condition) {
      Rng rng(seed, {0x72617465ULL, replicate, dataset_no, cond});
      for (std::size_t k = 0; k < recs.size(); ++k) {
        const auto* pick = recs[rng.below(recs.size())];
        out.add(cond, table.observers()[pick->observer], pick->score, "draw" + std::to_string(k));
      }
    }
    ++dataset_no;
  }
  return r;
}

/// Percentile bootstrap intervals of the scores. Replicates whose scaling
/// throws are skipped and counted; more than half failing is an error.
inline BootstrapResult bootstrap_ci(const DatasetCollection& c, const BootstrapOptions& opt) {
  if (opt.n_boot < 1) throw std::invalid_argument("bootstrap_ci: n_boot must be >= 1");
  if (!(opt.level > 0 && opt.level < 1)) throw std::invalid_argument("bootstrap_ci: level must be in (0,1)");
  const auto n_boot = static_cast<std::size_t>(opt.n_boot);
  std::vector<std::vector<double>> samples(n_boot);
  std::vector<char> ok(n_boot, 0);
  auto run = [&](std::size_t b) {
    try {
      const auto rep = bootstrap_replicate(c, opt.seed, b);
      auto s = scale(rep, opt.scale);
      bool finite = true;
      for (double v : s.q) finite &= std::isfinite(v);
      if (finite) {
        samples[b] = std::move(s.q);
        ok[b] = 1;
      }
    } catch (const Error&) {
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(n_boot)));
  if (threads == 1) {
    for (std::size_t b = 0; b < n_boot; ++b) run(b);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t b = t; b < n_boot; b += threads) run(b);
      });
  }
  BootstrapResult res;
  res.replicates = opt.n_boot;
  for (char f : ok) res.failed += f ? 0 : 1;
  if (2 * res.failed > opt.n_boot)
    throw NumericalError(fmt::format("bootstrap: {} of {} replicates failed", res.failed, opt.n_boot));
  res.low.resize(c.size());
  res.high.resize(c.size());
  std::vector<double> col;
  for (std::size_t i = 0; i < c.size(); ++i) {
    col.clear();
    for (std::size_t b = 0; b < n_boot; ++b)
      if (ok[b]) col.push_back(samples[b][i]);
    std::sort(col.begin(), col.end());
    res.low[i] = stats::quantile_sorted(col, 0.5 * (1 - opt.level));
    res.high[i] = stats::quantile_sorted(col, 0.5 * (1 + opt.level));
  }
  return res;
}

}  // namespace jodscale

#endif  // JODSCALE_SCALING_HPP_
