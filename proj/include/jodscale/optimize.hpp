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

// Limited-memory BFGS minimizer with a strong-Wolfe line search
// (bracketing + cubic-interpolation zoom).

#ifndef JODSCALE_OPTIMIZE_HPP_
#define JODSCALE_OPTIMIZE_HPP_

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace jodscale::optimize {

/// Objective: returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
  double grad_tol = 1e-6;  // on the infinity norm of the gradient
  int max_iter = 2000;
  int memory = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 40;
};

struct LbfgsResult {
  std::vector<double> x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(std::span<const double> a) {
  double m = 0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb), clamped
// to the interior of the interval.
inline double cubic_min(double a, double fa, double ga, double b, double fb, double gb) {
  const double d1 = ga + gb - 3 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  double t;
  if (disc >= 0 && std::isfinite(disc)) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2 * d2);
  } else {
    t = 0.5 * (a + b);
  }
  const double lo = std::min(a, b), hi = std::max(a, b), w = hi - lo;
  if (!std::isfinite(t) || t < lo + 0.1 * w || t > hi - 0.1 * w) t = 0.5 * (a + b);
  return t;
}

struct LinePoint {
  double step;
  double f;
  double slope;
};

}  // namespace detail

/// Minimizes `fn` from `x0`. Never throws on non-convergence; inspect
/// `converged`.
inline LbfgsResult minimize_lbfgs(const Objective& fn, std::vector<double> x0,
                                  const LbfgsOptions& opt = {}) {
  using detail::dot;
  const std::size_t n = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);
  std::vector<double> g(n), d(n), x_new(n), g_new(n);
  res.f = fn(res.x, g);
  res.grad_norm = detail::inf_norm(g);
  if (n == 0 || res.grad_norm <= opt.grad_tol) {
    res.converged = std::isfinite(res.f);
    return res;
  }

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha(opt.memory);

  auto evaluate = [&](double step) {
    for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + step * d[i];
    const double f = fn(x_new, g_new);
    return detail::LinePoint{step, f, std::isfinite(f) ? dot(g_new, d) : 0.0};
  };

  int failures = 0;
  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    // Two-loop recursion for d = -H g.
    for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
    const int m = static_cast<int>(s_hist.size());
    for (int k = m - 1; k >= 0; --k) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * y_hist[k][i];
    }
    if (m > 0) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (double& v : d) v *= gamma;
    }
    for (int k = 0; k < m; ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], d);
      for (std::size_t i = 0; i < n; ++i) d[i] += s_hist[k][i] * (alpha[k] - beta);
    }
    double slope0 = dot(g, d);
    if (!(slope0 < 0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      slope0 = dot(g, d);
    }

    double step = 1.0;
    if (m == 0) step = std::min(1.0, 1.0 / std::max(detail::inf_norm(g), 1e-12));

    // Strong-Wolfe line search.
    const detail::LinePoint p0{0.0, res.f, slope0};
    // Near the optimum the attainable decrease drops below the rounding
    // error of f; tolerate that much so the curvature test can still accept.
    const double f_noise = 1e-12 * std::max(1.0, std::abs(res.f));
    detail::LinePoint prev = p0;
    std::optional<detail::LinePoint> accepted;
    auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) -> std::optional<detail::LinePoint> {
      for (int z = 0; z < opt.max_line_search; ++z) {
        const double t = detail::cubic_min(lo.step, lo.f, lo.slope, hi.step, hi.f, hi.slope);
        const auto p = evaluate(t);
        if (!std::isfinite(p.f) || p.f > p0.f + opt.c1 * t * p0.slope + f_noise || p.f >= lo.f + f_noise) {
          hi = p;
        } else {
          if (std::abs(p.slope) <= -opt.c2 * p0.slope) return p;
          if (p.slope * (hi.step - lo.step) >= 0) hi = lo;
          lo = p;
        }
        if (std::abs(hi.step - lo.step) <= 1e-16 * std::max(1.0, std::abs(lo.step))) break;
      }
      // Accept any sufficient-decrease point found.
      if (lo.step > 0 && lo.f < p0.f) {
        evaluate(lo.step);
        return lo;
      }
      return std::nullopt;
    };
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      const auto p = evaluate(step);
      if (!std::isfinite(p.f)) {
        step = 0.5 * (prev.step + step);
        continue;
      }
      if (p.f > p0.f + opt.c1 * step * p0.slope + f_noise || (ls > 0 && p.f >= prev.f + f_noise)) {
        accepted = zoom(prev, p);
        break;
      }
      if (std::abs(p.slope) <= -opt.c2 * p0.slope) {
        accepted = p;
        break;
      }
      if (p.slope >= 0) {
        accepted = zoom(p, prev);
        break;
      }
      prev = p;
      step *= 2.0;
    }

    if (!accepted) {
      // Retry once from steepest descent with a fresh memory.
      if (++failures > 1 || s_hist.empty()) break;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }
    failures = 0;
    // x_new/g_new hold the accepted point (zoom re-evaluates when needed).
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - res.x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, y);
    const double f_old = res.f;
    res.x = x_new;
    g = g_new;
    res.f = accepted->f;
    res.grad_norm = detail::inf_norm(g);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (res.grad_norm <= opt.grad_tol) {
      res.converged = true;
      ++res.iterations;
      return res;
    }
    if (!(res.f <= f_old + f_noise)) break;
  }
  res.converged = res.grad_norm <= opt.grad_tol;
  return res;
}

}  // namespace jodscale::optimize

#endif  // JODSCALE_OPTIMIZE_HPP_
