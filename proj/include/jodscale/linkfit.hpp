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

// Polynomial MOS -> JOD fits and goodness-of-fit reporting.

#ifndef JODSCALE_LINKFIT_HPP_
#define JODSCALE_LINKFIT_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "jodscale/error.hpp"
#include "jodscale/stats.hpp"

namespace jodscale {

struct PolyFit {
  int order = 1;
  /// Highest power first: jod = coeffs[0]*mos^order + ... + coeffs[order].
  std::vector<double> coeffs;
  double r2 = 0.0;
  double r2_adj = 0.0;
  bool monotone_on_range = false;

  double operator()(double x) const {
    double y = 0;
    for (double c : coeffs) y = y * x + c;
    return y;
  }
};

/// 1 - (1 - r2)(n - 1)/(n - p - 1), p excluding the constant term.
inline double adjusted_r_squared(double r2, int n, int p) {
  if (p < 0 || n <= p + 1)
    throw std::invalid_argument(fmt::format("adjusted_r_squared: need n > p + 1 (n={}, p={})", n, p));
  return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - p - 1);
}

namespace detail {

// True when the derivative of `coeffs` (highest power first) keeps one sign
// on [lo, hi] and is not identically zero there.
inline bool polynomial_monotone(const std::vector<double>& coeffs, double lo, double hi) {
  const int order = static_cast<int>(coeffs.size()) - 1;
  std::vector<double> d;
  for (int k = 0; k < order; ++k) d.push_back(coeffs[k] * (order - k));
  auto eval = [&](double x) {
    double y = 0;
    for (double c : d) y = y * x + c;
    return y;
  };
  if (d.empty()) return false;
  // Sample the derivative at the endpoints and at its interior critical
  // points/roots; a sign change can only happen at a root.
  std::vector<double> probes{lo, hi};
  if (d.size() == 2 && d[0] != 0) probes.push_back(-d[1] / d[0]);
  if (d.size() == 3) {
    const double A = d[0], B = d[1], C = d[2];
    if (A != 0) {
      const double disc = B * B - 4 * A * C;
      probes.push_back(-B / (2 * A));
      if (disc > 0) {
        const double s = std::sqrt(disc);
        const double r1 = (-B - s) / (2 * A), r2 = (-B + s) / (2 * A);
        // Sign change inside the open interval => non-monotone.
        for (double r : {r1, r2})
          if (r > lo && r < hi) return false;
      }
    } else if (B != 0) {
      const double r = -C / B;
      if (r > lo && r < hi) return false;
    }
  }
  if (d.size() == 2 && d[0] != 0) {
    const double r = -d[1] / d[0];
    if (r > lo && r < hi) return false;
  }
  bool pos = false, neg = false;
  for (double x : probes) {
    if (x < lo || x > hi) continue;
    const double v = eval(x);
    pos |= v > 0;
    neg |= v < 0;
  }
  return pos != neg;
}

}  // namespace detail

/// Least-squares polynomial of `order` (1..3) mapping MOS to JOD. The
/// predictor is standardized internally; coefficients are reported in raw
/// MOS units.
inline PolyFit fit_polynomial_link(std::span<const double> mos, std::span<const double> jod, int order) {
  if (order < 1 || order > 3) throw std::invalid_argument("fit_polynomial_link: order must be 1, 2 or 3");
  if (mos.size() != jod.size()) throw std::invalid_argument("fit_polynomial_link: length mismatch");
  const auto n = static_cast<int>(mos.size());
  if (n < order + 2)
    throw std::invalid_argument(fmt::format("fit_polynomial_link: need at least {} points", order + 2));
  const double mu = stats::mean(mos);
  const double sd = std::sqrt(stats::variance(mos));
  if (!(sd > 0)) throw NumericalError("fit_polynomial_link: rank deficient (all MOS values equal)");

  Eigen::MatrixXd X(n, order + 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double z = (mos[i] - mu) / sd;
    double p = 1;
    for (int k = 0; k <= order; ++k) {
      X(i, k) = p;  // column k holds z^k
      p *= z;
    }
    y(i) = jod[i];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < order + 1)
    throw NumericalError(fmt::format("fit_polynomial_link: rank deficient design for order {}", order));
  const Eigen::VectorXd beta = qr.solve(y);

  // Expand sum_k beta_k ((x - mu)/sd)^k into powers of x.
  std::vector<double> ascending(order + 1, 0.0);
  for (int k = 0; k <= order; ++k) {
    // ((x - mu)/sd)^k = sd^-k * sum_j C(k,j) x^j (-mu)^(k-j)
    double binom = 1;
    for (int j = 0; j <= k; ++j) {
      if (j > 0) binom = binom * (k - j + 1) / j;
      ascending[j] += beta(k) * binom * std::pow(-mu, k - j) / std::pow(sd, k);
    }
  }
  PolyFit fit;
  fit.order = order;
  fit.coeffs.assign(ascending.rbegin(), ascending.rend());

  const Eigen::VectorXd resid = y - X * beta;
  const double ss_res = resid.squaredNorm();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
  fit.r2_adj = adjusted_r_squared(fit.r2, n, order);
  const auto [lo, hi] = std::minmax_element(mos.begin(), mos.end());
  fit.monotone_on_range = detail::polynomial_monotone(fit.coeffs, *lo, *hi);
  return fit;
}

}  // namespace jodscale

#endif  // JODSCALE_LINKFIT_HPP_
