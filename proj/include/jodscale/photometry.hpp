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

// Display model (gain-gamma-offset) and perceptually uniform (PU) encoding
// of absolute luminance.
//
// The PU curve is the integral of the reciprocal detection threshold,
// affinely normalized so that the usual SDR range 0.8..80 cd/m^2 maps to
// 0..255. It is stored as a look-up table over log-spaced knots and applied
// by piecewise-linear interpolation.

#ifndef JODSCALE_PHOTOMETRY_HPP_
#define JODSCALE_PHOTOMETRY_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "jodscale/csv.hpp"
#include "jodscale/error.hpp"

namespace jodscale {

inline constexpr double kPuAnchorLow = 0.8;    // cd/m^2 -> 0
inline constexpr double kPuAnchorHigh = 80.0;  // cd/m^2 -> 255
inline constexpr double kPuCodeHigh = 255.0;

struct DisplayModel {
  double L_peak = 100.0;
  double L_black = 0.5;
  double gamma = 2.2;

  void check() const {
    if (!(L_peak > L_black) || !(L_black >= 0) || !(gamma > 0) || !std::isfinite(L_peak))
      throw std::invalid_argument("DisplayModel: require L_peak > L_black >= 0 and gamma > 0");
  }
};

/// Converts one gamma-encoded channel value in [0,1] to emitted luminance.
/// Out-of-range input is clamped with a warning, or rejected when `strict`.
inline double display_forward(double c_srgb, const DisplayModel& d, bool strict = false) {
  d.check();
  if (!(c_srgb >= 0.0 && c_srgb <= 1.0)) {
    if (strict || std::isnan(c_srgb))
      throw IntegrityError(fmt::format("display_forward: value {} outside [0,1]", c_srgb));
    warn(fmt::format("display_forward: clamping {} to [0,1]", c_srgb));
    c_srgb = std::clamp(c_srgb, 0.0, 1.0);
  }
  return (d.L_peak - d.L_black) * std::pow(c_srgb, d.gamma) + d.L_black;
}

inline std::vector<double> display_forward(std::span<const double> c, const DisplayModel& d,
                                           bool strict = false) {
  std::vector<double> out;
  out.reserve(c.size());
  for (double v : c) out.push_back(display_forward(v, d, strict));
  return out;
}

/// Relative linear value in [0,1] to an 8-bit code value with gamma 1/2.2.
inline int sdr_encode(double relative) {
  const double v = std::isnan(relative) ? 0.0 : std::clamp(relative, 0.0, 1.0);
  return static_cast<int>(std::lround(255.0 * std::pow(v, 1.0 / 2.2)));
}

/// Detection threshold T(L) in cd/m^2 as a function of adapting luminance.
using ThresholdFunction = std::function<double(double)>;

/// Default threshold-versus-intensity model:
///   T(L) = k * L * (1 + (L_s / L)^2)^(1/4)
/// Weber behaviour (T ~ k L) above L_s and square-root (de Vries-Rose)
/// behaviour below it. Smooth, positive, and non-decreasing. It is an
/// approximation; a measured curve can be plugged in with
/// tabulated_threshold().
struct DefaultThreshold {
  double weber = 0.01;
  double knee = 20.0;  // cd/m^2

  double operator()(double L) const {
    const double r = knee / L;
    return weber * L * std::pow(1.0 + r * r, 0.25);
  }
};

/// Threshold from a two-column table (luminance, threshold), interpolated
/// linearly in log-log space and extrapolated with the end slopes.
inline ThresholdFunction tabulated_threshold(std::vector<double> luminance, std::vector<double> threshold) {
  if (luminance.size() != threshold.size() || luminance.size() < 2)
    throw std::invalid_argument("tabulated_threshold: need >= 2 (L, T) rows");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < luminance.size(); ++i) {
    if (!(luminance[i] > 0) || !(threshold[i] > 0))
      throw IntegrityError("tabulated_threshold: luminance and threshold must be positive");
    if (i > 0 && !(luminance[i] > luminance[i - 1]))
      throw IntegrityError("tabulated_threshold: luminance must be strictly increasing");
    lx.push_back(std::log(luminance[i]));
    ly.push_back(std::log(threshold[i]));
  }
  return [lx = std::move(lx), ly = std::move(ly)](double L) {
    const double x = std::log(L);
    auto it = std::upper_bound(lx.begin(), lx.end(), x);
    std::size_t k = static_cast<std::size_t>(it - lx.begin());
    k = std::clamp<std::size_t>(k, 1, lx.size() - 1);
    const double t = (x - lx[k - 1]) / (lx[k] - lx[k - 1]);
    return std::exp(ly[k - 1] + t * (ly[k] - ly[k - 1]));
  };
}

inline ThresholdFunction read_threshold_csv(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  const auto cl = t.column("luminance"), ct = t.column("threshold");
  std::vector<double> L, T;
  for (const auto& row : t.rows) {
    L.push_back(csv::to_double(row[cl], "luminance"));
    T.push_back(csv::to_double(row[ct], "threshold"));
  }
  return tabulated_threshold(std::move(L), std::move(T));
}

struct PuLut {
  std::vector<double> luminance_knots;  // ascending, cd/m^2
  std::vector<double> pu_values;        // same length, strictly increasing
  double L_min = 0.0;
  double L_max = 0.0;

  /// Piecewise-linear interpolation at L, which must lie in [L_min, L_max].
  double interpolate(double L) const {
    const auto& x = luminance_knots;
    auto it = std::upper_bound(x.begin(), x.end(), L);
    std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - x.begin()), 1, x.size() - 1);
    const double t = (L - x[k - 1]) / (x[k] - x[k - 1]);
    return pu_values[k - 1] + t * (pu_values[k] - pu_values[k - 1]);
  }
};

struct PuLutOptions {
  double L_min = 1e-3;
  double L_max = 1e6;
  int n_knots = 4096;
};

/// Tabulates PU(L) = integral of 1/T over [L_min, L] with the trapezoidal
/// rule on log-spaced knots, then rescales so PU(0.8) = 0 and PU(80) = 255.
inline PuLut build_pu_lut(const ThresholdFunction& threshold, const PuLutOptions& opt = {}) {
  if (!(opt.L_min > 0 && opt.L_min < kPuAnchorLow && opt.L_max > kPuAnchorHigh))
    throw std::invalid_argument("build_pu_lut: require 0 < L_min < 0.8 and L_max > 80");
  if (opt.n_knots < 64) throw std::invalid_argument("build_pu_lut: n_knots must be >= 64");
  PuLut lut;
  lut.L_min = opt.L_min;
  lut.L_max = opt.L_max;
  const auto n = static_cast<std::size_t>(opt.n_knots);
  lut.luminance_knots.resize(n);
  lut.pu_values.resize(n);
  const double lo = std::log(opt.L_min), hi = std::log(opt.L_max);
  std::vector<double> inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double L = i + 1 == n ? opt.L_max
                     : i == 0   ? opt.L_min
                                : std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    lut.luminance_knots[i] = L;
    const double T = threshold(L);
    if (!(T > 0) || !std::isfinite(T))
      throw IntegrityError(fmt::format("build_pu_lut: threshold T({}) = {} is not positive", L, T));
    inv[i] = 1.0 / T;
  }
  lut.pu_values[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i)
    lut.pu_values[i] = lut.pu_values[i - 1] +
                       0.5 * (inv[i] + inv[i - 1]) * (lut.luminance_knots[i] - lut.luminance_knots[i - 1]);
  const double p_lo = lut.interpolate(kPuAnchorLow);
  const double p_hi = lut.interpolate(kPuAnchorHigh);
  const double gain = kPuCodeHigh / (p_hi - p_lo);
  for (double& v : lut.pu_values) v = (v - p_lo) * gain;
  return lut;
}

inline PuLut build_pu_lut(const PuLutOptions& opt = {}) { return build_pu_lut(DefaultThreshold{}, opt); }

/// Elementwise PU encoding. Values outside [L_min, L_max] are clamped with
/// a warning, or rejected when `strict`.
inline std::vector<double> pu_encode(std::span<const double> values, const PuLut& lut, bool strict = false) {
  std::vector<double> out;
  out.reserve(values.size());
  std::size_t clamped = 0;
  for (double L : values) {
    if (!(L >= lut.L_min && L <= lut.L_max)) {
      if (strict || std::isnan(L))
        throw IntegrityError(fmt::format("pu_encode: luminance {} outside [{}, {}]", L, lut.L_min, lut.L_max));
      ++clamped;
      L = std::clamp(L, lut.L_min, lut.L_max);
    }
    out.push_back(lut.interpolate(L));
  }
  if (clamped) warn(fmt::format("pu_encode: clamped {} value(s) to the LUT range", clamped));
  return out;
}

inline double pu_encode(double L, const PuLut& lut, bool strict = false) {
  return pu_encode(std::span<const double>(&L, 1), lut, strict).front();
}

/// Inverse of pu_encode by bisection on the LUT.
inline double pu_decode(double pu, const PuLut& lut) {
  double lo = lut.L_min, hi = lut.L_max;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (lut.interpolate(mid) < pu ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Logarithmic alternative to PU, normalized with the same anchors
/// (0.8 -> 0, 80 -> 255). Provided for comparison experiments.
inline double log_encode(double L) {
  const double x = std::log10(std::max(L, 1e-12));
  return (x - std::log10(kPuAnchorLow)) * kPuCodeHigh / (std::log10(kPuAnchorHigh) - std::log10(kPuAnchorLow));
}

/// Two-column CSV `luminance,pu` with round-trip number formatting.
inline std::string pu_lut_to_csv(const PuLut& lut) {
  std::string out = "luminance,pu\n";
  for (std::size_t i = 0; i < lut.luminance_knots.size(); ++i)
    out += csv::num(lut.luminance_knots[i]) + "," + csv::num(lut.pu_values[i]) + "\n";
  return out;
}

inline PuLut read_pu_lut(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  const auto cl = t.column("luminance"), cp = t.column("pu");
  PuLut lut;
  for (const auto& row : t.rows) {
    lut.luminance_knots.push_back(csv::to_double(row[cl], "luminance"));
    lut.pu_values.push_back(csv::to_double(row[cp], "pu"));
  }
  if (lut.luminance_knots.size() < 2) throw ParseError(t.source + ": LUT needs at least two rows");
  for (std::size_t i = 1; i < lut.luminance_knots.size(); ++i)
    if (!(lut.luminance_knots[i] > lut.luminance_knots[i - 1]) || !(lut.pu_values[i] > lut.pu_values[i - 1]))
      throw IntegrityError(t.source + ": LUT must be strictly increasing in both columns");
  lut.L_min = lut.luminance_knots.front();
  lut.L_max = lut.luminance_knots.back();
  return lut;
}

}  // namespace jodscale

#endif  // JODSCALE_PHOTOMETRY_HPP_
