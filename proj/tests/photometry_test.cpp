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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "gtest/gtest.h"
#include "jodscale/photometry.hpp"

namespace jodscale {
namespace {

// Integral of 1/T over [a, b] by composite Simpson in u = ln L with n
// (even) intervals: integrand L / T(L) du.
double simpson_log(const ThresholdFunction& T, double a, double b, int n) {
  const double ua = std::log(a), ub = std::log(b), h = (ub - ua) / n;
  double s = 0;
  for (int i = 0; i <= n; ++i) {
    const double L = std::exp(ua + h * i);
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    s += w * L / T(L);
  }
  return s * h / 3;
}

double reference_pu(const ThresholdFunction& T, double L) {
  const int n = 1000000;
  const double lo = 1e-3;
  const double i08 = simpson_log(T, lo, 0.8, n), i80 = simpson_log(T, lo, 80, n);
  return 255.0 * (simpson_log(T, lo, L, n) - i08) / (i80 - i08);
}

TEST(DisplayForward, Examples) {
  const DisplayModel d{100, 0.5, 2.2};
  EXPECT_DOUBLE_EQ(display_forward(1.0, d), 100.0);
  EXPECT_DOUBLE_EQ(display_forward(0.0, d), 0.5);
  EXPECT_NEAR(display_forward(0.5, d), 99.5 * std::pow(0.5, 2.2) + 0.5, 1e-12);
  EXPECT_NEAR(display_forward(0.5, d), 22.155, 1e-3);
}

TEST(DisplayForward, ClampsOrRejects) {
  const DisplayModel d;
  int warnings = 0;
  ScopedWarningSink sink([&](const std::string&) { ++warnings; });
  EXPECT_DOUBLE_EQ(display_forward(1.5, d), 100.0);
  EXPECT_EQ(warnings, 1);
  EXPECT_THROW(display_forward(1.5, d, true), IntegrityError);
  EXPECT_THROW(display_forward(0.5, DisplayModel{1, 2, 2.2}), std::invalid_argument);
}

TEST(DisplayForward, StrictlyIncreasing) {
  const DisplayModel d{400, 0.1, 2.4};
  double last = -1;
  for (int i = 0; i <= 255; ++i) {
    const double v = display_forward(i / 255.0, d);
    EXPECT_GT(v, last);
    last = v;
  }
}

TEST(SdrEncode, Examples) {
  EXPECT_EQ(sdr_encode(0.0), 0);
  EXPECT_EQ(sdr_encode(1.0), 255);
  EXPECT_EQ(sdr_encode(0.5), 186);
  EXPECT_EQ(sdr_encode(2.0), 255);
}

TEST(PuLut, ConstantThresholdIsAffine) {
  const auto lut = build_pu_lut([](double) { return 0.37; });
  EXPECT_NEAR(lut.interpolate(40.4), 127.5, 1e-6);
  EXPECT_NEAR(pu_encode(0.8, lut), 0.0, 1e-9);
  EXPECT_NEAR(pu_encode(80.0, lut), 255.0, 1e-9);
}

TEST(PuLut, AnchorsHoldForAnyThreshold) {
  const std::vector<ThresholdFunction> thresholds{
      DefaultThreshold{}, DefaultThreshold{0.02, 5}, [](double L) { return 0.1 + 0.05 * L; },
      [](double L) { return std::sqrt(L) * 0.3; }};
  for (const auto& T : thresholds) {
    const auto lut = build_pu_lut(T);
    EXPECT_NEAR(pu_encode(0.8, lut), 0.0, 1e-6);
    EXPECT_NEAR(pu_encode(80.0, lut), 255.0, 1e-6);
    for (std::size_t i = 1; i < lut.pu_values.size(); ++i) ASSERT_GT(lut.pu_values[i], lut.pu_values[i - 1]);
  }
}

TEST(PuLut, MatchesFineIntegration) {
  const auto lut = build_pu_lut();
  const DefaultThreshold T;
  for (double L : {10.0, 1000.0, 0.01, 3e4}) EXPECT_NEAR(pu_encode(L, lut), reference_pu(T, L), 0.1) << L;
}

TEST(PuLut, StableUnderHalvedKnots) {
  const auto full = build_pu_lut();
  const auto half = build_pu_lut(PuLutOptions{1e-3, 1e6, 2048});
  for (double e = -2.9; e < 5.9; e += 0.1) {
    const double L = std::pow(10.0, e);
    EXPECT_LT(std::abs(pu_encode(L, full) - pu_encode(L, half)), 0.5) << L;
  }
}

TEST(PuLut, RejectsBadThresholdAndOptions) {
  EXPECT_THROW(build_pu_lut([](double L) { return L > 100 ? -1.0 : 1.0; }), IntegrityError);
  EXPECT_THROW(build_pu_lut(PuLutOptions{1, 1e6, 4096}), std::invalid_argument);
  EXPECT_THROW(build_pu_lut(PuLutOptions{1e-3, 1e6, 10}), std::invalid_argument);
}

TEST(PuEncode, MonotoneClampedAndInvertible) {
  const auto lut = build_pu_lut();
  std::vector<double> L;
  for (double e = -3; e <= 6; e += 0.01) L.push_back(std::pow(10.0, e));
  L.back() = 1e6;
  const auto pu = pu_encode(L, lut);
  for (std::size_t i = 1; i < pu.size(); ++i) EXPECT_GT(pu[i], pu[i - 1]);
  const double spacing = std::exp((std::log(1e6) - std::log(1e-3)) / 4095) - 1;  // relative knot step
  for (std::size_t i = 0; i < L.size(); i += 37) EXPECT_NEAR(pu_decode(pu[i], lut), L[i], L[i] * spacing);

  EXPECT_TRUE(pu_encode(std::vector<double>{}, lut).empty());
  int warnings = 0;
  ScopedWarningSink sink([&](const std::string&) { ++warnings; });
  EXPECT_DOUBLE_EQ(pu_encode(1e9, lut), lut.pu_values.back());
  EXPECT_EQ(warnings, 1);
  EXPECT_THROW(pu_encode(1e9, lut, true), IntegrityError);
}

TEST(PuLut, CsvRoundTripIsExact) {
  const auto lut = build_pu_lut();
  const auto path = std::filesystem::temp_directory_path() / "jodscale_pu_lut.csv";
  csv::write_text(path, pu_lut_to_csv(lut));
  const auto back = read_pu_lut(path);
  EXPECT_EQ(back.luminance_knots, lut.luminance_knots);
  EXPECT_EQ(back.pu_values, lut.pu_values);
}

TEST(TabulatedThreshold, ReproducesSampledModel) {
  const DefaultThreshold T;
  std::vector<double> L, t;
  for (double e = -3.5; e <= 6.5; e += 0.05) {
    L.push_back(std::pow(10.0, e));
    t.push_back(T(L.back()));
  }
  const auto tab = build_pu_lut(tabulated_threshold(L, t));
  const auto ref = build_pu_lut(T);
  for (double x : {0.1, 5.0, 200.0, 1e5}) EXPECT_NEAR(pu_encode(x, tab), pu_encode(x, ref), 0.5);
  EXPECT_THROW(tabulated_threshold({1, 1}, {1, 2}), IntegrityError);
}

TEST(LogEncode, SharesAnchors) {
  EXPECT_NEAR(log_encode(0.8), 0.0, 1e-12);
  EXPECT_NEAR(log_encode(80), 255.0, 1e-12);
}

}  // namespace
}  // namespace jodscale
