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

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "jodscale/rng.hpp"
#include "jodscale/scaling.hpp"
#include "oracles.hpp"

namespace jodscale {
namespace {

constexpr double kSigma = 1.048;

DatasetCollection two_condition(std::uint64_t test_wins, std::uint64_t ref_wins) {
  DatasetCollection c;
  c.add_dataset({"toy", ExperimentType::kPairwise, "SDR", {}});
  c.add_condition(ConditionId::reference("toy", "img"));
  c.add_condition(ConditionId::make("toy", "img", "blur", 1));
  c.graph.add(1, 0, test_wins);
  c.graph.add(0, 1, ref_wins);
  return c;
}

// Pairwise dataset P = {P ref, P1}; rated dataset R = {R ref, R1, R2} with
// five observers; comparisons inside P, across, and inside R.
DatasetCollection mixed_instance() {
  DatasetCollection c;
  c.add_dataset({"P", ExperimentType::kPairwise, "SDR", {}});
  c.add_dataset({"R", ExperimentType::kRating, "SDR", {}});
  c.add_condition(ConditionId::reference("P", "img"));    // 0
  c.add_condition(ConditionId::make("P", "img", "a", 1));  // 1
  c.add_condition(ConditionId::reference("R", "img"));    // 2
  c.add_condition(ConditionId::make("R", "img", "b", 1));  // 3
  c.add_condition(ConditionId::make("R", "img", "b", 2));  // 4
  auto both = [&](std::size_t i, std::size_t j, std::uint64_t cij, std::uint64_t cji) {
    c.graph.add(i, j, cij);
    c.graph.add(j, i, cji);
  };
  both(0, 1, 20, 10);
  both(1, 3, 12, 8);
  both(0, 4, 25, 5);
  both(3, 4, 18, 12);
  const double mos[] = {8.0, 6.0, 4.0};
  const double jitter[] = {-0.5, 0.2, 0.4, -0.1, 0.0};
  for (int k = 0; k < 3; ++k)
    for (int o = 0; o < 5; ++o)
      c.ratings["R"].add(static_cast<std::size_t>(2 + k), "o" + std::to_string(o),
                         mos[k] + jitter[(o + 2 * k) % 5] * (1 + 0.3 * k));
  return c;
}

TEST(PreferenceProbability, Anchors) {
  EXPECT_DOUBLE_EQ(preference_probability(0.3, 0.3), 0.5);
  EXPECT_NEAR(preference_probability(1, 0), 0.750, 0.001);
  EXPECT_NEAR(preference_probability(2, 0), 0.911, 0.002);
  EXPECT_NEAR(preference_probability(1, 0), oracle::phi(1 / (std::numbers::sqrt2 * kSigma)), 1e-14);
}

TEST(PreferenceProbability, ReciprocalAndIncreasing) {
  double last = 0;
  for (double d = -6; d <= 6; d += 0.25) {
    const double p = preference_probability(d, 0), q = preference_probability(0, d);
    EXPECT_NEAR(p + q, 1.0, 1e-15);
    EXPECT_GT(p, last);
    last = p;
  }
}

TEST(PwcLogLikelihood, ClosedForms) {
  ComparisonGraph g(2);
  g.add(0, 1, 1);
  g.add(1, 0, 1);
  const std::vector<double> eq{0, 0};
  EXPECT_NEAR(pwc_log_likelihood(g, eq), std::log(0.5), 1e-12);

  ComparisonGraph one(2);
  one.add(0, 1, 1);
  const std::vector<double> far{40, 0};
  EXPECT_NEAR(pwc_log_likelihood(one, far), 0.0, 1e-12);

  ComparisonGraph g31(2);
  g31.add(0, 1, 3);
  g31.add(1, 0, 1);
  const std::vector<double> q{std::numbers::sqrt2 * kSigma * oracle::phi_inverse(0.75), 0};
  EXPECT_NEAR(pwc_log_likelihood(g31, q), oracle::binom_logpmf(3, 4, 0.75), 1e-10);
}

TEST(PwcLogLikelihood, NonFiniteScoresThrow) {
  ComparisonGraph g(2);
  g.add(0, 1, 1);
  const std::vector<double> q{std::nan(""), 0};
  EXPECT_THROW(pwc_log_likelihood(g, q), NumericalError);
}

TEST(RatingLogLikelihood, PeakDensity) {
  RatingTable t;
  t.add(0, "o", 0.7);
  const std::vector<double> q{0.7};
  EXPECT_NEAR(rating_log_likelihood(t, q, {1, 0, 1}), -std::log(kSigma * std::sqrt(2 * std::numbers::pi)), 1e-12);
  EXPECT_NEAR(rating_log_likelihood(t, q, {1, 0, 1}), -0.9658, 5e-5);
}

TEST(RatingLogLikelihood, JointRescaleShiftsByLogA) {
  // Ratings sitting exactly on a*m + b = q: rescaling m by s and a by 1/s
  // leaves every residual at zero and only moves the normalizer.
  const std::vector<double> q{0.2, 1.1, -0.4, 2.0};
  const LinkParams l1{0.8, 0.3, 1.2};
  const double s = 4.0;
  const LinkParams l2{l1.a / s, l1.b, l1.c};
  RatingTable t, t2;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double m = (q[i] - l1.b) / l1.a;
    t.add(i, "o", m);
    t2.add(i, "o", m * s);
  }
  const double d = rating_log_likelihood(t2, q, l2) - rating_log_likelihood(t, q, l1);
  EXPECT_NEAR(d, -(std::log(l2.a) - std::log(l1.a)) * static_cast<double>(q.size()), 1e-10);
}

TEST(LogPosterior, RatingsEnterAsDensityOfObservedScores) {
  DatasetCollection c;
  c.add_dataset({"d", ExperimentType::kRating, "SDR", {}});
  c.add_condition(ConditionId::reference("d", "x"));
  c.add_condition(ConditionId::make("d", "x", "n", 1));
  c.ratings["d"].add(0, "o", 2.0);
  c.ratings["d"].add(1, "o", 0.5);
  const std::vector<double> q{0, -1.3};
  const LinkParams l{0.7, -1.1, 1.4};
  double expect = 0;
  for (const auto& r : c.ratings["d"].records())
    expect += oracle::gauss_logpdf(r.score, (q[r.condition] - l.b) / l.a, l.c * kSigma);
  EXPECT_NEAR(log_posterior(c, q, {{"d", l}}, {}, false), expect, 1e-12);
}

TEST(RatingLogLikelihood, SumOfDensities) {
  RatingTable t;
  t.add(0, "x", 3.2);
  t.add(1, "x", -1.0);
  t.add(1, "y", 0.4);
  const std::vector<double> q{1.5, -0.7};
  const LinkParams l{0.6, 0.9, 1.7};
  double expect = 0;
  for (const auto& r : t.records())
    expect += oracle::gauss_logpdf(l.a * r.score + l.b, q[r.condition], l.a * l.c * kSigma);
  EXPECT_NEAR(rating_log_likelihood(t, q, l), expect, 1e-12);
}

TEST(LogPosterior, EmptyIsZero) {
  DatasetCollection c;
  c.add_dataset({"d", ExperimentType::kPairwise, "SDR", {}});
  c.add_condition(ConditionId::reference("d", "x"));
  const std::vector<double> q{0};
  EXPECT_DOUBLE_EQ(log_posterior(c, q, {}, {}, false), 0.0);
}

TEST(LogPosterior, PriorAtEqualScores) {
  DatasetCollection c;
  c.add_dataset({"d", ExperimentType::kPairwise, "SDR", {}});
  for (int i = 0; i < 4; ++i) c.add_condition(ConditionId::make("d", "x", "n", i + 1));
  const std::vector<double> q(4, -0.8);
  EXPECT_NEAR(log_posterior(c, q, {}, {}, true), 4 * std::log(1 / (kSigma * std::sqrt(2 * std::numbers::pi))), 1e-12);
}

TEST(LogPosterior, AddsComponents) {
  DatasetCollection c;
  c.add_dataset({"d", ExperimentType::kRating, "SDR", {}});
  c.add_condition(ConditionId::reference("d", "x"));
  c.add_condition(ConditionId::make("d", "x", "n", 1));
  c.graph.add(0, 1, 1);
  c.graph.add(1, 0, 1);
  c.ratings["d"].add(1, "o", 0.0);
  const std::vector<double> q{0, 0};
  const std::map<std::string, LinkParams> links{{"d", {1, 0, 1}}};
  const double expect = std::log(0.5) + oracle::gauss_logpdf(0, 0, kSigma);
  EXPECT_NEAR(log_posterior(c, q, links, {}, false), expect, 1e-12);
  const double prior = 2 * oracle::gauss_logpdf(0, 0, kSigma);
  EXPECT_NEAR(log_posterior(c, q, links, {}, true), expect + prior, 1e-12);
}

TEST(LogPosteriorGradient, MatchesFiniteDifferences) {
  auto c = mixed_instance();
  Rng rng(99, {});
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x;
    for (std::size_t i = 0; i < c.size(); ++i) x.push_back(rng.uniform(-3, 1));
    x.push_back(rng.uniform(0.3, 2));
    x.push_back(rng.uniform(-1, 1));
    x.push_back(rng.uniform(0.5, 2));
    auto unpack = [&](const std::vector<double>& v) {
      std::vector<double> q(v.begin(), v.begin() + static_cast<long>(c.size()));
      std::map<std::string, LinkParams> links{{"R", {v[c.size()], v[c.size() + 1], v[c.size() + 2]}}};
      return std::pair{q, links};
    };
    for (bool prior : {false, true}) {
      auto f = [&](const std::vector<double>& v) {
        auto [q, l] = unpack(v);
        return log_posterior(c, q, l, {}, prior);
      };
      const auto fd = oracle::fd_gradient(f, x);
      auto [q, l] = unpack(x);
      const auto g = log_posterior_gradient(c, q, l, {}, prior);
      std::vector<double> flat = g.q;
      flat.push_back(g.links.at("R").a);
      flat.push_back(g.links.at("R").b);
      flat.push_back(g.links.at("R").c);
      for (std::size_t i = 0; i < flat.size(); ++i)
        EXPECT_NEAR(flat[i], fd[i], 1e-6 * std::max(1.0, std::abs(fd[i]))) << "component " << i;
    }
  }
}

double oracle_two_condition_q(double p_ref_over_test) {
  return -std::numbers::sqrt2 * kSigma * oracle::phi_inverse(p_ref_over_test);
}

TEST(Scale, TwoConditionAnalytic) {
  ScaleOptions opt;
  opt.prior_enabled = false;
  const auto s = scale(two_condition(25, 75), opt);
  ASSERT_TRUE(s.converged);
  EXPECT_EQ(s.q[0], 0.0);
  EXPECT_NEAR(s.q[1], oracle_two_condition_q(0.75), 1e-5);
  EXPECT_NEAR(s.q[1], -1.0, 0.01);
  EXPECT_TRUE(std::isfinite(s.log_posterior));
}

TEST(Scale, AllTiesGiveZero) {
  DatasetCollection c;
  c.add_dataset({"d", ExperimentType::kPairwise, "SDR", {}});
  c.add_condition(ConditionId::reference("d", "x"));
  for (int i = 1; i < 5; ++i) c.add_condition(ConditionId::make("d", "x", "n", i));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      if (i != j) c.graph.add(i, j, 6);
  ScaleOptions opt;
  opt.prior_enabled = false;
  const auto s = scale(c, opt);
  for (double v : s.q) EXPECT_NEAR(v, 0.0, 1e-6);
}

TEST(Scale, ReferencesAreExactlyZero) {
  auto c = mixed_instance();
  const auto s = scale(c);
  ASSERT_TRUE(s.converged);
  EXPECT_EQ(s.q[0], 0.0);
  EXPECT_EQ(s.q[2], 0.0);
  EXPECT_GT(s.links.at("R").a, 0.0);
  EXPECT_GT(s.links.at("R").c, 0.0);
}

TEST(Scale, DisconnectedIsErrorUnlessPerComponent) {
  DatasetCollection c;
  c.add_dataset({"A", ExperimentType::kPairwise, "SDR", {}});
  c.add_dataset({"B", ExperimentType::kPairwise, "SDR", {}});
  c.add_condition(ConditionId::reference("A", "x"));
  c.add_condition(ConditionId::make("A", "x", "n", 1));
  c.add_condition(ConditionId::reference("B", "x"));
  c.add_condition(ConditionId::make("B", "x", "n", 1));
  c.graph.add(0, 1, 3);
  c.graph.add(1, 0, 1);
  c.graph.add(2, 3, 1);
  c.graph.add(3, 2, 3);
  EXPECT_THROW(scale(c), IntegrityError);
  ScaleOptions opt;
  opt.per_component = true;
  std::vector<std::string> warnings;
  ScopedWarningSink sink([&](const std::string& m) { warnings.push_back(m); });
  const auto s = scale(c, opt);
  EXPECT_EQ(s.components, 2u);
  EXPECT_LT(s.q[1], 0.0);
  EXPECT_GT(s.q[3], 0.0);
  EXPECT_FALSE(warnings.empty());
}

TEST(Scale, ZeroVarianceRatingsNameTheDataset) {
  auto c = mixed_instance();
  auto& t = c.ratings["R"];
  t = RatingTable{};
  for (std::size_t i = 2; i < 5; ++i) t.add(i, "o", 5.0);
  try {
    scale(c);
    FAIL() << "expected DegenerateDatasetError";
  } catch (const DegenerateDatasetError& e) {
    EXPECT_EQ(e.dataset(), "R");
  }
}

TEST(Scale, RatingsWithoutComparisonsAreRejected) {
  DatasetCollection c;
  c.add_dataset({"R", ExperimentType::kRating, "SDR", {}});
  c.add_condition(ConditionId::reference("R", "x"));
  for (int i = 1; i < 5; ++i) c.add_condition(ConditionId::make("R", "x", "n", i));
  for (std::size_t i = 0; i < 5; ++i)
    for (int o = 0; o < 3; ++o) c.ratings["R"].add(i, "o" + std::to_string(o), 10.0 - 2.0 * i + 0.3 * o);
  EXPECT_THROW(scale(c), DegenerateDatasetError);
}

TEST(Scale, PriorBoundsUnanimousPairs) {
  ScaleOptions with;
  const auto s = scale(two_condition(0, 30), with);
  ASSERT_TRUE(s.converged);
  EXPECT_TRUE(std::isfinite(s.q[1]));
  EXPECT_LT(s.q[1], -1.0);
  EXPECT_GT(s.q[1], -10.0);
}

TEST(Scale, MatchesProfileLikelihoodOverSlope) {
  const auto c = mixed_instance();
  ScaleOptions opt;
  opt.prior_enabled = false;
  const auto s = scale(c, opt);
  ASSERT_TRUE(s.converged);
  const LinkParams best = s.links.at("R");

  // Profile over a: maximize over (q1, q3, q4, b, log c) independently.
  auto profile = [&](double a) {
    auto negll = [&](const std::vector<double>& v) {
      const std::vector<double> q{0, v[0], 0, v[1], v[2]};
      const std::map<std::string, LinkParams> l{{"R", {a, v[3], std::exp(v[4])}}};
      return -log_posterior(c, q, l, {}, false);
    };
    const auto x = oracle::nelder_mead(negll, {s.q[1], s.q[3], s.q[4], best.b, std::log(best.c)});
    return -negll(x);
  };
  const double at_best = profile(best.a);
  EXPECT_NEAR(at_best, s.log_posterior, 1e-6);
  for (double f : {0.7, 0.85, 0.95, 1.05, 1.15, 1.3}) EXPECT_LT(profile(best.a * f), at_best) << f;
}

TEST(Scale, MoreWinsNeverReduceGap) {
  // Three conditions; raise c_12 step by step. The fitted gap q1 - q2 must
  // not decrease and must agree with a grid-search maximum.
  double last_gap = -std::numeric_limits<double>::infinity();
  for (std::uint64_t wins = 2; wins <= 14; wins += 3) {
    DatasetCollection c;
    c.add_dataset({"d", ExperimentType::kPairwise, "SDR", {}});
    c.add_condition(ConditionId::reference("d", "x"));
    c.add_condition(ConditionId::make("d", "x", "n", 1));
    c.add_condition(ConditionId::make("d", "x", "n", 2));
    c.graph.add(0, 1, 7);
    c.graph.add(1, 0, 3);
    c.graph.add(0, 2, 8);
    c.graph.add(2, 0, 2);
    c.graph.add(1, 2, wins);
    c.graph.add(2, 1, 5);
    ScaleOptions opt;
    opt.prior_enabled = false;
    const auto s = scale(c, opt);
    const double gap = s.q[1] - s.q[2];
    EXPECT_GE(gap, last_gap - 1e-9);
    last_gap = gap;

    double best = -std::numeric_limits<double>::infinity(), b1 = 0, b2 = 0;
    const double h = 0.01;
    for (double q1 = -4; q1 <= 1; q1 += h)
      for (double q2 = -4; q2 <= 1; q2 += h) {
        const std::vector<double> q{0, q1, q2};
        const double ll = pwc_log_likelihood(c.graph, q);
        if (ll > best) best = ll, b1 = q1, b2 = q2;
      }
    EXPECT_NEAR(s.q[1], b1, 1.5 * h);
    EXPECT_NEAR(s.q[2], b2, 1.5 * h);
  }
}

TEST(Bootstrap, SingleReplicateIsDegenerate) {
  BootstrapOptions opt;
  opt.n_boot = 1;
  opt.seed = 5;
  const auto r = bootstrap_ci(two_condition(25, 75), opt);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(r.low[i], r.high[i]);
}

TEST(Bootstrap, DeterministicAndThreadIndependent) {
  BootstrapOptions opt;
  opt.n_boot = 40;
  opt.seed = 17;
  const auto c = mixed_instance();
  const auto a = bootstrap_ci(c, opt);
  const auto b = bootstrap_ci(c, opt);
  opt.threads = 4;
  const auto t = bootstrap_ci(c, opt);
  EXPECT_EQ(a.low, b.low);
  EXPECT_EQ(a.high, b.high);
  EXPECT_EQ(a.low, t.low);
  EXPECT_EQ(a.high, t.high);
}

TEST(Bootstrap, IntervalCoversAnalyticValue) {
  BootstrapOptions opt;
  opt.n_boot = 200;
  opt.seed = 1;
  opt.scale.prior_enabled = false;
  const auto r = bootstrap_ci(two_condition(25, 75), opt);
  EXPECT_LE(r.low[1], -1.0);
  EXPECT_GE(r.high[1], -1.0);
  EXPECT_EQ(r.low[0], 0.0);
  EXPECT_EQ(r.high[0], 0.0);
}

}  // namespace
}  // namespace jodscale
