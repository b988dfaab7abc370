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

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "gtest/gtest.h"
#include "jodscale/model.hpp"
#include "jodscale/rng.hpp"

namespace jodscale {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("jodscale_model_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string single_dataset_manifest() {
  return R"({"datasets": [{"name": "toy", "experiment": "pwc"}],
             "conditions": "conditions.csv", "comparisons": "comparisons.csv"})";
}

TEST(ConditionId, ParseAndKeyRoundTrip) {
  const auto id = ConditionId::parse("live/a/b/c/jpeg/3");
  EXPECT_EQ(id.dataset, "live");
  EXPECT_EQ(id.content, "a/b/c");
  EXPECT_EQ(id.distortion, "jpeg");
  EXPECT_EQ(id.level, 3);
  EXPECT_FALSE(id.is_reference);
  EXPECT_EQ(id.key(), "live/a/b/c/jpeg/3");
  EXPECT_TRUE(ConditionId::parse("x/img/reference/0").is_reference);
  EXPECT_THROW(ConditionId::parse("x/img/reference/2"), ParseError);
  EXPECT_THROW(ConditionId::parse("x/img/3"), ParseError);
  EXPECT_THROW(ConditionId::parse("x/img/blur/abc"), ParseError);
}

TEST(ComparisonGraph, RejectsSelfAndUnknown) {
  ComparisonGraph g(3);
  EXPECT_THROW(g.add(1, 1, 2), IntegrityError);
  EXPECT_THROW(g.add(0, 3, 2), IntegrityError);
  g.add(0, 1, 0);
  EXPECT_TRUE(g.empty());
  g.add(0, 1, 2);
  g.add(0, 1, 3);
  EXPECT_EQ(g.count(0, 1), 5u);
  EXPECT_EQ(g.count(1, 0), 0u);
}

TEST(ComparisonGraph, PairsAreOriented) {
  ComparisonGraph g(3);
  g.add(2, 0, 4);
  g.add(0, 2, 1);
  const auto p = g.pairs();
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].i, 0u);
  EXPECT_EQ(p[0].j, 2u);
  EXPECT_EQ(p[0].c_ij, 1u);
  EXPECT_EQ(p[0].c_ji, 4u);
}

TEST(EmpiricalProbability, Examples) {
  ComparisonGraph g(4);
  g.add(0, 1, 3);
  g.add(1, 0, 1);
  g.add(1, 2, 5);
  g.add(2, 3, 7);
  g.add(3, 2, 7);
  EXPECT_DOUBLE_EQ(empirical_probability(g, 0, 1), 0.75);
  EXPECT_DOUBLE_EQ(empirical_probability(g, 2, 1), 0.0);
  EXPECT_DOUBLE_EQ(empirical_probability(g, 2, 3), 0.5);
  EXPECT_THROW(empirical_probability(g, 0, 3), IntegrityError);
}

TEST(EmpiricalProbability, ComplementsToOne) {
  ComparisonGraph g(5);
  Rng rng(11, {});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      if (i != j) g.add(i, j, rng.below(9));
  for (const auto& p : g.pairs())
    EXPECT_DOUBLE_EQ(empirical_probability(g, p.i, p.j) + empirical_probability(g, p.j, p.i), 1.0);
}

TEST(ConnectedComponents, Examples) {
  ComparisonGraph two(2);
  two.add(0, 1, 1);
  EXPECT_EQ(connected_components(two).size(), 1u);

  ComparisonGraph g(4);  // {0,1} dataset A, {2,3} dataset B
  g.add(0, 1, 3);
  g.add(3, 2, 3);
  EXPECT_EQ(connected_components(g).size(), 2u);
  g.add(1, 2, 1);
  EXPECT_EQ(connected_components(g).size(), 1u);
}

TEST(ConnectedComponents, RatingsLinkTheirDataset) {
  ComparisonGraph g(4);
  std::map<std::string, RatingTable> ratings;
  ratings["B"].add(2, "o1", 3.0);
  ratings["B"].add(3, "o1", 4.0);
  const auto comps = connected_components(g, ratings);
  ASSERT_EQ(comps.size(), 3u);
  EXPECT_EQ(comps[2], (std::vector<std::size_t>{2, 3}));
}

TEST(ConnectedComponents, IsPartition) {
  ComparisonGraph g(30);
  Rng rng(5, {});
  for (int e = 0; e < 20; ++e) {
    const auto i = rng.below(30), j = rng.below(30);
    if (i != j) g.add(i, j, 1);
  }
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& comp : connected_components(g)) {
    total += comp.size();
    seen.insert(comp.begin(), comp.end());
  }
  EXPECT_EQ(total, 30u);
  EXPECT_EQ(seen.size(), 30u);
}

TEST(RatingTable, RejectsDuplicatesUnlessSessionDiffers) {
  RatingTable t;
  t.add(0, "alice", 3.0);
  EXPECT_THROW(t.add(0, "alice", 4.0), IntegrityError);
  t.add(0, "alice", 4.0, "s2");
  EXPECT_THROW(t.add(1, "bob", std::nan("")), IntegrityError);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.observers().size(), 1u);
}

TEST(LoadCollection, MinimalManifest) {
  const auto dir = scratch_dir("minimal");
  write(dir / "manifest.json", single_dataset_manifest());
  write(dir / "conditions.csv", "condition\ntoy/img/reference/0\ntoy/img/blur/1\n");
  write(dir / "comparisons.csv", "cond_a,cond_b,count_a_over_b\ntoy/img/reference/0,toy/img/blur/1,4\n");
  const auto c = load_collection(dir / "manifest.json");
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.graph.count(0, 1), 4u);
  EXPECT_EQ(c.references(), (std::vector<std::size_t>{0}));
}

TEST(LoadCollection, UnknownConditionIsIntegrityError) {
  const auto dir = scratch_dir("unknown");
  write(dir / "manifest.json", single_dataset_manifest());
  write(dir / "conditions.csv", "condition\ntoy/img/reference/0\ntoy/img/blur/1\n");
  write(dir / "comparisons.csv", "cond_a,cond_b,count_a_over_b\ntoy/img/reference/0,toy/img/noise/1,4\n");
  EXPECT_THROW(load_collection(dir / "manifest.json"), IntegrityError);
}

TEST(LoadCollection, DuplicateAndNegativeAreIntegrityErrors) {
  const auto dir = scratch_dir("dupneg");
  write(dir / "manifest.json", single_dataset_manifest());
  write(dir / "conditions.csv", "condition\ntoy/img/reference/0\ntoy/img/reference/0\n");
  write(dir / "comparisons.csv", "cond_a,cond_b,count_a_over_b\n");
  EXPECT_THROW(load_collection(dir / "manifest.json"), IntegrityError);
  write(dir / "conditions.csv", "condition\ntoy/img/reference/0\ntoy/img/blur/1\n");
  write(dir / "comparisons.csv", "cond_a,cond_b,count_a_over_b\ntoy/img/reference/0,toy/img/blur/1,-1\n");
  EXPECT_THROW(load_collection(dir / "manifest.json"), IntegrityError);
}

TEST(LoadCollection, MalformedFilesAreParseErrors) {
  const auto dir = scratch_dir("malformed");
  write(dir / "manifest.json", "{ not json");
  EXPECT_THROW(load_collection(dir / "manifest.json"), ParseError);
  EXPECT_THROW(load_collection(dir / "missing.json"), ParseError);
  write(dir / "manifest.json", single_dataset_manifest());
  write(dir / "conditions.csv", "condition\ntoy/img/reference/0\n");
  write(dir / "comparisons.csv", "cond_a,cond_b,count_a_over_b\ntoy/img/reference/0,toy/img/reference/0,x\n");
  EXPECT_THROW(load_collection(dir / "manifest.json"), ParseError);
}

TEST(LoadCollection, UnknownFieldsWarn) {
  const auto dir = scratch_dir("unknownfield");
  write(dir / "manifest.json", R"({"datasets": [{"name": "toy", "colour": "red"}], "version": 2,
                                   "conditions": ["toy/img/reference/0"]})");
  std::vector<std::string> warnings;
  ScopedWarningSink sink([&](const std::string& m) { warnings.push_back(m); });
  const auto c = load_collection(dir / "manifest.json");
  EXPECT_EQ(c.size(), 1u);
  EXPECT_EQ(warnings.size(), 2u);
}

TEST(LoadCollection, RatedDatasetNeedsReference) {
  const auto dir = scratch_dir("noref");
  write(dir / "manifest.json", R"({"datasets": [{"name": "r", "experiment": "rating", "ratings": "r.csv"}],
                                   "conditions": ["r/img/blur/1", "r/img/blur/2"]})");
  write(dir / "r.csv", "condition,observer,score\nr/img/blur/1,o,1\nr/img/blur/2,o,2\n");
  EXPECT_THROW(load_collection(dir / "manifest.json"), IntegrityError);
}

TEST(LoadCollection, FourDatasetSizes) {
  const auto dir = scratch_dir("four");
  const std::vector<std::pair<std::string, int>> sizes{
      {"LIVE", 779}, {"TID2013", 3000}, {"Narwaria", 140}, {"Korshunov", 240}};
  std::string manifest = R"({"datasets": [)";
  std::string conds = "condition\n";
  for (std::size_t d = 0; d < sizes.size(); ++d) {
    const auto& [name, n] = sizes[d];
    manifest += fmt::format(R"({}{{"name": "{}", "experiment": "{}"}})", d ? "," : "", name,
                            d < 2 ? "rating" : "pwc");
    for (int k = 0; k < n; ++k)
      conds += k == 0 ? fmt::format("{}/img0/reference/0\n", name) : fmt::format("{}/img{}/dist/{}\n", name, k % 25, k);
  }
  manifest += R"(], "conditions": "conditions.csv", "comparisons": "comparisons.csv"})";
  write(dir / "manifest.json", manifest);
  write(dir / "conditions.csv", conds);
  write(dir / "comparisons.csv", "cond_a,cond_b,count_a_over_b\nLIVE/img0/reference/0,TID2013/img0/reference/0,3\n");
  const auto c = load_collection(dir / "manifest.json");
  EXPECT_EQ(c.size(), 4159u);
  EXPECT_EQ(c.conditions_of("TID2013").size(), 3000u);
  EXPECT_EQ(c.datasets.size(), 4u);
}

TEST(WriteCollection, RoundTripIsStable) {
  DatasetCollection c;
  c.add_dataset({"A", ExperimentType::kPairwise, "SDR", {}});
  c.add_dataset({"B", ExperimentType::kRating, "HDR", {1000, 0.01, 2.2}});
  c.add_condition(ConditionId::reference("A", "img"));
  c.add_condition(ConditionId::make("A", "img", "blur", 1));
  c.add_condition(ConditionId::reference("B", "img"));
  c.add_condition(ConditionId::make("B", "img", "noise", 2));
  c.graph.add(0, 1, 7);
  c.graph.add(1, 0, 2);
  c.graph.add(1, 2, 1);
  c.ratings["B"].add(2, "o1", 0.1);
  c.ratings["B"].add(3, "o1", 1.0 / 3.0);
  const auto d1 = scratch_dir("rt1"), d2 = scratch_dir("rt2");
  write_collection(c, d1);
  const auto back = load_collection(d1 / "manifest.json");
  write_collection(back, d2);
  for (const auto* f : {"manifest.json", "conditions.csv", "comparisons.csv", "ratings_B.csv"}) {
    std::ifstream a(d1 / f), b(d2 / f);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_EQ(sa, sb) << f;
  }
  EXPECT_EQ(back.graph.entries(), c.graph.entries());
  EXPECT_EQ(back.ratings.at("B").records()[1].score, 1.0 / 3.0);
  EXPECT_EQ(back.datasets[1].display.L_peak, 1000);
}

}  // namespace
}  // namespace jodscale
