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

// Domain types for subjective quality data: conditions, the sparse
// pairwise-comparison count matrix, per-dataset rating tables, and the
// collection that ties them to a dataset manifest.

#ifndef JODSCALE_MODEL_HPP_
#define JODSCALE_MODEL_HPP_

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "jodscale/csv.hpp"
#include "jodscale/error.hpp"

namespace jodscale {

inline constexpr std::string_view kReferenceDistortion = "reference";

/// One compared item: a content at one distortion type and level within one
/// dataset. References use distortion "reference" and level 0.
struct ConditionId {
  std::string dataset;
  std::string content;
  std::string distortion;
  int level = 0;
  bool is_reference = false;

  static ConditionId make(std::string dataset, std::string content, std::string distortion,
                          int level) {
    const bool ref = distortion == kReferenceDistortion;
    return {std::move(dataset), std::move(content), std::move(distortion), ref ? 0 : level, ref};
  }

  static ConditionId reference(std::string dataset, std::string content) {
    return make(std::move(dataset), std::move(content), std::string(kReferenceDistortion), 0);
  }

  /// Parses `dataset/content/distortion/level`. The content part may itself
  /// contain '/'.
  static ConditionId parse(std::string_view text) {
    const auto first = text.find('/');
    const auto last = text.rfind('/');
    const auto mid = last == std::string_view::npos || last == 0 ? std::string_view::npos
                                                                 : text.rfind('/', last - 1);
    if (first == std::string_view::npos || mid == std::string_view::npos || mid <= first)
      throw ParseError(fmt::format("condition id '{}' is not dataset/content/distortion/level", text));
    std::string level_text(text.substr(last + 1));
    const auto level = csv::to_int(level_text, "condition level");
    auto id = make(std::string(text.substr(0, first)),
                   std::string(text.substr(first + 1, mid - first - 1)),
                   std::string(text.substr(mid + 1, last - mid - 1)), static_cast<int>(level));
    if (id.dataset.empty() || id.content.empty() || id.distortion.empty())
      throw ParseError(fmt::format("condition id '{}' has an empty component", text));
    if (id.is_reference && level != 0)
      throw ParseError(fmt::format("reference condition '{}' must have level 0", text));
    return id;
  }

  std::string key() const { return fmt::format("{}/{}/{}/{}", dataset, content, distortion, level); }

  friend bool operator==(const ConditionId& a, const ConditionId& b) {
    return std::tie(a.dataset, a.content, a.distortion, a.level) ==
           std::tie(b.dataset, b.content, b.distortion, b.level);
  }
  friend auto operator<=>(const ConditionId& a, const ConditionId& b) {
    return std::tie(a.dataset, a.content, a.distortion, a.level) <=>
           std::tie(b.dataset, b.content, b.distortion, b.level);
  }
};

/// Counts of one measured unordered pair, oriented with i < j.
struct PairCounts {
  std::size_t i = 0;
  std::size_t j = 0;
  std::uint64_t c_ij = 0;  // times i was chosen over j
  std::uint64_t c_ji = 0;
  std::uint64_t total() const { return c_ij + c_ji; }
};

/// Sparse count matrix C: entry (i, j) is the number of times condition i
/// was chosen over condition j. Absent entries are zero.
class ComparisonGraph {
 public:
  using Entries = std::map<std::pair<std::size_t, std::size_t>, std::uint64_t>;

  ComparisonGraph() = default;
  explicit ComparisonGraph(std::size_t n) : n_(n) {}

  std::size_t size() const { return n_; }
  void resize(std::size_t n) {
    if (n < n_ && !entries_.empty() && std::prev(entries_.end())->first.first >= n)
      throw std::invalid_argument("ComparisonGraph::resize would drop entries");
    n_ = n;
  }

  /// Adds `count` wins of `winner` over `loser`.
  void add(std::size_t winner, std::size_t loser, std::uint64_t count) {
    if (winner >= n_ || loser >= n_)
      throw IntegrityError(fmt::format("comparison ({}, {}) references unknown condition", winner, loser));
    if (winner == loser)
      throw IntegrityError(fmt::format("self-comparison of condition {}", winner));
    if (count == 0) return;
    entries_[{winner, loser}] += count;
  }

  std::uint64_t count(std::size_t i, std::size_t j) const {
    const auto it = entries_.find({i, j});
    return it == entries_.end() ? 0 : it->second;
  }

  const Entries& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  std::uint64_t total_comparisons() const {
    std::uint64_t t = 0;
    for (const auto& [k, v] : entries_) t += v;
    return t;
  }

  /// Measured unordered pairs (c_ij + c_ji > 0), sorted by (i, j), i < j.
  std::vector<PairCounts> pairs() const {
    std::map<std::pair<std::size_t, std::size_t>, PairCounts> acc;
    for (const auto& [k, v] : entries_) {
      const auto [a, b] = k;
      const auto key = std::minmax(a, b);
      auto& p = acc[{key.first, key.second}];
      p.i = key.first;
      p.j = key.second;
      (a < b ? p.c_ij : p.c_ji) += v;
    }
    std::vector<PairCounts> out;
    out.reserve(acc.size());
    for (auto& [k, p] : acc) out.push_back(p);
    return out;
  }

 private:
  std::size_t n_ = 0;
  Entries entries_;
};

struct RatingRecord {
  std::size_t condition = 0;
  std::size_t observer = 0;
  double score = 0.0;
  std::string session;
};

/// Individual rating measurements m_ik of one dataset. Observer names are
/// interned; `records[r].observer` indexes `observers`.
class RatingTable {
 public:
  void add(std::size_t condition, const std::string& observer, double score,
           const std::string& session = {}) {
    if (!std::isfinite(score))
      throw IntegrityError(fmt::format("non-finite rating for condition {}", condition));
    if (const auto found = observer_index_.find(observer);
        found != observer_index_.end() && seen_.contains({condition, found->second, session}))
      throw IntegrityError(fmt::format("duplicate rating of condition {} by observer '{}'", condition, observer));
    auto [it, inserted] = observer_index_.try_emplace(observer, observers_.size());
    if (inserted) observers_.push_back(observer);
    add(condition, it->second, score, session);
  }

  void add(std::size_t condition, std::size_t observer, double score,
           const std::string& session = {}) {
    if (!std::isfinite(score))
      throw IntegrityError(fmt::format("non-finite rating for condition {}", condition));
    if (observer >= observers_.size()) {
      for (std::size_t k = observers_.size(); k <= observer; ++k) {
        observers_.push_back(std::to_string(k));
        observer_index_.emplace(observers_.back(), k);
      }
    }
    if (!seen_.insert({condition, observer, session}).second)
      throw IntegrityError(fmt::format("duplicate rating of condition {} by observer '{}'{}",
                                       condition, observers_[observer],
                                       session.empty() ? "" : " in session '" + session + "'"));
    records_.push_back({condition, observer, score, session});
  }

  const std::vector<RatingRecord>& records() const { return records_; }
  const std::vector<std::string>& observers() const { return observers_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

 private:
  std::vector<RatingRecord> records_;
  std::vector<std::string> observers_;
  std::map<std::string, std::size_t> observer_index_;
  std::set<std::tuple<std::size_t, std::size_t, std::string>> seen_;
};

enum class ExperimentType { kPairwise, kRating };

inline std::string_view to_string(ExperimentType e) {
  return e == ExperimentType::kPairwise ? "pwc" : "rating";
}

struct DisplaySpec {
  double L_peak = 100.0;
  double L_black = 0.5;
  double gamma = 2.2;
};

struct DatasetInfo {
  std::string name;
  ExperimentType experiment = ExperimentType::kPairwise;
  std::string dynamic_range = "SDR";
  DisplaySpec display;
};

/// Conditions, comparisons and ratings of several datasets that are to be
/// scaled jointly. Treat as immutable once validated.
class DatasetCollection {
 public:
  std::vector<ConditionId> conditions;
  ComparisonGraph graph;
  std::map<std::string, RatingTable> ratings;
  std::vector<DatasetInfo> datasets;

  std::size_t size() const { return conditions.size(); }

  void add_dataset(DatasetInfo info) {
    if (find_dataset(info.name))
      throw IntegrityError("duplicate dataset '" + info.name + "'");
    datasets.push_back(std::move(info));
  }

  std::size_t add_condition(ConditionId id) {
    auto key = id.key();
    if (index_.contains(key)) throw IntegrityError("duplicate condition '" + key + "'");
    index_.emplace(std::move(key), conditions.size());
    conditions.push_back(std::move(id));
    graph.resize(conditions.size());
    return conditions.size() - 1;
  }

  std::optional<std::size_t> find(const std::string& key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(const std::string& key) const {
    if (auto i = find(key)) return *i;
    throw IntegrityError("unknown condition '" + key + "'");
  }

  const DatasetInfo* find_dataset(std::string_view name) const {
    for (const auto& d : datasets)
      if (d.name == name) return &d;
    return nullptr;
  }

  std::vector<std::size_t> references() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < conditions.size(); ++i)
      if (conditions[i].is_reference) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> conditions_of(std::string_view dataset) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < conditions.size(); ++i)
      if (conditions[i].dataset == dataset) out.push_back(i);
    return out;
  }

  /// Checks every collection invariant; throws IntegrityError on the first
  /// violation.
  void validate() const {
    if (graph.size() != conditions.size())
      throw IntegrityError("comparison graph size does not match condition count");
    for (const auto& c : conditions)
      if (!find_dataset(c.dataset))
        throw IntegrityError("condition '" + c.key() + "' belongs to dataset '" + c.dataset +
                             "' which is not in the manifest");
    for (const auto& [name, table] : ratings) {
      if (!find_dataset(name)) throw IntegrityError("ratings for unknown dataset '" + name + "'");
      bool has_reference = false;
      for (const auto& r : table.records()) {
        if (r.condition >= conditions.size())
          throw IntegrityError(fmt::format("rating references unknown condition {}", r.condition));
        if (conditions[r.condition].dataset != name)
          throw IntegrityError("rating table of '" + name + "' contains condition '" +
                               conditions[r.condition].key() + "' of another dataset");
      }
      for (std::size_t i : conditions_of(name)) has_reference |= conditions[i].is_reference;
      if (!table.empty() && !has_reference)
        throw IntegrityError("dataset '" + name + "' has ratings but no reference condition");
    }
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

/// p̂_ij = c_ij / (c_ij + c_ji). Throws IntegrityError for unmeasured pairs.
inline double empirical_probability(const ComparisonGraph& graph, std::size_t i, std::size_t j) {
  if (i == j) throw std::invalid_argument("empirical_probability: i == j");
  const auto cij = graph.count(i, j);
  const auto cji = graph.count(j, i);
  if (cij + cji == 0)
    throw IntegrityError(fmt::format("pair ({}, {}) has no comparisons", i, j));
  return static_cast<double>(cij) / static_cast<double>(cij + cji);
}

namespace detail {
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};
}  // namespace detail

/// Undirected connectivity of the comparison graph, where all rated
/// conditions of one dataset are also linked to each other. Components are
/// sorted ascending and ordered by their smallest member.
inline std::vector<std::vector<std::size_t>> connected_components(
    const ComparisonGraph& graph, const std::map<std::string, RatingTable>& ratings = {}) {
  detail::DisjointSets sets(graph.size());
  for (const auto& [k, v] : graph.entries())
    if (v > 0) sets.unite(k.first, k.second);
  for (const auto& [name, table] : ratings) {
    const auto& recs = table.records();
    for (std::size_t r = 1; r < recs.size(); ++r) sets.unite(recs[0].condition, recs[r].condition);
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < graph.size(); ++i) groups[sets.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

inline std::vector<std::vector<std::size_t>> connected_components(const DatasetCollection& c) {
  return connected_components(c.graph, c.ratings);
}

// ---------------------------------------------------------------------------
// Manifest I/O

namespace detail {

inline void add_condition_row(DatasetCollection& c, const std::string& key, const std::string& where) {
  ConditionId id;
  try {
    id = ConditionId::parse(key);
  } catch (const ParseError& e) {
    throw ParseError(where + ": " + e.what());
  }
  c.add_condition(std::move(id));
}

inline void warn_unknown_fields(const nlohmann::json& obj, std::initializer_list<std::string_view> known,
                                std::string_view where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      warn(fmt::format("{}: ignoring unknown field '{}'", where, it.key()));
  }
}

inline void read_comparisons(DatasetCollection& c, const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  const auto ca = t.column("cond_a"), cb = t.column("cond_b"), cn = t.column("count_a_over_b");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = fmt::format("{}:{}", t.source, t.line_numbers[r]);
    const auto count = csv::to_int(row[cn], "count_a_over_b");
    if (count < 0) throw IntegrityError(where + ": negative comparison count");
    const auto a = c.find(row[ca]);
    const auto b = c.find(row[cb]);
    if (!a) throw IntegrityError(where + ": unknown condition '" + row[ca] + "'");
    if (!b) throw IntegrityError(where + ": unknown condition '" + row[cb] + "'");
    try {
      c.graph.add(*a, *b, static_cast<std::uint64_t>(count));
    } catch (const IntegrityError& e) {
      throw IntegrityError(where + ": " + e.what());
    }
  }
}

inline void read_ratings(DatasetCollection& c, const std::string& dataset,
                         const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  const auto cc = t.column("condition"), co = t.column("observer"), cs = t.column("score");
  const std::optional<std::size_t> csess =
      t.has_column("session") ? std::optional(t.column("session")) : std::nullopt;
  auto& table = c.ratings[dataset];
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = fmt::format("{}:{}", t.source, t.line_numbers[r]);
    const auto idx = c.find(row[cc]);
    if (!idx) throw IntegrityError(where + ": unknown condition '" + row[cc] + "'");
    if (c.conditions[*idx].dataset != dataset)
      throw IntegrityError(where + ": condition '" + row[cc] + "' is not part of dataset '" + dataset + "'");
    try {
      table.add(*idx, row[co], csv::to_double(row[cs], "score"), csess ? row[*csess] : std::string{});
    } catch (const IntegrityError& e) {
      throw IntegrityError(where + ": " + e.what());
    }
  }
}

}  // namespace detail

/// Reads a JSON manifest and the CSV files it references (paths relative to
/// the manifest). See README for the schema.
inline DatasetCollection load_collection(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ParseError("cannot open manifest '" + manifest_path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  const auto base = manifest_path.parent_path();
  const auto where = manifest_path.string();
  DatasetCollection c;
  std::vector<std::pair<std::string, std::filesystem::path>> rating_files;
  try {
    if (!j.is_object()) throw ParseError(where + ": manifest must be a JSON object");
    detail::warn_unknown_fields(j, {"datasets", "conditions", "comparisons", "ratings"}, where);
    if (!j.contains("datasets") || !j["datasets"].is_array())
      throw ParseError(where + ": missing 'datasets' array");
    for (const auto& d : j["datasets"]) {
      detail::warn_unknown_fields(d, {"name", "experiment", "dynamic_range", "display", "ratings"},
                                  where + " dataset");
      DatasetInfo info;
      info.name = d.at("name").get<std::string>();
      if (info.name.empty() || info.name.find('/') != std::string::npos)
        throw ParseError(where + ": invalid dataset name '" + info.name + "'");
      const auto exp = d.value("experiment", std::string("pwc"));
      if (exp == "pwc") info.experiment = ExperimentType::kPairwise;
      else if (exp == "rating") info.experiment = ExperimentType::kRating;
      else throw ParseError(where + ": unknown experiment type '" + exp + "'");
      info.dynamic_range = d.value("dynamic_range", std::string("SDR"));
      if (d.contains("display")) {
        const auto& disp = d["display"];
        detail::warn_unknown_fields(disp, {"L_peak", "L_black", "gamma"}, where + " display");
        info.display.L_peak = disp.value("L_peak", info.display.L_peak);
        info.display.L_black = disp.value("L_black", info.display.L_black);
        info.display.gamma = disp.value("gamma", info.display.gamma);
      }
      if (d.contains("ratings")) rating_files.emplace_back(info.name, base / d["ratings"].get<std::string>());
      c.add_dataset(std::move(info));
    }
    if (j.contains("ratings")) {
      for (auto it = j["ratings"].begin(); it != j["ratings"].end(); ++it)
        rating_files.emplace_back(it.key(), base / it.value().get<std::string>());
    }
    if (!j.contains("conditions")) throw ParseError(where + ": missing 'conditions'");
    const auto& conds = j["conditions"];
    if (conds.is_array()) {
      for (const auto& k : conds) detail::add_condition_row(c, k.get<std::string>(), where);
    } else {
      const auto t = csv::read_file(base / conds.get<std::string>());
      const auto col = t.column("condition");
      for (std::size_t r = 0; r < t.rows.size(); ++r)
        detail::add_condition_row(c, t.rows[r][col], fmt::format("{}:{}", t.source, t.line_numbers[r]));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
  for (const auto& cond : c.conditions)
    if (!c.find_dataset(cond.dataset))
      throw IntegrityError("condition '" + cond.key() + "' belongs to unknown dataset '" + cond.dataset + "'");
  if (j.contains("comparisons")) detail::read_comparisons(c, base / j["comparisons"].get<std::string>());
  for (const auto& [name, path] : rating_files) {
    if (!c.find_dataset(name)) throw IntegrityError("ratings given for unknown dataset '" + name + "'");
    detail::read_ratings(c, name, path);
  }
  c.validate();
  return c;
}

/// Writes `manifest.json`, `conditions.csv`, `comparisons.csv` and one
/// `ratings_<dataset>.csv` per rated dataset into `dir`. The output is a
/// pure function of the collection.
inline void write_collection(const DatasetCollection& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json m;
  m["datasets"] = nlohmann::ordered_json::array();
  for (const auto& d : c.datasets) {
    nlohmann::ordered_json e;
    e["name"] = d.name;
    e["experiment"] = std::string(to_string(d.experiment));
    e["dynamic_range"] = d.dynamic_range;
    e["display"] = {{"L_peak", d.display.L_peak}, {"L_black", d.display.L_black}, {"gamma", d.display.gamma}};
    if (c.ratings.contains(d.name)) e["ratings"] = "ratings_" + d.name + ".csv";
    m["datasets"].push_back(std::move(e));
  }
  m["conditions"] = "conditions.csv";
  m["comparisons"] = "comparisons.csv";
  csv::write_text(dir / "manifest.json", m.dump(2) + "\n");

  std::string conds = "condition\n";
  for (const auto& k : c.conditions) conds += k.key() + "\n";
  csv::write_text(dir / "conditions.csv", conds);

  std::string cmp = "cond_a,cond_b,count_a_over_b\n";
  for (const auto& [k, v] : c.graph.entries())
    cmp += fmt::format("{},{},{}\n", c.conditions[k.first].key(), c.conditions[k.second].key(), v);
  csv::write_text(dir / "comparisons.csv", cmp);

  for (const auto& [name, table] : c.ratings) {
    bool sessions = false;
    for (const auto& r : table.records()) sessions |= !r.session.empty();
    std::string out = sessions ? "condition,observer,score,session\n" : "condition,observer,score\n";
    for (const auto& r : table.records()) {
      out += fmt::format("{},{},{}", c.conditions[r.condition].key(), table.observers()[r.observer],
                         csv::num(r.score));
      out += sessions ? "," + r.session + "\n" : "\n";
    }
    csv::write_text(dir / ("ratings_" + name + ".csv"), out);
  }
}

}  // namespace jodscale

#endif  // JODSCALE_MODEL_HPP_
