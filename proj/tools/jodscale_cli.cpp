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

// jodscale command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 bad or inconsistent input data,
// 3 numerical failure (including non-convergence under --strict).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "jodscale/jodscale.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace jodscale;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool strict = false;
  std::string out = "jodscale_out";
};

void write_json(const fs::path& path, const json& j) { csv::write_text(path, j.dump(2) + "\n"); }

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// `condition,<column>` rows in file order; duplicate conditions are an error.
std::vector<std::pair<std::string, double>> read_keyed(const fs::path& path, const std::string& column) {
  const auto t = csv::read_file(path);
  const auto ck = t.column("condition"), cv = t.column(column);
  std::vector<std::pair<std::string, double>> out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& key = t.rows[r][ck];
    if (!seen.insert(key).second)
      throw IntegrityError(fmt::format("{}:{}: duplicate condition '{}'", t.source, t.line_numbers[r], key));
    out.emplace_back(key, csv::to_double(t.rows[r][cv], column));
  }
  if (out.empty()) throw IntegrityError(t.source + ": no rows");
  return out;
}

std::map<std::string, double> as_map(const std::vector<std::pair<std::string, double>>& rows) {
  return {rows.begin(), rows.end()};
}

// Metric scores aligned with the scale rows. Every scaled condition needs a score.
struct Joined {
  std::vector<std::string> keys;
  std::vector<double> score, jod;
};

Joined join_scores(const fs::path& scores_path, const fs::path& scale_path) {
  const auto scores = as_map(read_keyed(scores_path, "score"));
  Joined j;
  for (const auto& [key, q] : read_keyed(scale_path, "jod")) {
    const auto it = scores.find(key);
    if (it == scores.end()) throw IntegrityError(fmt::format("no metric score for scaled condition '{}'", key));
    j.keys.push_back(key);
    j.score.push_back(it->second);
    j.jod.push_back(q);
  }
  if (scores.size() > j.keys.size())
    warn(fmt::format("{} scored condition(s) are not in the scale and are ignored", scores.size() - j.keys.size()));
  return j;
}

// Luminance values from a CSV (`luminance` column, or `value` pixels passed
// through the display model) or a raw native float32 stream.
struct LuminanceInput {
  std::string path;
  bool pixels = false;
  bool raw = false;
  DisplayModel display;
};

std::vector<double> read_luminance(const LuminanceInput& in, bool strict, std::vector<double>* source = nullptr) {
  std::vector<double> v;
  if (in.raw) {
    std::ifstream f(in.path, std::ios::binary);
    if (!f) throw ParseError("cannot open '" + in.path + "'");
    float x;
    while (f.read(reinterpret_cast<char*>(&x), sizeof x)) v.push_back(x);
    if (f.gcount() != 0) throw ParseError(in.path + ": length is not a multiple of 4 bytes");
  } else {
    const auto t = csv::read_file(in.path);
    const auto col = t.column(in.pixels ? "value" : "luminance");
    for (const auto& row : t.rows) v.push_back(csv::to_double(row[col], in.pixels ? "value" : "luminance"));
  }
  if (source) *source = v;
  if (in.pixels) v = display_forward(v, in.display, strict);
  return v;
}

void add_display_flags(CLI::App* cmd, LuminanceInput& in) {
  cmd->add_option("--input", in.path, "CSV with a 'luminance' (or 'value') column, or a float32 stream")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_flag("--pixels", in.pixels, "Input holds gamma-encoded values in [0,1]; apply the display model");
  cmd->add_flag("--raw", in.raw, "Input (and output) are raw native-endian float32 streams");
  cmd->add_option("--l-peak", in.display.L_peak, "Display peak luminance (cd/m^2)")->capture_default_str();
  cmd->add_option("--l-black", in.display.L_black, "Display black level (cd/m^2)")->capture_default_str();
  cmd->add_option("--gamma", in.display.gamma, "Display gamma")->capture_default_str();
}

json display_json(const LuminanceInput& in) {
  return {{"input", in.path}, {"pixels", in.pixels}, {"raw", in.raw},
          {"display", {{"L_peak", in.display.L_peak}, {"L_black", in.display.L_black}, {"gamma", in.display.gamma}}}};
}

// ---------------------------------------------------------------------------

struct ScaleArgs {
  std::string manifest;
  bool no_prior = false;
  bool per_component = false;
  double tol = 1e-6;
  int max_iter = 2000;
  int bootstrap = 0;
  double level = 0.95;
};

ScaleOptions scale_options(double tol, int max_iter, bool prior) {
  ScaleOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  o.prior_enabled = prior;
  return o;
}

void check_converged(bool converged, const Globals& g, const std::string& what) {
  if (converged) return;
  if (g.strict) throw NumericalError(what + " did not converge");
  warn(what + " did not converge");
}

int run_scale(const ScaleArgs& a, const Globals& g) {
  const auto c = load_collection(a.manifest);
  auto opt = scale_options(a.tol, a.max_iter, !a.no_prior);
  opt.per_component = a.per_component;
  const auto s = scale(c, opt);
  check_converged(s.converged, g, "scaling");

  std::optional<BootstrapResult> ci;
  if (a.bootstrap > 0) {
    BootstrapOptions b;
    b.n_boot = a.bootstrap;
    b.seed = g.seed;
    b.level = a.level;
    b.threads = g.threads;
    b.scale = opt;
    ci = bootstrap_ci(c, b);
  }
  const fs::path out = g.out;
  std::string text = "condition,jod,ci_low,ci_high\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    text += c.conditions[i].key() + "," + csv::num(s.q[i]);
    text += ci ? "," + csv::num(ci->low[i]) + "," + csv::num(ci->high[i]) + "\n" : ",,\n";
  }
  csv::write_text(out / "scale.csv", text);

  json links = json::object();
  for (const auto& [name, l] : s.links) links[name] = {{"a", l.a}, {"b", l.b}, {"c", l.c}};
  write_json(out / "links.json", links);

  json report = {{"log_posterior", s.log_posterior}, {"iterations", s.iterations}, {"converged", s.converged},
                 {"grad_norm", s.grad_norm}, {"components", s.components}};
  if (ci) report["bootstrap"] = {{"replicates", ci->replicates}, {"failed", ci->failed}, {"level", a.level}};
  write_json(out / "report.json", report);
  return 0;
}

// ---------------------------------------------------------------------------

struct SimArgs {
  int conditions = 50;
  int datasets = 2;
  int rating_datasets = -1;
  std::uint64_t trials = 30;
  int observers = 15;
  int density = 10;
  double within = 1.0;
  double tol = 1e-6;
  int max_iter = 2000;
  bool no_prior = false;
};

RecoveryConfig recovery_config(const SimArgs& a, const Globals& g) {
  RecoveryConfig cfg;
  cfg.n_conditions = a.conditions;
  cfg.n_datasets = a.datasets;
  cfg.rating_datasets = a.rating_datasets;
  cfg.trials_per_pair = a.trials;
  cfg.observers = a.observers;
  cfg.graph_density = a.density;
  cfg.within_density = a.within;
  cfg.seed = g.seed;
  cfg.scale = scale_options(a.tol, a.max_iter, !a.no_prior);
  return cfg;
}

void add_sim_flags(CLI::App* cmd, SimArgs& a) {
  cmd->add_option("--conditions", a.conditions, "Number of conditions")->capture_default_str();
  cmd->add_option("--datasets", a.datasets, "Number of datasets")->capture_default_str();
  cmd->add_option("--rating-datasets", a.rating_datasets, "Datasets measured by rating (-1: all but the first)")
      ->capture_default_str();
  cmd->add_option("--trials", a.trials, "Trials per measured pair")->capture_default_str();
  cmd->add_option("--observers", a.observers, "Raters per rating dataset")->capture_default_str();
  cmd->add_option("--density", a.density, "Extra cross-dataset pairs")->capture_default_str();
  cmd->add_option("--within", a.within, "Fraction of within-dataset pairs measured")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

json sim_json(const SimArgs& a) {
  return {{"conditions", a.conditions}, {"datasets", a.datasets}, {"rating_datasets", a.rating_datasets},
          {"trials", a.trials},         {"observers", a.observers}, {"density", a.density},
          {"within", a.within}};
}

int run_simulate(const SimArgs& a, const Globals& g) {
  const auto d = make_synthetic_design(recovery_config(a, g));
  const fs::path out = g.out;
  write_collection(d.collection, out);
  std::string truth = "condition,q_true\n";
  for (std::size_t i = 0; i < d.collection.size(); ++i)
    truth += d.collection.conditions[i].key() + "," + csv::num(d.truth.q_true[i]) + "\n";
  csv::write_text(out / "truth.csv", truth);
  json links = json::object();
  for (const auto& [name, l] : d.truth.links_true) links[name] = {{"a", l.a}, {"b", l.b}, {"c", l.c}};
  write_json(out / "truth_links.json", links);
  return 0;
}

int run_recover(const SimArgs& a, const Globals& g) {
  const auto r = recovery_experiment(recovery_config(a, g));
  check_converged(r.converged, g, "scaling");
  json links = json::object();
  for (const auto& [name, e] : r.link_errors) links[name] = {{"a_rel", e.a_rel}, {"b_abs", e.b_abs}, {"c_rel", e.c_rel}};
  const json report = {{"srocc", r.srocc},       {"rmse", r.rmse},          {"link_errors", links},
                       {"converged", r.converged}, {"iterations", r.iterations}};
  write_json(fs::path(g.out) / "report.json", report);
  std::cout << report.dump(2) << '\n';
  std::cerr << fmt::format("runtime: {:.1f} ms\n", r.runtime_ms);
  return 0;
}

// ---------------------------------------------------------------------------

struct MetricArgs {
  std::string scores, scale, manifest;
  std::vector<double> thresholds{0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
};

LogisticFit fit_checked(const Joined& j, const Globals& g) {
  auto fit = fit_logistic(j.score, j.jod);
  check_converged(fit.converged, g, "logistic fit");
  return fit;
}

json metrics_json(const std::vector<double>& pred, const std::vector<double>& jod) {
  const auto m = correlation_metrics(pred, jod);
  return {{"srocc", nullable(m.srocc)}, {"plcc", nullable(m.plcc)}, {"rmse", m.rmse}};
}

int run_fit_logistic(const MetricArgs& a, const Globals& g) {
  const auto j = join_scores(a.scores, a.scale);
  const auto fit = fit_checked(j, g);
  std::vector<double> pred;
  std::string text = "condition,score,jod_pred\n";
  for (std::size_t i = 0; i < j.keys.size(); ++i) {
    pred.push_back(eval_logistic(fit.params, j.score[i]));
    text += j.keys[i] + "," + csv::num(j.score[i]) + "," + csv::num(pred.back()) + "\n";
  }
  const fs::path out = g.out;
  csv::write_text(out / "predictions.csv", text);
  const auto& p = fit.params;
  write_json(out / "logistic.json", {{"a1", p.a1}, {"a2", p.a2}, {"a3", p.a3}, {"a4", p.a4}, {"a5", p.a5},
                                     {"rmse", fit.rmse}, {"converged", fit.converged},
                                     {"iterations", fit.iterations}});
  write_json(out / "report.json", metrics_json(pred, j.jod));
  return 0;
}

int run_validate(const MetricArgs& a, const Globals& g) {
  const auto j = join_scores(a.scores, a.scale);
  const auto fit = fit_checked(j, g);
  std::vector<double> pred;
  for (double s : j.score) pred.push_back(eval_logistic(fit.params, s));
  auto report = metrics_json(pred, j.jod);

  json curve = json::array();
  if (!a.manifest.empty()) {
    const auto c = load_collection(a.manifest);
    std::map<std::string, double> by_key;
    for (std::size_t i = 0; i < j.keys.size(); ++i) by_key[j.keys[i]] = pred[i];
    std::vector<double> aligned;
    for (const auto& id : c.conditions) {
      const auto it = by_key.find(id.key());
      if (it == by_key.end()) throw IntegrityError("no prediction for manifest condition '" + id.key() + "'");
      aligned.push_back(it->second);
    }
    for (double t : a.thresholds) {
      try {
        const auto acc = pairwise_accuracy(aligned, c.graph, t);
        curve.push_back({{"threshold", t}, {"accuracy", acc.accuracy}, {"pairs", acc.considered}});
      } catch (const NumericalError& e) {
        if (g.strict) throw;
        warn(e.what());
        curve.push_back({{"threshold", t}, {"accuracy", nullptr}, {"pairs", 0}});
      }
    }
  }
  report["accuracy_curve"] = curve;
  write_json(fs::path(g.out) / "report.json", report);
  return 0;
}

// ---------------------------------------------------------------------------

struct PuArgs {
  LuminanceInput in;
  std::string lut, threshold;
  int knots = 4096;
  bool log_encode = false;
  bool write_lut = false;
};

int run_pu_encode(const PuArgs& a, const Globals& g) {
  std::vector<double> source;
  const auto L = read_luminance(a.in, g.strict, &source);
  std::vector<double> encoded;
  if (a.log_encode) {
    for (double v : L) encoded.push_back(log_encode(v));
  } else {
    PuLutOptions lo;
    lo.n_knots = a.knots;
    const PuLut lut = !a.lut.empty()         ? read_pu_lut(a.lut)
                      : !a.threshold.empty() ? build_pu_lut(read_threshold_csv(a.threshold), lo)
                                             : build_pu_lut(lo);
    encoded = pu_encode(L, lut, g.strict);
    if (a.write_lut) csv::write_text(fs::path(g.out) / "lut.csv", pu_lut_to_csv(lut));
  }
  const fs::path out = g.out;
  if (a.in.raw) {
    fs::create_directories(out);
    std::ofstream f(out / "encoded.f32", std::ios::binary);
    for (double v : encoded) {
      const auto x = static_cast<float>(v);
      f.write(reinterpret_cast<const char*>(&x), sizeof x);
    }
    if (!f) throw Error("cannot write '" + (out / "encoded.f32").string() + "'");
    return 0;
  }
  const char* column = a.log_encode ? "log10" : "pu";
  std::string text = a.in.pixels ? fmt::format("value,luminance,{}\n", column) : fmt::format("luminance,{}\n", column);
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (a.in.pixels) text += csv::num(source[i]) + ",";
    text += csv::num(L[i]) + "," + csv::num(encoded[i]) + "\n";
  }
  csv::write_text(out / "encoded.csv", text);
  return 0;
}

// ---------------------------------------------------------------------------

struct SelectArgs {
  std::string mode = "cross-dataset";
  std::string scale, test, bench;
  std::size_t k = 10;
  double window = 1.0;
  int bins = 5;
  bool allow_reuse = false;
};

int run_select_pairs(const SelectArgs& a, const Globals& g) {
  std::vector<std::string> keys;
  PairBatch batch;
  if (a.mode == "cross-dataset") {
    if (a.scale.empty()) throw std::invalid_argument("select-pairs: cross-dataset mode needs --scale");
    std::vector<ConditionId> ids;
    std::vector<double> q;
    for (const auto& [key, v] : read_keyed(a.scale, "jod")) {
      keys.push_back(key);
      ids.push_back(ConditionId::parse(key));
      q.push_back(v);
    }
    batch = select_cross_dataset_pairs(q, ids, {a.k, a.window, a.bins, g.seed, {}});
  } else {
    if (a.test.empty() || a.bench.empty()) throw std::invalid_argument("select-pairs: gmad mode needs --test and --bench");
    const auto bench = as_map(read_keyed(a.bench, "score"));
    std::vector<double> t, b;
    for (const auto& [key, v] : read_keyed(a.test, "score")) {
      const auto it = bench.find(key);
      if (it == bench.end()) throw IntegrityError("no benchmark score for '" + key + "'");
      keys.push_back(key);
      t.push_back(v);
      b.push_back(it->second);
    }
    batch = select_gmad_pairs(t, b, {a.k, a.window, a.allow_reuse});
  }
  std::string text = "cond_a,cond_b,count_a_over_b\n";
  json sel = json::array();
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& [i, j] = batch.pairs[n];
    text += fmt::format("{},{},0\n{},{},0\n", keys[i], keys[j], keys[j], keys[i]);
    sel.push_back({{"cond_a", keys[i]}, {"cond_b", keys[j]}, {"rationale", batch.rationale[n]}});
  }
  const fs::path out = g.out;
  csv::write_text(out / "pairs.csv", text);
  write_json(out / "selection.json", {{"mode", a.mode}, {"pairs", sel}});
  return 0;
}

// ---------------------------------------------------------------------------

struct LinkfitArgs {
  std::string mos, scale;
  int max_order = 3;
};

int run_linkfit(const LinkfitArgs& a, const Globals& g) {
  const auto mos = as_map(read_keyed(a.mos, "score"));
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_dataset;
  for (const auto& [key, q] : read_keyed(a.scale, "jod")) {
    const auto it = mos.find(key);
    if (it == mos.end()) continue;
    auto& [x, y] = by_dataset[ConditionId::parse(key).dataset];
    x.push_back(it->second);
    y.push_back(q);
  }
  if (by_dataset.empty()) throw IntegrityError("linkfit: no condition has both a MOS and a JOD score");
  std::string text = "dataset,order,r2,r2_adj,monotone\n";
  json rows = json::array();
  for (const auto& [name, xy] : by_dataset) {
    for (int order = 1; order <= a.max_order; ++order) {
      if (static_cast<int>(xy.first.size()) < order + 2) {
        warn(fmt::format("linkfit: dataset '{}' has too few points for order {}", name, order));
        break;
      }
      const auto f = fit_polynomial_link(xy.first, xy.second, order);
      text += fmt::format("{},{},{},{},{}\n", name, order, csv::num(f.r2), csv::num(f.r2_adj),
                          f.monotone_on_range ? "true" : "false");
      rows.push_back({{"dataset", name}, {"order", order}, {"r2", f.r2}, {"r2_adj", f.r2_adj},
                      {"monotone", f.monotone_on_range}, {"coeffs", f.coeffs}});
    }
  }
  const fs::path out = g.out;
  csv::write_text(out / "linkfit.csv", text);
  write_json(out / "linkfit.json", rows);
  return 0;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  LuminanceInput in;
  int bins = 20;
};

// Histogram of log10 luminance plus a short summary.
int run_stats(const StatsArgs& a, const Globals& g) {
  const auto L = read_luminance(a.in, g.strict);
  std::vector<double> logs;
  for (double v : L) {
    if (!(v > 0) || !std::isfinite(v)) {
      if (g.strict) throw IntegrityError(fmt::format("stats: luminance {} is not positive", v));
      warn(fmt::format("stats: skipping non-positive luminance {}", v));
      continue;
    }
    logs.push_back(std::log10(v));
  }
  if (logs.empty()) throw IntegrityError("stats: no positive luminance values");
  const auto [lo_it, hi_it] = std::minmax_element(logs.begin(), logs.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = hi > lo ? (hi - lo) / a.bins : 1.0;
  std::vector<std::size_t> counts(static_cast<std::size_t>(a.bins), 0);
  for (double v : logs) {
    const auto b = std::min<std::size_t>(static_cast<std::size_t>((v - lo) / width), counts.size() - 1);
    ++counts[b];
  }
  std::string text = "log10_lo,log10_hi,count\n";
  for (std::size_t b = 0; b < counts.size(); ++b)
    text += fmt::format("{},{},{}\n", csv::num(lo + width * b), csv::num(lo + width * (b + 1)), counts[b]);
  const fs::path out = g.out;
  csv::write_text(out / "histogram.csv", text);
  write_json(out / "stats.json", {{"n", logs.size()},
                                  {"skipped", L.size() - logs.size()},
                                  {"log10_min", lo},
                                  {"log10_max", hi},
                                  {"log10_mean", stats::mean(logs)},
                                  {"log10_median", stats::median(logs)}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified quality scaling of pairwise-comparison and rating datasets"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);

  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker thread cap")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--strict", g.strict, "Turn clamping and non-convergence warnings into errors");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  json options;

  ScaleArgs sa;
  auto* scale_cmd = app.add_subcommand("scale", "Fit a unified JOD scale to a manifest");
  scale_cmd->add_option("--manifest", sa.manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
  scale_cmd->add_flag("--no-prior", sa.no_prior, "Disable the Gaussian prior on scores");
  scale_cmd->add_flag("--per-component", sa.per_component, "Scale disconnected components separately");
  scale_cmd->add_option("--tol", sa.tol, "Gradient tolerance")->capture_default_str();
  scale_cmd->add_option("--max-iter", sa.max_iter, "Iteration cap")->capture_default_str();
  scale_cmd->add_option("--bootstrap", sa.bootstrap, "Bootstrap replicates for intervals (0: none)")
      ->capture_default_str();
  scale_cmd->add_option("--level", sa.level, "Interval coverage")->capture_default_str();

  SimArgs sim, rec;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a synthetic experiment as a manifest and CSVs");
  add_sim_flags(sim_cmd, sim);
  auto* rec_cmd = app.add_subcommand("recover", "Simulate, scale and report recovery of the ground truth");
  add_sim_flags(rec_cmd, rec);
  rec_cmd->add_flag("--no-prior", rec.no_prior, "Disable the Gaussian prior on scores");
  rec_cmd->add_option("--tol", rec.tol, "Gradient tolerance")->capture_default_str();
  rec_cmd->add_option("--max-iter", rec.max_iter, "Iteration cap")->capture_default_str();

  MetricArgs fit_args, val_args;
  auto* fit_cmd = app.add_subcommand("fit-logistic", "Map metric scores to JOD with a 5-parameter logistic");
  auto* val_cmd = app.add_subcommand("validate", "Correlation and pairwise accuracy of a metric against a scale");
  for (auto [cmd, args] : {std::pair{fit_cmd, &fit_args}, std::pair{val_cmd, &val_args}}) {
    cmd->add_option("--scores", args->scores, "CSV condition,score")->required()->check(CLI::ExistingFile);
    cmd->add_option("--scale", args->scale, "Scale CSV condition,jod,...")->required()->check(CLI::ExistingFile);
  }
  val_cmd->add_option("--manifest", val_args.manifest, "Manifest whose comparisons define pairwise accuracy")
      ->check(CLI::ExistingFile);
  val_cmd->add_option("--thresholds", val_args.thresholds, "JOD thresholds of the accuracy curve")
      ->capture_default_str();

  PuArgs pu;
  auto* pu_cmd = app.add_subcommand("pu-encode", "Encode luminance with the PU transform");
  add_display_flags(pu_cmd, pu.in);
  pu_cmd->add_option("--lut", pu.lut, "Precomputed LUT CSV")->check(CLI::ExistingFile);
  pu_cmd->add_option("--threshold", pu.threshold, "Tabulated threshold CSV luminance,threshold")
      ->check(CLI::ExistingFile)
      ->excludes("--lut");
  pu_cmd->add_option("--knots", pu.knots, "LUT knots")->check(CLI::Range(2, 10000000))->capture_default_str();
  pu_cmd->add_flag("--log-encode", pu.log_encode, "Emit log10 luminance instead of PU values");
  pu_cmd->add_flag("--write-lut", pu.write_lut, "Also write the LUT used");

  SelectArgs sel;
  auto* sel_cmd = app.add_subcommand("select-pairs", "Choose the next pairs to compare");
  sel_cmd->add_option("--mode", sel.mode, "Selection policy")
      ->check(CLI::IsMember({"cross-dataset", "gmad"}))
      ->capture_default_str();
  sel_cmd->add_option("--scale", sel.scale, "Current scale CSV (cross-dataset)")->check(CLI::ExistingFile);
  sel_cmd->add_option("--test", sel.test, "Test metric CSV condition,score (gmad)")->check(CLI::ExistingFile);
  sel_cmd->add_option("--bench", sel.bench, "Benchmark metric CSV condition,score (gmad)")->check(CLI::ExistingFile);
  sel_cmd->add_option("--k", sel.k, "Number of pairs")->capture_default_str();
  sel_cmd->add_option("--window", sel.window, "Similarity window")->capture_default_str();
  sel_cmd->add_option("--bins", sel.bins, "Score bins (cross-dataset)")->capture_default_str();
  sel_cmd->add_flag("--allow-reuse", sel.allow_reuse, "Let a condition appear in several pairs (gmad)");

  LinkfitArgs lf;
  auto* lf_cmd = app.add_subcommand("linkfit", "Polynomial MOS-to-JOD fits per dataset");
  lf_cmd->add_option("--mos", lf.mos, "CSV condition,score")->required()->check(CLI::ExistingFile);
  lf_cmd->add_option("--scale", lf.scale, "Scale CSV condition,jod,...")->required()->check(CLI::ExistingFile);
  lf_cmd->add_option("--max-order", lf.max_order, "Highest polynomial order")
      ->check(CLI::Range(1, 10))
      ->capture_default_str();

  StatsArgs st;
  auto* st_cmd = app.add_subcommand("stats", "Log-luminance histogram of an image or array");
  add_display_flags(st_cmd, st.in);
  st_cmd->add_option("--bins", st.bins, "Histogram bins")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const auto* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  if (name == "scale")
    options = {{"manifest", sa.manifest}, {"no_prior", sa.no_prior}, {"per_component", sa.per_component},
               {"tol", sa.tol},           {"max_iter", sa.max_iter}, {"bootstrap", sa.bootstrap},
               {"level", sa.level}};
  else if (name == "simulate")
    options = sim_json(sim);
  else if (name == "recover") {
    options = sim_json(rec);
    options["no_prior"] = rec.no_prior;
    options["tol"] = rec.tol;
    options["max_iter"] = rec.max_iter;
  } else if (name == "fit-logistic")
    options = {{"scores", fit_args.scores}, {"scale", fit_args.scale}};
  else if (name == "validate")
    options = {{"scores", val_args.scores}, {"scale", val_args.scale}, {"manifest", val_args.manifest},
               {"thresholds", val_args.thresholds}};
  else if (name == "pu-encode") {
    options = display_json(pu.in);
    options["lut"] = pu.lut;
    options["threshold"] = pu.threshold;
    options["knots"] = pu.knots;
    options["log_encode"] = pu.log_encode;
    options["write_lut"] = pu.write_lut;
  } else if (name == "select-pairs")
    options = {{"mode", sel.mode},   {"scale", sel.scale}, {"test", sel.test},
               {"bench", sel.bench}, {"k", sel.k},         {"window", sel.window},
               {"bins", sel.bins},   {"allow_reuse", sel.allow_reuse}};
  else if (name == "linkfit")
    options = {{"mos", lf.mos}, {"scale", lf.scale}, {"max_order", lf.max_order}};
  else if (name == "stats") {
    options = display_json(st.in);
    options["bins"] = st.bins;
  }

  try {
    write_json(fs::path(g.out) / "run.json", {{"subcommand", name},
                                              {"version", kVersion},
                                              {"seed", g.seed},
                                              {"threads", g.threads},
                                              {"strict", g.strict},
                                              {"out", g.out},
                                              {"options", options}});
    if (name == "scale") return run_scale(sa, g);
    if (name == "simulate") return run_simulate(sim, g);
    if (name == "recover") return run_recover(rec, g);
    if (name == "fit-logistic") return run_fit_logistic(fit_args, g);
    if (name == "validate") return run_validate(val_args, g);
    if (name == "pu-encode") return run_pu_encode(pu, g);
    if (name == "select-pairs") return run_select_pairs(sel, g);
    if (name == "linkfit") return run_linkfit(lf, g);
    return run_stats(st, g);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
