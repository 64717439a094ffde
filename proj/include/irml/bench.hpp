#pragma once

// Repeated split / preprocess / train / evaluate protocol, plus the
// key=value configuration format shared by the command-line tool.

#include "irml/classifier.hpp"
#include "irml/dataio.hpp"
#include "irml/model_io.hpp"
#include "irml/trainer.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace irml {

struct RunSettings {
  TrainConfig train;
  int repeats = 10;
  double split_frac = 0.6;
  StatsMode stats = StatsMode::kTrainOnly;
};

// `key = value` lines; '#' starts a comment. Values may be quoted.
inline std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  const auto lines = detail::split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    auto line = lines[ln];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(ln + 1, 0, "expected key = value");
    std::string key(detail::trim(line.substr(0, eq)));
    auto value = detail::trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    for (auto& ch : key) {
      if (ch == '-') ch = '_';
    }
    if (key.empty()) throw ParseError(ln + 1, 0, "empty key");
    out[key] = std::string(value);
  }
  return out;
}

inline StatsMode parse_stats_mode(const std::string& v) {
  if (v == "train-only" || v == "train_only" || v == "train") return StatsMode::kTrainOnly;
  if (v == "global") return StatsMode::kGlobal;
  throw UsageError("stats mode must be 'train-only' or 'global', got '" + v + "'");
}

inline std::string stats_mode_name(StatsMode m) {
  return m == StatsMode::kGlobal ? "global" : "train-only";
}

inline void apply_setting(RunSettings& s, const std::string& key, const std::string& value) {
  auto num = [&]() {
    const auto v = detail::parse_double(value);
    if (!v) throw UsageError("config: '" + key + "' expects a number, got '" + value + "'");
    return *v;
  };
  auto integer = [&]() {
    const auto v = detail::parse_int(value);
    if (!v) throw UsageError("config: '" + key + "' expects an integer, got '" + value + "'");
    return *v;
  };
  if (key == "alpha") s.train.alpha = num();
  else if (key == "margin" || key == "c") s.train.margin_c = num();
  else if (key == "k") s.train.k_neighbors = static_cast<int>(integer());
  else if (key == "regions") s.train.num_regions = static_cast<int>(integer());
  else if (key == "lr") s.train.learning_rate = num();
  else if (key == "epochs") s.train.max_epochs = static_cast<int>(integer());
  else if (key == "tol") s.train.tol = num();
  else if (key == "seed") s.train.seed = static_cast<std::uint64_t>(integer());
  else if (key == "radius_floor") s.train.radius_floor = num();
  else if (key == "repeats") s.repeats = static_cast<int>(integer());
  else if (key == "split_frac") s.split_frac = num();
  else if (key == "stats") s.stats = parse_stats_mode(value);
  else throw UsageError("config: unknown key '" + key + "'");
}

inline void apply_settings(RunSettings& s, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) apply_setting(s, k, v);
}

struct SeedResult {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double baseline_accuracy = 0.0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int epochs = 0;
  std::size_t num_regions = 0;
};

struct BenchmarkReport {
  std::string dataset;
  std::vector<SeedResult> per_seed;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_baseline = 0.0;
  double std_baseline = 0.0;
  RunSettings settings;
  double wall_seconds = 0.0;
};

// Mean and population standard deviation (a single sample has std 0).
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

inline void summarize(BenchmarkReport& r) {
  std::vector<double> acc;
  std::vector<double> base;
  for (const auto& s : r.per_seed) {
    acc.push_back(s.accuracy);
    base.push_back(s.baseline_accuracy);
  }
  std::tie(r.mean_accuracy, r.std_accuracy) = mean_std(acc);
  std::tie(r.mean_baseline, r.std_baseline) = mean_std(base);
}

struct SplitRun {
  LabeledDataset train;
  LabeledDataset test;
  Preprocessor preprocessing;
};

inline SplitRun prepare_split(const LabeledDataset& data, double split_frac, std::uint64_t seed,
                              StatsMode stats) {
  auto [train, test] = split(data, split_frac, seed);
  SplitRun run;
  run.preprocessing = fit_preprocessor(train, test, stats);
  run.train = run.preprocessing.apply(train);
  run.test = test.size() == 0 ? test : run.preprocessing.apply(test);
  return run;
}

// Called after each repetition with its result.
using SeedObserver = std::function<void(const SeedResult&)>;

// For seeds 0..R-1: split, preprocess, train with that seed, and evaluate the
// learned model next to the identity-metric baseline with the same K.
inline BenchmarkReport run_benchmark(const LabeledDataset& data, const std::string& name,
                                     const RunSettings& settings,
                                     const SeedObserver& observer = {}) {
  if (settings.repeats < 1) throw UsageError("repeats must be >= 1");
  settings.train.validate();
  const auto start = std::chrono::steady_clock::now();
  BenchmarkReport report;
  report.dataset = name;
  report.settings = settings;
  for (int r = 0; r < settings.repeats; ++r) {
    const auto seed = static_cast<std::uint64_t>(r);
    const SplitRun run = prepare_split(data, settings.split_frac, seed, settings.stats);
    TrainConfig cfg = settings.train;
    cfg.seed = seed;
    const TrainReport tr = train(run.train, cfg);
    SeedResult res;
    res.seed = seed;
    res.accuracy = evaluate(run.test, run.train, tr.final_model, cfg.k_neighbors);
    res.baseline_accuracy =
        evaluate(run.test, run.train, ModelParams::identity(run.train.dim()), cfg.k_neighbors);
    res.initial_objective = tr.objective_history.front();
    res.final_objective = tr.objective_history.back();
    res.epochs = tr.epochs_run;
    res.num_regions = tr.final_model.num_regions();
    report.per_seed.push_back(res);
    if (observer) observer(res);
  }
  summarize(report);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline nlohmann::json benchmark_to_json(const BenchmarkReport& r) {
  // Emitted statistics must be recomputable from the per-seed entries.
  BenchmarkReport check = r;
  summarize(check);
  if (check.mean_accuracy != r.mean_accuracy || check.std_accuracy != r.std_accuracy ||
      check.mean_baseline != r.mean_baseline || check.std_baseline != r.std_baseline) {
    throw NumericError("benchmark report: summary statistics disagree with per-seed results");
  }
  auto seeds = nlohmann::json::array();
  for (const auto& s : r.per_seed) {
    seeds.push_back({{"seed", s.seed},
                     {"accuracy", s.accuracy},
                     {"baseline_accuracy", s.baseline_accuracy},
                     {"initial_objective", s.initial_objective},
                     {"final_objective", s.final_objective},
                     {"epochs", s.epochs},
                     {"num_regions", s.num_regions}});
  }
  auto config = config_to_json(r.settings.train);
  config.erase("seed");
  config["repeats"] = r.settings.repeats;
  config["split_frac"] = r.settings.split_frac;
  config["stats"] = stats_mode_name(r.settings.stats);
  return {{"dataset", r.dataset},
          {"per_seed", std::move(seeds)},
          {"learned", {{"mean", r.mean_accuracy}, {"std", r.std_accuracy}}},
          {"baseline", {{"mean", r.mean_baseline}, {"std", r.std_baseline}}},
          {"config", std::move(config)},
          {"wall_seconds", r.wall_seconds}};
}

}  // namespace irml
