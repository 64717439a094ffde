#pragma once

// Command-line front end: train, eval, bench, gradcheck and geom subcommands.
// `run` is callable in-process so the tests can drive it with captured streams.

#include "irml/bench.hpp"
#include "irml/classifier.hpp"
#include "irml/dataio.hpp"
#include "irml/geometry.hpp"
#include "irml/gradcheck.hpp"
#include "irml/model_io.hpp"
#include "irml/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace irml::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3, kGradcheck = 4 };

namespace detail {

struct DataFlags {
  std::string path;
  std::string format;
  std::string label_col;
};

struct SettingFlags {
  std::string config_path;
  std::optional<double> alpha, margin, lr, tol, split_frac, radius_floor;
  std::optional<int> k, regions, epochs, repeats;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> stats;
};

inline void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--data", f.path, "Dataset file (LIBSVM or CSV)")->required();
  cmd->add_option("--format", f.format, "Input format; guessed from the extension when omitted")
      ->check(CLI::IsMember({"libsvm", "csv"}));
  cmd->add_option("--label-col", f.label_col, "CSV label column (header name or 0-based index)");
}

inline void add_split_flags(CLI::App* cmd, SettingFlags& f) {
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--split-frac", f.split_frac, "Training fraction of each split");
  cmd->add_option("--stats", f.stats, "Standardisation statistics source")
      ->check(CLI::IsMember({"train-only", "global"}));
  cmd->add_option("--config", f.config_path, "key = value configuration file");
}

inline void add_train_flags(CLI::App* cmd, SettingFlags& f) {
  cmd->add_option("--alpha", f.alpha, "Frobenius regularisation weight");
  cmd->add_option("--margin", f.margin, "Hinge margin C");
  cmd->add_option("--k", f.k, "Neighbours K for pairs and classification");
  cmd->add_option("--regions", f.regions, "Number of influential regions S");
  cmd->add_option("--lr", f.lr, "Gradient descent step size");
  cmd->add_option("--epochs", f.epochs, "Maximum number of epochs");
  cmd->add_option("--tol", f.tol, "Relative objective change that stops training");
  cmd->add_option("--radius-floor", f.radius_floor, "Lower bound on region radii");
  add_split_flags(cmd, f);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

// Defaults, then the config file, then explicit flags.
inline RunSettings resolve_settings(const SettingFlags& f) {
  RunSettings s;
  if (!f.config_path.empty()) {
    try {
      apply_settings(s, parse_key_values(read_file(f.config_path)));
    } catch (const ParseError& e) {
      throw UsageError(f.config_path + ": " + e.what());
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
  }
  if (f.alpha) s.train.alpha = *f.alpha;
  if (f.margin) s.train.margin_c = *f.margin;
  if (f.k) s.train.k_neighbors = *f.k;
  if (f.regions) s.train.num_regions = *f.regions;
  if (f.lr) s.train.learning_rate = *f.lr;
  if (f.epochs) s.train.max_epochs = *f.epochs;
  if (f.tol) s.train.tol = *f.tol;
  if (f.radius_floor) s.train.radius_floor = *f.radius_floor;
  if (f.seed) s.train.seed = *f.seed;
  if (f.repeats) s.repeats = *f.repeats;
  if (f.split_frac) s.split_frac = *f.split_frac;
  if (f.stats) s.stats = parse_stats_mode(*f.stats);
  if (!(s.split_frac > 0.0 && s.split_frac <= 1.0)) throw UsageError("split fraction must lie in (0, 1]");
  s.train.validate();
  return s;
}

inline LabeledDataset load(const DataFlags& f) {
  DataFormat fmt = guess_format(f.path);
  if (f.format == "csv") fmt = DataFormat::kCsv;
  if (f.format == "libsvm") fmt = DataFormat::kLibsvm;
  return load_dataset(f.path, fmt, f.label_col).data;
}

// A fraction of 1 trains on everything and leaves the test part empty.
inline SplitRun split_for(const LabeledDataset& data, const RunSettings& s) {
  if (s.split_frac >= 1.0) {
    SplitRun run;
    run.preprocessing = Preprocessor::fit(data.x);
    run.train = run.preprocessing.apply(data);
    run.test = data.subset({});
    return run;
  }
  return prepare_split(data, s.split_frac, s.train.seed, s.stats);
}

inline std::string dataset_name(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<std::ptrdiff_t>(v.size()));
}

inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json geometry_to_json(const IntersectionResult& r) {
  const auto kind = r.classify();
  nlohmann::json j;
  j["a"] = r.a;
  j["b"] = r.b;
  j["c"] = r.c;
  j["delta"] = r.delta;
  j["lambda_u"] = r.has_chord ? detail::finite_or_null(r.lambda_u) : nlohmann::json(nullptr);
  j["lambda_v"] = r.has_chord ? detail::finite_or_null(r.lambda_v) : nlohmann::json(nullptr);
  j["lambda_p"] = r.lambda_p;
  j["lambda_q"] = r.lambda_q;
  j["gamma"] = r.gamma;
  j["case"] = std::string(case_label(kind));
  j["case_id"] = std::string(case_id(kind));
  return j;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"K-min nearest-neighbour classification with region-weighted metrics"};
  app.name("irml");
  app.require_subcommand(1);

  detail::DataFlags data_flags;
  detail::SettingFlags settings_flags;
  std::string out_path;
  std::string report_path;
  std::string model_path;
  std::vector<std::ptrdiff_t> dims{2, 8, 30};
  std::uint64_t gc_seed = 0;
  int gc_configs = 50;
  double threshold = gradcheck::kDefaultThreshold;
  std::vector<double> xi, xj, center;
  double radius = 0.0;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write it with its training report");
  detail::add_data_flags(train_cmd, data_flags);
  detail::add_train_flags(train_cmd, settings_flags);
  train_cmd->add_option("--out", out_path, "Model output file")->required();
  train_cmd->add_option("--report", report_path, "Training report file (default: <out>.report.json)");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on the held-out part of a split");
  detail::add_data_flags(eval_cmd, data_flags);
  eval_cmd->add_option("--model", model_path, "Model file written by train")->required();
  eval_cmd->add_option("--k", settings_flags.k, "Override the stored K");
  detail::add_split_flags(eval_cmd, settings_flags);

  auto* bench_cmd = app.add_subcommand("bench", "Repeated split benchmark against the identity metric");
  detail::add_data_flags(bench_cmd, data_flags);
  detail::add_train_flags(bench_cmd, settings_flags);
  bench_cmd->add_option("--repeats", settings_flags.repeats, "Number of seeded repetitions");
  bench_cmd->add_option("--out", out_path, "Report file (default: stdout)");

  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every gradient group");
  gc_cmd->add_option("--dims", dims, "Dimensions to test")->delimiter(',');
  gc_cmd->add_option("--seed", gc_seed, "Random seed");
  gc_cmd->add_option("--configs", gc_configs, "Configurations per dimension")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--threshold", threshold, "Maximum accepted relative error");

  auto* geom_cmd = app.add_subcommand("geom", "Intersect a segment with a ball");
  geom_cmd->add_option("--xi", xi, "Segment start, comma separated")->required()->delimiter(',');
  geom_cmd->add_option("--xj", xj, "Segment end, comma separated")->required()->delimiter(',');
  geom_cmd->add_option("--center", center, "Ball centre, comma separated")->required()->delimiter(',');
  geom_cmd->add_option("--radius", radius, "Ball radius")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) {
      const auto settings = detail::resolve_settings(settings_flags);
      const auto data = detail::load(data_flags);
      const auto run = detail::split_for(data, settings);
      const auto report = train(run.train, settings.train);
      const ModelFile file{report.final_model, settings.train.k_neighbors, run.preprocessing};
      if (report_path.empty()) report_path = out_path + ".report.json";
      detail::write_file(out_path, serialize_model(file));
      auto rj = report_to_json(report, settings.train);
      rj["dataset"] = detail::dataset_name(data_flags.path);
      rj["split_frac"] = settings.split_frac;
      rj["stats"] = stats_mode_name(settings.stats);
      rj["train_size"] = run.train.size();
      rj["test_size"] = run.test.size();
      detail::write_file(report_path, rj.dump(2) + "\n");
      out << nlohmann::json{{"model", out_path},
                            {"report", report_path},
                            {"dim", report.final_model.dim()},
                            {"num_regions", report.final_model.num_regions()},
                            {"epochs_run", report.epochs_run},
                            {"initial_objective", report.objective_history.front()},
                            {"final_objective", report.objective_history.back()}}
                 .dump()
          << "\n";
    } else if (*eval_cmd) {
      const auto file = load_model(model_path);
      auto flags = settings_flags;
      const int k = flags.k.value_or(file.k_neighbors);
      flags.k.reset();
      const auto settings = detail::resolve_settings(flags);
      const auto data = detail::load(data_flags);
      if (data.dim() != file.model.dim()) {
        throw DataError("model dimension " + std::to_string(file.model.dim()) +
                        " does not match dataset dimension " + std::to_string(data.dim()));
      }
      LabeledDataset train_raw = data;
      LabeledDataset test_raw = data.subset({});
      if (settings.split_frac < 1.0) std::tie(train_raw, test_raw) = split(data, settings.split_frac, settings.train.seed);
      const Preprocessor prep = file.preprocessing ? *file.preprocessing : fit_preprocessor(train_raw, test_raw, settings.stats);
      const auto trainset = prep.apply(train_raw);
      // With no held-out part the training set is scored against itself.
      const auto testset = test_raw.size() == 0 ? trainset : prep.apply(test_raw);
      const double acc = evaluate(testset, trainset, file.model, k);
      const double base = evaluate(testset, trainset, ModelParams::identity(data.dim()), k);
      out << nlohmann::json{{"dataset", detail::dataset_name(data_flags.path)},
                            {"accuracy", acc},
                            {"baseline_accuracy", base},
                            {"k", k},
                            {"train_size", trainset.size()},
                            {"test_size", testset.size()}}
                 .dump()
          << "\n";
    } else if (*bench_cmd) {
      const auto settings = detail::resolve_settings(settings_flags);
      if (settings.split_frac >= 1.0) throw UsageError("bench needs a split fraction below 1");
      const auto data = detail::load(data_flags);
      const auto report = run_benchmark(data, detail::dataset_name(data_flags.path), settings);
      const auto text = benchmark_to_json(report).dump(2) + "\n";
      if (out_path.empty()) {
        out << text;
      } else {
        detail::write_file(out_path, text);
      }
    } else if (*gc_cmd) {
      if (dims.empty()) throw UsageError("--dims needs at least one dimension");
      for (auto d : dims) {
        if (d < 1) throw UsageError("--dims entries must be positive");
      }
      const auto results = gradcheck::run(dims, gc_seed, gc_configs);
      bool ok = true;
      out << std::left << std::setw(30) << "group" << std::setw(6) << "dim" << std::setw(9) << "configs"
          << std::setw(14) << "max_rel_err" << "verdict\n";
      for (const auto& g : results) {
        const bool pass = g.max_error < threshold;
        ok = ok && pass;
        std::ostringstream e;
        e << std::scientific << std::setprecision(3) << g.max_error;
        out << std::left << std::setw(30) << g.group << std::setw(6) << g.dim << std::setw(9)
            << g.configurations << std::setw(14) << e.str() << (pass ? "PASS" : "FAIL") << "\n";
      }
      if (!ok) {
        err << "gradcheck: at least one group exceeded " << threshold << "\n";
        return kGradcheck;
      }
    } else if (*geom_cmd) {
      if (xi.size() != xj.size() || xi.size() != center.size()) {
        throw UsageError("--xi, --xj and --center must have the same length");
      }
      const Ball ball(detail::to_vector(center), radius);
      const auto res = intersect(detail::to_vector(xi), detail::to_vector(xj), ball);
      out << geometry_to_json(res).dump() << "\n";
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"irml"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace irml::cli
