#pragma once

// Portable model file: JSON with a format tag and version, metric entries in
// row-major order and shortest round-trip decimal doubles, so identical
// models serialise to identical bytes.
//
//   {
//     "format": "irml-model", "version": 1,
//     "dim": d, "num_regions": S, "k_neighbors": K,
//     "background_metric": [d*d numbers],
//     "regions": [{"center": [d], "radius": r, "metric": [d*d]}, ...],
//     "preprocessing": {"mean": [d], "stddev": [d]}        (optional)
//   }

#include "irml/dataio.hpp"
#include "irml/distance.hpp"
#include "irml/trainer.hpp"

#include "json.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace irml {

inline constexpr const char* kModelFormat = "irml-model";
inline constexpr int kModelVersion = 1;

struct ModelFile {
  ModelParams model;
  int k_neighbors = 10;
  std::optional<Preprocessor> preprocessing;
};

namespace detail {

inline nlohmann::json to_json_array(const Vector& v) {
  auto arr = nlohmann::json::array();
  for (std::ptrdiff_t k = 0; k < v.size(); ++k) arr.push_back(v(k));
  return arr;
}

inline nlohmann::json to_json_array(const Matrix& m) {
  auto arr = nlohmann::json::array();
  for (std::ptrdiff_t i = 0; i < m.rows(); ++i) {
    for (std::ptrdiff_t j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
  }
  return arr;
}

inline Vector vector_from_json(const nlohmann::json& j, std::ptrdiff_t size, const char* what) {
  if (!j.is_array() || static_cast<std::ptrdiff_t>(j.size()) != size) {
    throw DataError(std::string("model file: '") + what + "' must be an array of " +
                    std::to_string(size) + " numbers");
  }
  Vector v(size);
  for (std::ptrdiff_t k = 0; k < size; ++k) v(k) = j.at(static_cast<std::size_t>(k)).get<double>();
  return v;
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::ptrdiff_t d, const char* what) {
  const Vector flat = vector_from_json(j, d * d, what);
  Matrix m(d, d);
  for (std::ptrdiff_t i = 0; i < d; ++i) {
    for (std::ptrdiff_t k = 0; k < d; ++k) m(i, k) = flat(i * d + k);
  }
  return m;
}

}  // namespace detail

inline nlohmann::json model_to_json(const ModelFile& file) {
  const auto& model = file.model;
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["dim"] = model.dim();
  j["num_regions"] = model.num_regions();
  j["k_neighbors"] = file.k_neighbors;
  j["background_metric"] = detail::to_json_array(model.background.matrix());
  auto regions = nlohmann::json::array();
  for (const auto& reg : model.regions) {
    regions.push_back({{"center", detail::to_json_array(reg.ball.center)},
                       {"radius", reg.ball.radius},
                       {"metric", detail::to_json_array(reg.metric.matrix())}});
  }
  j["regions"] = std::move(regions);
  if (file.preprocessing) {
    j["preprocessing"] = {{"mean", detail::to_json_array(file.preprocessing->mean)},
                          {"stddev", detail::to_json_array(file.preprocessing->stddev)}};
  }
  return j;
}

inline std::string serialize_model(const ModelFile& file) { return model_to_json(file).dump(2) + "\n"; }

inline ModelFile model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != kModelFormat) {
      throw DataError("model file: missing or unknown format tag");
    }
    if (j.at("version").get<int>() != kModelVersion) {
      throw DataError("model file: unsupported version " + j.at("version").dump());
    }
    ModelFile file;
    const auto d = j.at("dim").get<std::ptrdiff_t>();
    const auto s = j.at("num_regions").get<std::size_t>();
    file.k_neighbors = j.value("k_neighbors", 10);
    file.model.background = MetricMatrix(detail::matrix_from_json(j.at("background_metric"), d, "background_metric"));
    const auto& regions = j.at("regions");
    if (!regions.is_array() || regions.size() != s) {
      throw DataError("model file: 'regions' length does not match num_regions");
    }
    for (const auto& r : regions) {
      Region reg;
      reg.ball = Ball(detail::vector_from_json(r.at("center"), d, "center"), r.at("radius").get<double>());
      reg.metric = MetricMatrix(detail::matrix_from_json(r.at("metric"), d, "metric"));
      file.model.regions.push_back(std::move(reg));
    }
    if (j.contains("preprocessing")) {
      const auto& p = j.at("preprocessing");
      file.preprocessing = Preprocessor{detail::vector_from_json(p.at("mean"), d, "mean"),
                                        detail::vector_from_json(p.at("stddev"), d, "stddev")};
    }
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

inline ModelFile parse_model(const std::string& text) {
  try {
    return model_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"alpha", c.alpha},
          {"margin", c.margin_c},
          {"k", c.k_neighbors},
          {"regions", c.num_regions},
          {"lr", c.learning_rate},
          {"epochs", c.max_epochs},
          {"tol", c.tol},
          {"seed", c.seed},
          {"radius_floor", c.radius_floor}};
}

inline nlohmann::json report_to_json(const TrainReport& r, const TrainConfig& c) {
  return {{"epochs_run", r.epochs_run},
          {"initial_objective", r.objective_history.front()},
          {"final_objective", r.objective_history.back()},
          {"objective_history", r.objective_history},
          {"config", config_to_json(c)}};
}

}  // namespace irml
