#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "zap/alc.hpp"
#include "zap/error.hpp"
#include "zap/meta_dataset.hpp"
#include "zap/pipeline_space.hpp"
#include "zap/surrogate.hpp"

namespace zap {

using json = nlohmann::ordered_json;

// Six-decimal rounding for every floating-point value written to disk.
inline double round6(double v) {
  const double r = std::round(v * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_json(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

struct PipelineSet {
  std::vector<std::string> ids;
  std::vector<PipelineConfig> configs;
};

inline json config_to_json(const PipelineConfig& c) {
  json obj = json::object();
  for (const auto& [name, value] : c)
    std::visit([&](const auto& v) { obj[name] = v; }, value);
  return obj;
}

inline PipelineConfig config_from_json(const json& obj, const SearchSpace& space, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": config must be an object");
  PipelineConfig c;
  for (const auto& [name, value] : obj.items()) {
    auto idx = space.index_of(name);
    if (!idx) throw ValidationError(where + ": unknown hyperparameter '" + name + "'");
    const auto& s = space.specs()[*idx];
    if (s.kind == ParamKind::categorical) {
      if (!value.is_string()) throw ParseError(where + ": '" + name + "' must be a string");
      c[name] = value.get<std::string>();
    } else if (s.kind == ParamKind::integer) {
      if (!value.is_number_integer()) throw ParseError(where + ": '" + name + "' must be an integer");
      c[name] = value.get<long long>();
    } else {
      if (!value.is_number()) throw ParseError(where + ": '" + name + "' must be a number");
      c[name] = value.get<double>();
    }
  }
  if (auto v = validate(c, space); !v.empty())
    throw ValidationError(where + ": " + v.front().name + " " + v.front().message);
  return c;
}

// [{"id": ..., "config": {...}}, ...]. Floats keep full precision: learning
// rates reach 1e-8, far below six decimals.
inline void save_pipelines(const PipelineSet& set, const std::string& path) {
  json doc = json::array();
  for (std::size_t i = 0; i < set.ids.size(); ++i)
    doc.push_back({{"id", set.ids[i]}, {"config", config_to_json(set.configs[i])}});
  write_json(doc, path);
}

inline PipelineSet load_pipelines(const std::string& path, const SearchSpace& space = default_space()) {
  const auto doc = read_json(path);
  if (!doc.is_array()) throw ParseError(path + ": expected an array of pipelines");
  PipelineSet set;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    const auto where = path + " entry " + std::to_string(i);
    if (!e.is_object() || !e.contains("id") || !e.contains("config") || !e["id"].is_string())
      throw ParseError(where + ": expected {\"id\": string, \"config\": object}");
    set.ids.push_back(e["id"].get<std::string>());
    set.configs.push_back(config_from_json(e["config"], space, where));
  }
  return set;
}

/// Reorders pipeline configs to follow the cost-matrix columns.
inline std::vector<PipelineConfig> align_pipelines(const CostMatrix& costs, const PipelineSet& set) {
  std::vector<PipelineConfig> out;
  for (const auto& id : costs.pipeline_ids()) {
    auto it = std::find(set.ids.begin(), set.ids.end(), id);
    if (it == set.ids.end()) throw ValidationError("no config for pipeline '" + id + "'");
    out.push_back(set.configs[static_cast<std::size_t>(it - set.ids.begin())]);
  }
  return out;
}

inline json train_config_to_json(const TrainConfig& cfg) {
  return {{"hidden", cfg.hidden},
          {"learning_rate", cfg.learning_rate},
          {"triples_per_step", cfg.triples_per_step},
          {"steps", cfg.steps},
          {"seed", cfg.seed},
          {"objective", to_string(cfg.objective)},
          {"weight_decay", cfg.weight_decay}};
}

// Fields absent from `j` keep the values already in `cfg`.
inline void merge_train_config(const json& j, TrainConfig& cfg) {
  if (j.contains("hidden")) cfg.hidden = j["hidden"].get<std::vector<std::size_t>>();
  if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("triples_per_step")) cfg.triples_per_step = j["triples_per_step"].get<std::size_t>();
  if (j.contains("steps")) cfg.steps = j["steps"].get<std::size_t>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("objective")) cfg.objective = objective_from_string(j["objective"].get<std::string>());
  if (j.contains("weight_decay")) cfg.weight_decay = j["weight_decay"].get<double>();
}

/// A trained surrogate plus what is needed to use it on a new dataset.
struct SavedSurrogate {
  SurrogateParams params;
  TrainConfig config;
  FeatureStats stats;
};

// Weight arrays are flattened row-major (output unit by output unit).
inline json surrogate_to_json(const SavedSurrogate& s) {
  json layers = json::array();
  for (std::size_t l = 0; l < s.params.n_layers(); ++l) {
    const auto& w = s.params.weights[l];
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    const auto& b = s.params.biases[l];
    layers.push_back({{"weights", flat}, {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"layer_sizes", s.params.layer_sizes()},
          {"objective", to_string(s.config.objective)},
          {"seed", s.config.seed},
          {"config", train_config_to_json(s.config)},
          {"feature_stats", {{"mean", s.stats.mean}, {"std", s.stats.std}}},
          {"layers", layers}};
}

inline SavedSurrogate surrogate_from_json(const json& j) {
  try {
    SavedSurrogate s;
    const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    s.params = SurrogateParams::zeros(sizes);
    merge_train_config(j.at("config"), s.config);
    s.config.objective = objective_from_string(j.at("objective").get<std::string>());
    s.stats.mean = j.at("feature_stats").at("mean").get<MetaVector>();
    s.stats.std = j.at("feature_stats").at("std").get<MetaVector>();
    const auto& layers = j.at("layers");
    if (layers.size() != s.params.n_layers()) throw ParseError("layer count does not match layer_sizes");
    for (std::size_t l = 0; l < s.params.n_layers(); ++l) {
      auto& w = s.params.weights[l];
      auto& b = s.params.biases[l];
      const auto flat = layers[l].at("weights").get<std::vector<double>>();
      const auto bias = layers[l].at("bias").get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(w.size()) || bias.size() != static_cast<std::size_t>(b.size()))
        throw ParseError("layer " + std::to_string(l) + " has the wrong number of values");
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
      for (std::size_t i = 0; i < bias.size(); ++i) b(static_cast<Eigen::Index>(i)) = bias[i];
    }
    if (!s.params.all_finite()) throw ValidationError("surrogate parameters must be finite");
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed surrogate document: ") + e.what());
  }
}

// [{"t": seconds, "nauc": value}, ...]
inline LearningCurve load_curve(const std::string& path) {
  const auto doc = read_json(path);
  if (!doc.is_array()) throw ParseError(path + ": expected an array of {t, nauc} points");
  LearningCurve curve;
  for (const auto& p : doc) {
    if (!p.is_object() || !p.contains("t") || !p.contains("nauc") || !p["t"].is_number() || !p["nauc"].is_number())
      throw ParseError(path + ": every point needs numeric 't' and 'nauc'");
    curve.push_back({p["t"].get<double>(), p["nauc"].get<double>()});
  }
  return curve;
}

}  // namespace zap
