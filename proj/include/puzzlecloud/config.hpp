#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "puzzlecloud/datagen.hpp"
#include "puzzlecloud/errors.hpp"
#include "puzzlecloud/model.hpp"
#include "puzzlecloud/settings.hpp"
#include "puzzlecloud/training.hpp"

namespace puzzlecloud {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Where a dataset comes from: a saved directory or the generator.
struct DataSource {
  std::optional<std::string> path;
  std::size_t samples_per_class = 25;
  std::size_t k_points = 256;
  std::string profile = "clean";
  std::uint64_t seed = 1;
};

struct SweepGrid {
  std::vector<double> alphas{0.0, 0.4, 0.6, 0.8};
  std::vector<int> ls{2, 3, 4};
  std::size_t repeats = 3;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  ScenarioKind scenario = ScenarioKind::SD;
  double labeled_fraction = 1.0;
  bool tl_puzzle_includes_source = false;
  std::map<std::string, std::string> class_mapping;
  DataSource source;
  double test_fraction = 0.2;
  std::optional<DataSource> extra_unlabeled;
  std::optional<DataSource> target;
  EncoderConfig model;
  bool puzzle_head = true;  // false builds the puzzle-free baseline
  TrainConfig train;
  SweepGrid sweep;
};

namespace detail {

// Rejects keys outside `allowed` so typos fail loudly.
inline void check_keys(const Json& object, const std::set<std::string>& allowed, const std::string& where) {
  if (!object.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : object.items()) {
    if (!allowed.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
void read_if(const Json& object, const char* key, T& out, const std::string& where) {
  if (!object.contains(key)) return;
  try {
    out = object.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

}  // namespace detail

inline Json to_json(const DataSource& s) {
  Json j;
  if (s.path) {
    j["path"] = *s.path;
    return j;
  }
  j["samples_per_class"] = s.samples_per_class;
  j["k_points"] = s.k_points;
  j["profile"] = s.profile;
  j["seed"] = s.seed;
  return j;
}

inline DataSource data_source_from_json(const Json& j, const std::string& where) {
  detail::check_keys(j, {"path", "samples_per_class", "k_points", "profile", "seed"}, where);
  DataSource s;
  if (j.contains("path")) s.path = j["path"].get<std::string>();
  detail::read_if(j, "samples_per_class", s.samples_per_class, where);
  detail::read_if(j, "k_points", s.k_points, where);
  detail::read_if(j, "profile", s.profile, where);
  detail::read_if(j, "seed", s.seed, where);
  return s;
}

inline Json to_json(const EncoderConfig& m) {
  return Json{{"per_point_mlp_widths", m.per_point_mlp_widths},
              {"local_feature_layer", m.local_feature_layer},
              {"head_widths_classification", m.head_widths_classification},
              {"head_widths_per_point", m.head_widths_per_point},
              {"dropout_rate", m.dropout_rate},
              {"task", to_string(m.task)},
              {"num_classes", m.num_classes},
              {"num_parts", m.num_parts},
              {"num_voxels", m.num_voxels},
              {"batch_standardization", m.batch_standardization},
              {"share_first_head_layer", m.share_first_head_layer}};
}

inline EncoderConfig encoder_config_from_json(const Json& j, const std::string& where = "model") {
  detail::check_keys(j,
                     {"per_point_mlp_widths", "local_feature_layer", "head_widths_classification",
                      "head_widths_per_point", "dropout_rate", "task", "num_classes", "num_parts",
                      "num_voxels", "batch_standardization", "share_first_head_layer"},
                     where);
  EncoderConfig m;
  detail::read_if(j, "per_point_mlp_widths", m.per_point_mlp_widths, where);
  detail::read_if(j, "local_feature_layer", m.local_feature_layer, where);
  detail::read_if(j, "head_widths_classification", m.head_widths_classification, where);
  detail::read_if(j, "head_widths_per_point", m.head_widths_per_point, where);
  detail::read_if(j, "dropout_rate", m.dropout_rate, where);
  if (j.contains("task")) m.task = task_from_string(j["task"].get<std::string>());
  detail::read_if(j, "num_classes", m.num_classes, where);
  detail::read_if(j, "num_parts", m.num_parts, where);
  detail::read_if(j, "num_voxels", m.num_voxels, where);
  detail::read_if(j, "batch_standardization", m.batch_standardization, where);
  detail::read_if(j, "share_first_head_layer", m.share_first_head_layer, where);
  return m;
}

inline Json to_json(const TrainConfig& t) {
  Json j{{"alpha", t.alpha},
         {"puzzle_l", t.puzzle_l},
         {"batch_size", t.batch_size},
         {"epochs", t.epochs},
         {"optimizer", to_string(t.optimizer)},
         {"decay_every", t.decay_every},
         {"task", to_string(t.task)},
         {"augment",
          {{"rotate", t.augment.rotate},
           {"jitter", t.augment.jitter},
           {"jitter_sigma", t.augment.jitter_sigma},
           {"jitter_clip", t.augment.jitter_clip}}}};
  if (t.base_lr) j["base_lr"] = *t.base_lr;
  return j;
}

// The run seed lives at the top level of an experiment, so it is not read here.
inline TrainConfig train_config_from_json(const Json& j, const std::string& where = "train") {
  detail::check_keys(j,
                     {"alpha", "puzzle_l", "batch_size", "epochs", "optimizer", "base_lr",
                      "decay_every", "task", "augment"},
                     where);
  TrainConfig t;
  detail::read_if(j, "alpha", t.alpha, where);
  detail::read_if(j, "puzzle_l", t.puzzle_l, where);
  detail::read_if(j, "batch_size", t.batch_size, where);
  detail::read_if(j, "epochs", t.epochs, where);
  if (j.contains("optimizer")) t.optimizer = optimizer_preset_from_string(j["optimizer"].get<std::string>());
  if (j.contains("base_lr")) t.base_lr = j["base_lr"].get<double>();
  detail::read_if(j, "decay_every", t.decay_every, where);
  if (j.contains("task")) t.task = task_from_string(j["task"].get<std::string>());
  if (j.contains("augment")) {
    const Json& a = j["augment"];
    const std::string aw = where + ".augment";
    detail::check_keys(a, {"rotate", "jitter", "jitter_sigma", "jitter_clip"}, aw);
    detail::read_if(a, "rotate", t.augment.rotate, aw);
    detail::read_if(a, "jitter", t.augment.jitter, aw);
    detail::read_if(a, "jitter_sigma", t.augment.jitter_sigma, aw);
    detail::read_if(a, "jitter_clip", t.augment.jitter_clip, aw);
  }
  return t;
}

inline Json to_json(const ExperimentConfig& c) {
  Json data{{"source", to_json(c.source)}, {"test_fraction", c.test_fraction}};
  if (c.extra_unlabeled) data["extra_unlabeled"] = to_json(*c.extra_unlabeled);
  if (c.target) data["target"] = to_json(*c.target);
  Json model = to_json(c.model);
  model.erase("task");
  model.erase("num_classes");
  model.erase("num_parts");
  model.erase("num_voxels");
  model["puzzle_head"] = c.puzzle_head;
  return Json{{"schema_version", kSchemaVersion},
              {"seed", c.seed},
              {"output_dir", c.output_dir},
              {"scenario",
               {{"kind", to_string(c.scenario)},
                {"labeled_fraction", c.labeled_fraction},
                {"tl_puzzle_includes_source", c.tl_puzzle_includes_source},
                {"class_mapping", c.class_mapping}}},
              {"data", data},
              {"model", model},
              {"train", to_json(c.train)},
              {"sweep", {{"alphas", c.sweep.alphas}, {"ls", c.sweep.ls}, {"repeats", c.sweep.repeats}}}};
}

// Task, class/part counts and voxel count are derived from the data and the
// training section, so the model section only carries architecture.
inline ExperimentConfig experiment_config_from_json(const Json& j) {
  detail::check_keys(j, {"schema_version", "seed", "output_dir", "scenario", "data", "model", "train", "sweep"},
                     "config");
  if (!j.contains("schema_version")) throw ConfigError("config lacks schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion) {
    throw ConfigError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  ExperimentConfig c;
  detail::read_if(j, "seed", c.seed, "config");
  detail::read_if(j, "output_dir", c.output_dir, "config");
  if (j.contains("scenario")) {
    const Json& s = j["scenario"];
    detail::check_keys(s, {"kind", "labeled_fraction", "tl_puzzle_includes_source", "class_mapping"}, "scenario");
    if (s.contains("kind")) c.scenario = scenario_kind_from_string(s["kind"].get<std::string>());
    detail::read_if(s, "labeled_fraction", c.labeled_fraction, "scenario");
    detail::read_if(s, "tl_puzzle_includes_source", c.tl_puzzle_includes_source, "scenario");
    detail::read_if(s, "class_mapping", c.class_mapping, "scenario");
  }
  if (j.contains("data")) {
    const Json& d = j["data"];
    detail::check_keys(d, {"source", "test_fraction", "extra_unlabeled", "target"}, "data");
    if (d.contains("source")) c.source = data_source_from_json(d["source"], "data.source");
    detail::read_if(d, "test_fraction", c.test_fraction, "data");
    if (d.contains("extra_unlabeled")) {
      c.extra_unlabeled = data_source_from_json(d["extra_unlabeled"], "data.extra_unlabeled");
    }
    if (d.contains("target")) c.target = data_source_from_json(d["target"], "data.target");
  }
  if (j.contains("model")) {
    Json m = j["model"];
    if (m.is_object() && m.contains("puzzle_head")) {
      c.puzzle_head = m["puzzle_head"].get<bool>();
      m.erase("puzzle_head");
    }
    for (const char* derived : {"task", "num_classes", "num_parts", "num_voxels"}) {
      if (m.is_object() && m.contains(derived)) {
        throw ConfigError(std::string("model.") + derived + " is derived; set it through data/train");
      }
    }
    c.model = encoder_config_from_json(m, "model");
  }
  if (j.contains("train")) c.train = train_config_from_json(j["train"]);
  if (j.contains("sweep")) {
    const Json& s = j["sweep"];
    detail::check_keys(s, {"alphas", "ls", "repeats"}, "sweep");
    detail::read_if(s, "alphas", c.sweep.alphas, "sweep");
    detail::read_if(s, "ls", c.sweep.ls, "sweep");
    detail::read_if(s, "repeats", c.sweep.repeats, "sweep");
  }
  c.train.seed = c.seed;
  c.model.task = c.train.task;
  c.train.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace puzzlecloud
