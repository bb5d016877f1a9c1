#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "puzzlecloud/config.hpp"
#include "puzzlecloud/model.hpp"
#include "puzzlecloud/training.hpp"

namespace puzzlecloud {

namespace detail {

inline std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

inline void set_rng_state(std::mt19937_64& rng, const std::string& text) {
  std::istringstream in(text);
  in >> rng;
  if (!in) throw StateError("unreadable RNG state in checkpoint");
}

}  // namespace detail

// Everything needed to resume or evaluate a run. Doubles go through JSON
// with round-trip precision, so a reload reproduces forward outputs bitwise.
inline Json checkpoint_to_json(const Trainer& trainer, const Json& experiment_echo = Json::object()) {
  const PointNetModel& model = trainer.model();
  Json params = Json::array();
  for (const Parameter& p : model.params()) {
    params.push_back({{"name", p.name},
                      {"group", std::string(to_string(p.group))},
                      {"shape", p.tensor.shape()},
                      {"data", std::vector<double>(p.tensor.data().begin(), p.tensor.data().end())}});
  }
  Json stats = Json::array();
  for (const RunningStats& s : model.running_stats()) {
    stats.push_back({{"mean", s.mean}, {"variance", s.variance}});
  }
  const OptimizerState& opt = trainer.optimizer();
  Json optimizer{{"kind", opt.kind == OptimizerKind::adam ? "adam" : "sgd_momentum"},
                 {"base_lr", opt.base_lr},
                 {"step", opt.step},
                 {"adam", {{"beta1", opt.adam.beta1}, {"beta2", opt.adam.beta2}, {"epsilon", opt.adam.epsilon}}},
                 {"sgd", {{"momentum", opt.sgd.momentum}}},
                 {"first_moment", opt.first_moment},
                 {"second_moment", opt.second_moment},
                 {"velocity", opt.velocity}};
  return Json{{"schema_version", kSchemaVersion},
              {"experiment", experiment_echo},
              {"encoder", to_json(model.config())},
              {"train", to_json(trainer.config())},
              {"seed", trainer.config().seed},
              {"epoch", trainer.epochs_done()},
              {"params", params},
              {"running_stats", stats},
              {"optimizer", optimizer},
              {"rng",
               {{"main", detail::rng_state(trainer.main_rng())},
                {"puzzle", detail::rng_state(trainer.puzzle_rng())}}},
              {"puzzle_cursor",
               {{"order", trainer.puzzle_cursor().order},
                {"position", trainer.puzzle_cursor().position}}}};
}

inline Trainer trainer_from_checkpoint(const Json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw StateError("unsupported checkpoint schema_version");
    }
    const EncoderConfig encoder = encoder_config_from_json(j.at("encoder"), "checkpoint.encoder");
    TrainConfig train = train_config_from_json(j.at("train"), "checkpoint.train");
    train.seed = j.at("seed").get<std::uint64_t>();
    PointNetModel model(encoder, 0);

    const Json& params = j.at("params");
    if (params.size() != model.params().size()) {
      throw StateError("checkpoint has " + std::to_string(params.size()) + " parameters, model has " +
                       std::to_string(model.params().size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = model.params()[i];
      const Json& entry = params[i];
      if (entry.at("name").get<std::string>() != p.name ||
          entry.at("group").get<std::string>() != std::string(to_string(p.group)) ||
          entry.at("shape").get<Shape>() != p.tensor.shape()) {
        throw StateError("checkpoint parameter " + std::to_string(i) + " does not match '" + p.name + "'");
      }
      const auto data = entry.at("data").get<std::vector<double>>();
      if (data.size() != p.tensor.numel()) throw StateError("checkpoint data size mismatch for '" + p.name + "'");
      std::copy(data.begin(), data.end(), p.tensor.mutable_data().begin());
    }
    const Json& stats = j.at("running_stats");
    if (stats.size() != model.running_stats().size()) throw StateError("running-stat count mismatch");
    for (std::size_t i = 0; i < stats.size(); ++i) {
      model.running_stats()[i].mean = stats[i].at("mean").get<std::vector<double>>();
      model.running_stats()[i].variance = stats[i].at("variance").get<std::vector<double>>();
    }

    Trainer trainer(std::move(model), train);
    const Json& o = j.at("optimizer");
    OptimizerState& opt = trainer.optimizer();
    opt.kind = o.at("kind").get<std::string>() == "adam" ? OptimizerKind::adam : OptimizerKind::sgd_momentum;
    opt.base_lr = o.at("base_lr").get<double>();
    opt.step = o.at("step").get<std::uint64_t>();
    opt.adam = {o.at("adam").at("beta1").get<double>(), o.at("adam").at("beta2").get<double>(),
                o.at("adam").at("epsilon").get<double>()};
    opt.sgd.momentum = o.at("sgd").at("momentum").get<double>();
    opt.first_moment = o.at("first_moment").get<std::vector<std::vector<double>>>();
    opt.second_moment = o.at("second_moment").get<std::vector<std::vector<double>>>();
    opt.velocity = o.at("velocity").get<std::vector<std::vector<double>>>();
    detail::set_rng_state(trainer.main_rng(), j.at("rng").at("main").get<std::string>());
    detail::set_rng_state(trainer.puzzle_rng(), j.at("rng").at("puzzle").get<std::string>());
    trainer.puzzle_cursor().order = j.at("puzzle_cursor").at("order").get<std::vector<std::size_t>>();
    trainer.puzzle_cursor().position = j.at("puzzle_cursor").at("position").get<std::size_t>();
    trainer.set_epochs_done(j.at("epoch").get<std::size_t>());
    return trainer;
  } catch (const nlohmann::json::exception& e) {
    throw StateError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const Trainer& trainer,
                            const Json& experiment_echo = Json::object()) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(trainer, experiment_echo).dump() << '\n';
  if (!out) throw ConfigError("failed writing checkpoint '" + path + "'");
}

inline Trainer load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StateError("cannot open checkpoint '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw StateError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return trainer_from_checkpoint(j);
}

}  // namespace puzzlecloud
