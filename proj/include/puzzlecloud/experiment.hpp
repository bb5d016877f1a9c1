#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "puzzlecloud/checkpoint.hpp"
#include "puzzlecloud/config.hpp"
#include "puzzlecloud/datagen.hpp"
#include "puzzlecloud/io.hpp"
#include "puzzlecloud/settings.hpp"
#include "puzzlecloud/training.hpp"

namespace puzzlecloud {

namespace fs = std::filesystem;

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline Dataset materialize(const DataSource& source) {
  if (source.path) return load_dataset(*source.path);
  return generate_dataset(builtin_recipes(), source.samples_per_class, source.k_points,
                          profile_from_name(source.profile), source.seed);
}

// Loads or generates every dataset the experiment names and splits the
// source into S_train / S_test.
inline ScenarioSpec build_scenario(const ExperimentConfig& config) {
  ScenarioSpec spec;
  spec.kind = config.scenario;
  auto [train, test] = split(materialize(config.source), config.test_fraction, config.seed);
  spec.source_train = std::move(train);
  spec.source_test = std::move(test);
  if (config.extra_unlabeled) spec.extra_unlabeled = materialize(*config.extra_unlabeled);
  if (config.target) spec.target = materialize(*config.target);
  spec.labeled_fraction = config.labeled_fraction;
  spec.seed = config.seed;
  spec.tl_puzzle_includes_source = config.tl_puzzle_includes_source;
  spec.class_mapping = config.class_mapping;
  return spec;
}

// Fills the data-dependent model sizes.
inline EncoderConfig resolve_encoder(const ExperimentConfig& config, const Dataset& labeled) {
  EncoderConfig enc = config.model;
  enc.task = config.train.task;
  enc.num_classes = labeled.class_names.size();
  enc.num_parts = static_cast<std::size_t>(labeled.num_parts.value_or(0));
  enc.num_voxels = config.puzzle_head ? static_cast<std::size_t>(PuzzleConfig(config.train.puzzle_l).num_voxels()) : 0;
  return enc;
}

inline Json to_json(const EvalReport& r) {
  Json j{{"task", to_string(r.task)},
         {"samples", r.samples},
         {"main_metric", r.main_metric},
         {"overall_accuracy", r.overall_accuracy}};
  if (r.task == Task::classification) {
    Json per_class = Json::object();
    for (const auto& [c, v] : r.per_class_accuracy) per_class[std::to_string(c)] = v;
    j["per_class_accuracy"] = per_class;
  }
  if (r.iou) {
    Json cat = Json::object();
    for (const auto& [c, v] : r.iou->category_miou) cat[std::to_string(c)] = v;
    j["miou"] = {{"instance", r.iou->instance_miou},
                 {"class_average", r.iou->class_average_miou},
                 {"per_category", cat}};
  }
  if (r.part_accuracy) {
    Json per_part = Json::object();
    for (const auto& [p, v] : r.part_accuracy->per_part) per_part[std::to_string(p)] = v;
    j["part_accuracy"] = {{"per_part", per_part},
                          {"average_over_parts", r.part_accuracy->average},
                          {"overall", r.part_accuracy->overall}};
  }
  if (r.puzzle_accuracy) j["puzzle_accuracy"] = *r.puzzle_accuracy;
  return j;
}

inline const char* kTrainCsvHeader = "epoch,lr,main_loss,puzzle_loss,total_loss,train_metric,puzzle_acc";

inline std::string csv_row(const EpochStats& s) {
  return std::to_string(s.epoch) + "," + format_number(s.lr) + "," + format_number(s.main_loss) + "," +
         format_number(s.puzzle_loss) + "," + format_number(s.total_loss) + "," +
         format_number(s.main_metric) + "," + format_number(s.puzzle_accuracy);
}

struct TrainOutcome {
  std::vector<EpochStats> history;
  EvalReport report;
  std::optional<Trainer> trainer;
};

// Trains on a resolved scenario and evaluates on its eval set. Rows are
// streamed to `csv` when given.
inline TrainOutcome train_on(const ExperimentConfig& config, const ResolvedScenario& data,
                             std::ostream* csv = nullptr) {
  PointNetModel model(resolve_encoder(config, data.main_stream), config.seed);
  TrainConfig train = config.train;
  train.seed = config.seed;
  TrainOutcome out;
  out.trainer.emplace(std::move(model), train);
  if (csv) *csv << kTrainCsvHeader << '\n';
  for (std::size_t e = 0; e < train.epochs; ++e) {
    out.history.push_back(out.trainer->train_epoch(data.main_stream, data.puzzle_stream));
    if (csv) *csv << csv_row(out.history.back()) << '\n' << std::flush;
  }
  out.report = out.trainer->evaluate(data.eval_set);
  return out;
}

inline void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

// Writes train_log.csv, checkpoint.json and eval_report.json under `out_dir`.
inline EvalReport run_train(const ExperimentConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const ResolvedScenario data = resolve(build_scenario(config));
  std::ofstream csv(out_dir / "train_log.csv");
  if (!csv) throw ConfigError("cannot write '" + (out_dir / "train_log.csv").string() + "'");
  TrainOutcome outcome = train_on(config, data, &csv);
  save_checkpoint((out_dir / "checkpoint.json").string(), *outcome.trainer, to_json(config));
  Json report = to_json(outcome.report);
  report["scenario"] = to_string(config.scenario);
  report["main_stream"] = data.main_stream.size();
  report["puzzle_stream"] = data.puzzle_stream.size();
  report["eval_set"] = data.eval_set.size();
  write_json(out_dir / "eval_report.json", report);
  return outcome.report;
}

// Evaluates a checkpoint on a labeled dataset, refusing a label space that
// differs from the one the model was trained on.
inline EvalReport run_eval(const Trainer& trainer, const Dataset& dataset) {
  const EncoderConfig& enc = trainer.model().config();
  if (enc.task == Task::classification && enc.num_classes != dataset.class_names.size()) {
    throw ConfigError("checkpoint predicts " + std::to_string(enc.num_classes) + " classes, dataset has " +
                      std::to_string(dataset.class_names.size()));
  }
  if (enc.task == Task::segmentation &&
      enc.num_parts != static_cast<std::size_t>(dataset.num_parts.value_or(0))) {
    throw ConfigError("checkpoint predicts " + std::to_string(enc.num_parts) + " parts, dataset has " +
                      std::to_string(dataset.num_parts.value_or(0)));
  }
  return trainer.evaluate(dataset);
}

struct SweepRun {
  double alpha = 0.0;
  int l = 3;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double main_metric = 0.0;
  double puzzle_accuracy = 0.0;
  double final_total_loss = 0.0;
};

struct SweepCell {
  double alpha = 0.0;
  int l = 3;
  std::size_t completed = 0;
  std::size_t repeats = 0;
  double metric_mean = 0.0, metric_std = 0.0;
  double puzzle_mean = 0.0, puzzle_std = 0.0;
};

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline std::size_t sweep_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PUZZLECLOUD_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
  }
  return n;
}

// Every (alpha, l) cell times `repeats` seeds (config seed + repeat). Data
// are resolved once and shared read-only. A failed run is recorded and the
// rest proceed. Writes sweep_runs.csv and sweep_summary.csv.
inline std::vector<SweepCell> run_sweep(const ExperimentConfig& config, const fs::path& out_dir) {
  if (config.sweep.alphas.empty() || config.sweep.ls.empty() || config.sweep.repeats < 1) {
    throw ConfigError("sweep grid is empty");
  }
  fs::create_directories(out_dir);
  const ResolvedScenario data = resolve(build_scenario(config));

  std::vector<SweepRun> runs;
  for (double alpha : config.sweep.alphas)
    for (int l : config.sweep.ls)
      for (std::size_t r = 0; r < config.sweep.repeats; ++r) {
        SweepRun run;
        run.alpha = alpha;
        run.l = l;
        run.repeat = r;
        run.seed = config.seed + r;
        runs.push_back(run);
      }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      SweepRun& run = runs[i];
      try {
        ExperimentConfig cell = config;
        cell.seed = run.seed;
        cell.train.alpha = run.alpha;
        cell.train.puzzle_l = run.l;
        TrainOutcome outcome = train_on(cell, data);
        run.main_metric = outcome.report.main_metric;
        run.puzzle_accuracy = outcome.report.puzzle_accuracy.value_or(std::nan(""));
        run.final_total_loss = outcome.history.back().total_loss;
        run.ok = true;
      } catch (const std::exception& e) {
        run.error = e.what();
      }
    }
  };
  const std::size_t threads = std::min(sweep_threads(), runs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ofstream runs_csv(out_dir / "sweep_runs.csv");
  runs_csv << "alpha,l,repeat,seed,status,main_metric,puzzle_acc,final_total_loss\n";
  for (const SweepRun& r : runs) {
    std::string status = r.ok ? "ok" : "failed: " + r.error;
    for (char& ch : status)
      if (ch == ',' || ch == '\n') ch = ';';
    runs_csv << format_number(r.alpha) << ',' << r.l << ',' << r.repeat << ',' << r.seed << ',' << status << ','
             << format_number(r.main_metric) << ',' << format_number(r.puzzle_accuracy) << ','
             << format_number(r.final_total_loss) << '\n';
  }

  std::vector<SweepCell> cells;
  std::ofstream summary(out_dir / "sweep_summary.csv");
  summary << "alpha,l,repeats,completed,main_metric_mean,main_metric_std,puzzle_acc_mean,puzzle_acc_std\n";
  for (std::size_t start = 0; start < runs.size(); start += config.sweep.repeats) {
    SweepCell cell;
    cell.alpha = runs[start].alpha;
    cell.l = runs[start].l;
    cell.repeats = config.sweep.repeats;
    std::vector<double> metric, puzzle;
    for (std::size_t i = start; i < start + config.sweep.repeats; ++i) {
      if (!runs[i].ok) continue;
      metric.push_back(runs[i].main_metric);
      puzzle.push_back(runs[i].puzzle_accuracy);
    }
    cell.completed = metric.size();
    std::tie(cell.metric_mean, cell.metric_std) = mean_std(metric);
    std::tie(cell.puzzle_mean, cell.puzzle_std) = mean_std(puzzle);
    summary << format_number(cell.alpha) << ',' << cell.l << ',' << cell.repeats << ',' << cell.completed << ','
            << format_number(cell.metric_mean) << ',' << format_number(cell.metric_std) << ','
            << format_number(cell.puzzle_mean) << ',' << format_number(cell.puzzle_std) << '\n';
    cells.push_back(cell);
  }
  return cells;
}

struct PuzzleViz {
  double accuracy = 0.0;
  std::vector<int> truth;
  std::vector<int> predicted;
};

// Puzzles one sample, predicts each point's original voxel and writes
// puzzle_truth.ply, puzzle_pred.ply and puzzle_mask.ply (shuffled points
// colored by true voxel, predicted voxel, and agreement).
inline PuzzleViz run_puzzle_viz(const Trainer& trainer, const PointCloud& sample, int l,
                                std::uint64_t seed, const fs::path& out_dir) {
  const PointNetModel& model = trainer.model();
  if (!model.has_puzzle_head()) throw ConfigError("checkpoint has no puzzle head");
  const PuzzleConfig puzzle_config(l);
  if (static_cast<std::size_t>(puzzle_config.num_voxels()) != model.config().num_voxels) {
    throw ConfigError("requested l=" + std::to_string(l) + " but the checkpoint was trained with " +
                      std::to_string(model.config().num_voxels) + " voxels");
  }
  std::mt19937_64 rng(seed);
  const PuzzledSample puzzled = apply_puzzle(sample, puzzle_config, rng);

  PointNetModel eval_model = model;
  NoGradGuard no_grad;
  ForwardContext ctx{false, nullptr, false};
  const std::vector<const std::vector<Point3>*> batch{&puzzled.shuffled_points};
  const Encoded encoded = eval_model.encode(make_point_batch(batch), ctx);

  PuzzleViz out;
  out.truth = puzzled.voxel_labels;
  out.predicted = argmax_rows(eval_model.solve_puzzle(encoded, ctx));
  out.accuracy = puzzle_accuracy(out.predicted, out.truth);

  fs::create_directories(out_dir);
  PointCloud shuffled;
  shuffled.points = puzzled.shuffled_points;
  write_ply_colored((out_dir / "puzzle_truth.ply").string(), shuffled, out.truth);
  write_ply_colored((out_dir / "puzzle_pred.ply").string(), shuffled, out.predicted);
  std::vector<Rgb> mask;
  for (std::size_t i = 0; i < out.truth.size(); ++i) {
    mask.push_back(out.truth[i] == out.predicted[i] ? Rgb{200, 200, 200} : Rgb{230, 25, 75});
  }
  write_ply_points((out_dir / "puzzle_mask.ply").string(), shuffled, &mask);
  return out;
}

// Writes the configured datasets as PLY directories with manifests.
inline void run_gen_data(const ExperimentConfig& config, const fs::path& out_dir) {
  save_dataset(out_dir / "source", materialize(config.source));
  if (config.extra_unlabeled) save_dataset(out_dir / "extra_unlabeled", materialize(*config.extra_unlabeled));
  if (config.target) save_dataset(out_dir / "target", materialize(*config.target));
}

}  // namespace puzzlecloud
