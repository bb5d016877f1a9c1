// puzzlecloud: train, evaluate and sweep joint supervised + 3D-puzzle models.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "puzzlecloud.hpp"

namespace pc = puzzlecloud;

namespace {

pc::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  pc::ExperimentConfig config = pc::load_experiment_config(path);
  if (seed) {
    config.seed = *seed;
    config.train.seed = *seed;
  }
  return config;
}

void print_report(const pc::EvalReport& r) {
  std::cout << "task " << pc::to_string(r.task) << ", " << r.samples << " samples\n";
  if (r.task == pc::Task::classification) {
    std::cout << "accuracy " << pc::format_number(r.overall_accuracy) << '\n';
  } else {
    std::cout << "instance mIoU " << pc::format_number(r.iou->instance_miou) << ", class mIoU "
              << pc::format_number(r.iou->class_average_miou) << ", point accuracy "
              << pc::format_number(r.part_accuracy->overall) << ", mean per-part accuracy "
              << pc::format_number(r.part_accuracy->average) << '\n';
  }
  if (r.puzzle_accuracy) std::cout << "puzzle accuracy " << pc::format_number(*r.puzzle_accuracy) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint supervised and 3D-puzzle learning on point clouds"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, dataset_path, sample_path;
  std::optional<std::uint64_t> seed;
  int l = 3;
  std::uint64_t viz_seed = 0;

  auto* train = app.add_subcommand("train", "train on a configured scenario");
  train->add_option("--config", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "override the config seed");
  train->add_option("--out", out_dir, "output directory (default: config output_dir)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  auto* eval_dataset = eval->add_option("--dataset", dataset_path, "dataset directory with manifest.json");
  auto* eval_config = eval->add_option("--config", config_path, "experiment JSON; evaluates its eval set");
  eval_dataset->excludes(eval_config);
  eval->add_option("--seed", seed, "override the config seed");
  eval->add_option("--out", out_dir, "directory for eval_report.json");

  auto* sweep = app.add_subcommand("sweep", "run the alpha x l grid");
  sweep->add_option("--config", config_path, "experiment JSON with a sweep section")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--seed", seed, "override the config seed");
  sweep->add_option("--out", out_dir, "output directory (default: config output_dir)");

  auto* viz = app.add_subcommand("puzzle-viz", "color a puzzled sample by true and predicted voxel");
  viz->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  viz->add_option("--sample", sample_path, "ASCII PLY point file")->required()->check(CLI::ExistingFile);
  viz->add_option("--l", l, "intervals per axis; must match the checkpoint")->check(CLI::Range(2, 64));
  viz->add_option("--seed", viz_seed, "permutation seed");
  viz->add_option("--out", out_dir, "output directory")->required();

  auto* gen = app.add_subcommand("gen-data", "write the configured synthetic datasets as PLY");
  gen->add_option("--config", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "override the config seed");
  gen->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto config = load(config_path, seed);
      const std::string dir = out_dir.empty() ? config.output_dir : out_dir;
      print_report(pc::run_train(config, dir));
      std::cout << "wrote " << dir << "/train_log.csv, checkpoint.json, eval_report.json\n";
    } else if (*eval) {
      const pc::Trainer trainer = pc::load_checkpoint(checkpoint_path);
      pc::Dataset dataset;
      if (!dataset_path.empty()) {
        dataset = pc::load_dataset(dataset_path);
      } else if (!config_path.empty()) {
        dataset = pc::resolve(pc::build_scenario(load(config_path, seed))).eval_set;
      } else {
        std::cerr << "eval needs --dataset or --config\n";
        return 2;
      }
      const pc::EvalReport report = pc::run_eval(trainer, dataset);
      print_report(report);
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        pc::write_json(std::filesystem::path(out_dir) / "eval_report.json", pc::to_json(report));
      }
    } else if (*sweep) {
      const auto config = load(config_path, seed);
      const std::string dir = out_dir.empty() ? config.output_dir : out_dir;
      const auto cells = pc::run_sweep(config, dir);
      std::size_t failed = 0;
      for (const auto& c : cells) failed += c.repeats - c.completed;
      std::cout << cells.size() << " cells, " << failed << " failed runs; wrote " << dir
                << "/sweep_summary.csv and sweep_runs.csv\n";
      return failed ? 1 : 0;
    } else if (*viz) {
      const pc::Trainer trainer = pc::load_checkpoint(checkpoint_path);
      const pc::PointCloud sample = pc::read_ply_points(sample_path);
      const auto result = pc::run_puzzle_viz(trainer, sample, l, viz_seed, out_dir);
      std::cout << "puzzle accuracy " << pc::format_number(result.accuracy) << " over "
                << result.truth.size() << " points (chance " << pc::format_number(1.0 / (l * l * l))
                << ")\n";
    } else if (*gen) {
      const auto config = load(config_path, seed);
      pc::run_gen_data(config, out_dir);
      std::cout << "wrote datasets under " << out_dir << '\n';
    }
  } catch (const pc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
