// Trains a small multi-task classifier on generated shapes and reports
// classification and puzzle accuracy on a held-out split.

#include <iostream>

#include "puzzlecloud.hpp"

namespace pc = puzzlecloud;

int main() {
  const pc::Dataset all = pc::generate_dataset(pc::builtin_recipes(), 10, 128, pc::clean_profile(), 1);
  auto [train, test] = pc::split(all, 0.2, 1);

  pc::ScenarioSpec spec;
  spec.kind = pc::ScenarioKind::SD;
  spec.source_train = train;
  spec.source_test = test;
  const pc::ResolvedScenario data = pc::resolve(spec);

  pc::EncoderConfig encoder;
  encoder.per_point_mlp_widths = {32, 32, 64};
  encoder.head_widths_classification = {32};
  encoder.head_widths_per_point = {32};
  encoder.num_classes = train.class_names.size();

  pc::TrainConfig config;
  config.batch_size = 8;
  config.epochs = 15;
  config.seed = 7;

  pc::Trainer trainer(pc::PointNetModel(encoder, config.seed), config);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const pc::EpochStats s = trainer.train_epoch(data.main_stream, data.puzzle_stream);
    std::cout << "epoch " << s.epoch << "  loss " << pc::format_number(s.total_loss) << "  train acc "
              << pc::format_number(s.main_metric) << "  puzzle acc " << pc::format_number(s.puzzle_accuracy)
              << '\n';
  }
  const pc::EvalReport report = trainer.evaluate(data.eval_set);
  std::cout << "test accuracy " << pc::format_number(report.main_metric) << ", puzzle accuracy "
            << pc::format_number(*report.puzzle_accuracy) << " (chance " << pc::format_number(1.0 / 27) << ")\n";
}
