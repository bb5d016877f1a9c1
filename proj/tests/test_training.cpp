#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace puzzlecloud;
using fixture::quick_train;
using fixture::small_dataset;
using fixture::tiny_encoder;

TEST(LrSchedule, AdamClassificationRecipe) {
  TrainConfig t;
  EXPECT_DOUBLE_EQ(lr_at_epoch(t, 0), 0.001);
  EXPECT_DOUBLE_EQ(lr_at_epoch(t, 19), 0.001);
  EXPECT_DOUBLE_EQ(lr_at_epoch(t, 20), 0.00025);
  EXPECT_DOUBLE_EQ(lr_at_epoch(t, 40), 0.0000625);
}

TEST(LrSchedule, PresetsAndMonotonicity) {
  for (OptimizerPreset p : {OptimizerPreset::adam, OptimizerPreset::sgd, OptimizerPreset::adam_seg}) {
    TrainConfig t;
    t.optimizer = p;
    for (std::size_t e = 1; e < 200; ++e) EXPECT_LE(lr_at_epoch(t, e), lr_at_epoch(t, e - 1));
  }
  TrainConfig sgd;
  sgd.optimizer = OptimizerPreset::sgd;
  EXPECT_DOUBLE_EQ(lr_at_epoch(sgd, 0), 0.01);
  EXPECT_DOUBLE_EQ(lr_at_epoch(sgd, 20), 0.005);
  TrainConfig seg;
  seg.optimizer = OptimizerPreset::adam_seg;
  EXPECT_DOUBLE_EQ(lr_at_epoch(seg, 20), 0.0005);
  EXPECT_EQ(optimizer_preset_from_string(to_string(OptimizerPreset::adam_seg)), OptimizerPreset::adam_seg);
  EXPECT_THROW(optimizer_preset_from_string("rmsprop"), ConfigError);
}

TEST(TrainConfig, Validation) {
  TrainConfig t;
  t.alpha = -0.1;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.epochs = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.puzzle_l = 1;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(JointLoss, WeightedSum) {
  // Uniform logits over 2 and 4 classes give ln 2 and ln 4.
  const Tensor main({2, 2}, std::vector<double>(4, 0.0), true);
  const Tensor puzzle({3, 4}, std::vector<double>(12, 0.0), true);
  const std::vector<int> mt{0, 1}, pt{0, 1, 3};
  const JointLoss l = joint_loss(main, mt, puzzle, pt, 0.6);
  EXPECT_NEAR(l.main, std::log(2.0), 1e-15);
  EXPECT_NEAR(l.puzzle, std::log(4.0), 1e-15);
  EXPECT_EQ(l.total.item(), l.main + 0.6 * l.puzzle);
  EXPECT_THROW(joint_loss(main, mt, puzzle, pt, -1.0), ConfigError);
}

TEST(JointLoss, AlphaOneWithIdenticalHeads) {
  const Tensor logits({3, 3}, {0.2, -1.0, 0.5, 1.5, 0.0, 0.0, -0.3, 0.3, 2.0}, true);
  const std::vector<int> targets{2, 0, 1};
  const JointLoss l = joint_loss(logits, targets, logits, targets, 1.0);
  EXPECT_EQ(l.total.item(), 2.0 * l.main);
}

TEST(JointLoss, AlphaZeroDropsPuzzleGradient) {
  Tensor main({1, 2}, {0.3, -0.2}, true);
  Tensor puzzle({2, 2}, {1.0, 0.0, 0.0, 1.0}, true);
  const std::vector<int> mt{1}, pt{1, 1};
  const JointLoss l = joint_loss(main, mt, puzzle, pt, 0.0);
  EXPECT_EQ(l.total.item(), l.main);
  EXPECT_GT(l.puzzle, 0.0);
  l.total.backward();
  EXPECT_TRUE(main.has_grad());
  if (puzzle.has_grad()) {
    for (double g : puzzle.grad()) EXPECT_EQ(g, 0.0);
  }
}

TEST(CyclingCursor, CoversStreamBeforeRepeating) {
  std::mt19937_64 rng(1);
  CyclingCursor cursor;
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 21; ++i) ++seen[cursor.next(7, rng)];
  for (int s : seen) EXPECT_EQ(s, 3);
}

TEST(Trainer, ConstructorChecks) {
  const Dataset d = small_dataset(2);
  EXPECT_THROW(Trainer(PointNetModel(tiny_encoder(d, Task::classification, 2), 1),
                       quick_train(Task::segmentation, 0.5)),
               ConfigError);
  EXPECT_THROW(Trainer(PointNetModel(tiny_encoder(d, Task::classification, 3), 1),
                       quick_train(Task::classification, 0.5, 2)),
               ConfigError);
  EncoderConfig base = tiny_encoder(d, Task::classification);
  base.num_voxels = 0;
  EXPECT_THROW(Trainer(PointNetModel(base, 1), quick_train(Task::classification, 0.5)), ConfigError);
  EXPECT_NO_THROW(Trainer(PointNetModel(base, 1), quick_train(Task::classification, 0.0)));
}

TEST(Trainer, EmptyStreams) {
  const Dataset d = small_dataset(2);
  Trainer t(PointNetModel(tiny_encoder(d, Task::classification), 1), quick_train(Task::classification, 0.6));
  EXPECT_THROW(t.train_epoch(d.empty_like(), fixture::unlabeled(d)), ConfigError);
  EXPECT_THROW(t.train_epoch(d, {}), ConfigError);
}

TEST(Trainer, StepsPerEpochIsCeilOfMainStream) {
  const Dataset d = small_dataset(3);  // 12 samples
  const auto puzzles = fixture::unlabeled(small_dataset(1, 9));  // 4 clouds, cycled
  TrainConfig cfg = quick_train(Task::classification, 0.6);
  cfg.batch_size = 5;
  Trainer t(PointNetModel(tiny_encoder(d, Task::classification), 1), cfg);
  t.train_epoch(d, puzzles);
  EXPECT_EQ(t.optimizer().step, 3u);
  t.train_epoch(d, puzzles);
  EXPECT_EQ(t.optimizer().step, 6u);
  EXPECT_EQ(t.epochs_done(), 2u);
}

TEST(Trainer, SeededRunsAreIdentical) {
  const Dataset d = small_dataset(2);
  const auto puzzles = fixture::unlabeled(d);
  auto run = [&] {
    Trainer t(PointNetModel(tiny_encoder(d, Task::segmentation), 3), quick_train(Task::segmentation, 0.6));
    std::vector<EpochStats> history;
    for (int e = 0; e < 2; ++e) history.push_back(t.train_epoch(d, puzzles));
    return std::make_pair(history, t.model().params().clone());
  };
  const auto [h1, p1] = run();
  const auto [h2, p2] = run();
  ASSERT_EQ(h1.size(), h2.size());
  for (std::size_t i = 0; i < h1.size(); ++i) {
    EXPECT_EQ(h1[i].main_loss, h2[i].main_loss);
    EXPECT_EQ(h1[i].puzzle_loss, h2[i].puzzle_loss);
    EXPECT_EQ(h1[i].total_loss, h2[i].total_loss);
    EXPECT_EQ(h1[i].main_metric, h2[i].main_metric);
    EXPECT_EQ(h1[i].puzzle_accuracy, h2[i].puzzle_accuracy);
    EXPECT_TRUE(std::isfinite(h1[i].total_loss));
    EXPECT_GE(h1[i].total_loss, 0.0);
  }
  EXPECT_TRUE(fixture::same_values(p1, p2));
}

TEST(Trainer, AlphaZeroMatchesBaselineTrajectory) {
  const Dataset d = small_dataset(2);
  const auto puzzles = fixture::unlabeled(d);
  EncoderConfig base_cfg = tiny_encoder(d, Task::classification);
  base_cfg.num_voxels = 0;
  Trainer multi(PointNetModel(tiny_encoder(d, Task::classification), 4), quick_train(Task::classification, 0.0));
  Trainer base(PointNetModel(base_cfg, 4), quick_train(Task::classification, 0.0));
  std::vector<double> puzzle_before;
  for (const Parameter& p : multi.model().params())
    if (p.group == ParamGroup::puzzle_head) puzzle_before.insert(puzzle_before.end(), p.tensor.data().begin(), p.tensor.data().end());
  for (int e = 0; e < 3; ++e) {
    const EpochStats sm = multi.train_epoch(d, puzzles);
    const EpochStats sb = base.train_epoch(d, {});
    EXPECT_EQ(sm.main_loss, sb.main_loss);
    EXPECT_EQ(sm.total_loss, sm.main_loss);
    EXPECT_GT(sm.puzzle_loss, 0.0);
    for (const Parameter& p : base.model().params()) {
      const Parameter* twin = multi.model().params().find(p.name);
      ASSERT_NE(twin, nullptr);
      EXPECT_TRUE(std::equal(p.tensor.data().begin(), p.tensor.data().end(), twin->tensor.data().begin()))
          << p.name << " epoch " << e;
    }
  }
  std::vector<double> puzzle_after;
  for (const Parameter& p : multi.model().params())
    if (p.group == ParamGroup::puzzle_head) puzzle_after.insert(puzzle_after.end(), p.tensor.data().begin(), p.tensor.data().end());
  EXPECT_EQ(puzzle_before, puzzle_after);
}

TEST(Trainer, EvaluateSegmentationReport) {
  const Dataset d = small_dataset(2);
  Trainer t(PointNetModel(tiny_encoder(d, Task::segmentation), 6), quick_train(Task::segmentation, 0.6));
  t.train_epoch(d, fixture::unlabeled(d));
  const EvalReport a = t.evaluate(d);
  const EvalReport b = t.evaluate(d);
  ASSERT_TRUE(a.iou && a.part_accuracy && a.puzzle_accuracy);
  EXPECT_EQ(a.iou->category_miou.size(), 4u);
  EXPECT_EQ(a.main_metric, a.iou->instance_miou);
  EXPECT_EQ(a.overall_accuracy, a.part_accuracy->overall);
  EXPECT_EQ(a.samples, d.size());
  EXPECT_EQ(a.main_metric, b.main_metric);
  EXPECT_EQ(*a.puzzle_accuracy, *b.puzzle_accuracy);
  for (double v : {a.main_metric, a.overall_accuracy, *a.puzzle_accuracy}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Trainer, EvaluateNeedsLabels) {
  Dataset d = small_dataset(2);
  Trainer t(PointNetModel(tiny_encoder(d, Task::classification), 7), quick_train(Task::classification, 0.6));
  EXPECT_THROW(t.evaluate(d.empty_like()), ConfigError);
  d.samples[1].class_label.reset();
  EXPECT_THROW(t.evaluate(d), ConfigError);
}

TEST(Trainer, MemorizedTrainingSetScoresPerfectly) {
  // Two well separated clouds; a few hundred steps memorize them.
  Dataset d;
  d.class_names = {"low", "high"};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < 2; ++c) {
    PointCloud cloud;
    for (int i = 0; i < 16; ++i) cloud.points.push_back({u(rng), c == 0 ? -u(rng) : u(rng), u(rng)});
    cloud.class_label = c;
    cloud.source_id = std::to_string(c);
    d.samples.push_back(cloud);
  }
  EncoderConfig enc = tiny_encoder(d, Task::classification);
  enc.num_voxels = 0;
  TrainConfig cfg = quick_train(Task::classification, 0.0);
  cfg.augment = {false, false};
  cfg.base_lr = 0.01;
  Trainer t(PointNetModel(enc, 9), cfg);
  for (int e = 0; e < 100; ++e) t.train_epoch(d, {});
  EXPECT_EQ(t.evaluate(d).main_metric, 1.0);
}
