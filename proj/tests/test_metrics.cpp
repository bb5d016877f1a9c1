#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "puzzlecloud/metrics.hpp"

using namespace puzzlecloud;

namespace {

std::vector<int> random_labels(std::size_t n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, classes - 1);
  std::vector<int> v(n);
  for (int& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(OverallAccuracy, Cases) {
  const std::vector<int> t{0, 1, 2, 3};
  EXPECT_EQ(overall_accuracy(t, t), 1.0);
  EXPECT_EQ(overall_accuracy(std::vector<int>{0, 1, 2, 0}, t), 0.75);
  EXPECT_THROW(overall_accuracy(std::vector<int>{0}, t), DimensionError);
  EXPECT_THROW(overall_accuracy(std::vector<int>{}, std::vector<int>{}), DimensionError);
}

TEST(ShapeMiou, WorkedExample) {
  // Points 1..4 are indices 0..3; A = 0, B = 1.
  const std::vector<int> truth{0, 0, 1, 1};
  const std::vector<int> pred{0, 0, 0, 1};
  EXPECT_DOUBLE_EQ(shape_miou(pred, truth, std::vector<int>{0, 1}), 7.0 / 12.0);
  EXPECT_EQ(shape_miou(truth, truth, std::vector<int>{0, 1}), 1.0);
}

TEST(ShapeMiou, EmptyUnionCountsAsOne) {
  const std::vector<int> truth{0, 0, 1, 1};
  EXPECT_EQ(shape_miou(truth, truth, std::vector<int>{0, 1, 2}), 1.0);
  const std::vector<int> pred{0, 0, 0, 1};
  EXPECT_DOUBLE_EQ(shape_miou(pred, truth, std::vector<int>{0, 1, 2}), (2.0 / 3.0 + 0.5 + 1.0) / 3.0);
  EXPECT_THROW(shape_miou(pred, truth, std::vector<int>{}), ConfigError);
}

TEST(ShapeMiou, InvariantUnderPointPermutation) {
  std::mt19937_64 rng(1);
  const std::vector<int> parts{0, 1, 2, 3};
  for (int t = 0; t < 20; ++t) {
    auto pred = random_labels(30, 4, rng), truth = random_labels(30, 4, rng);
    const double before = shape_miou(pred, truth, parts);
    std::vector<std::size_t> order(30);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> p2, t2;
    for (std::size_t i : order) {
      p2.push_back(pred[i]);
      t2.push_back(truth[i]);
    }
    EXPECT_DOUBLE_EQ(shape_miou(p2, t2, parts), before);
  }
}

TEST(CategoryMiou, Cases) {
  const std::vector<double> one{0.3, 0.8};
  const std::vector<int> cats{0, 1};
  const IoUReport r = category_miou(one, cats);
  EXPECT_EQ(r.category_miou.at(0), 0.3);
  EXPECT_EQ(r.category_miou.at(1), 0.8);
  const IoUReport pair = category_miou(std::vector<double>{0.5, 1.0}, std::vector<int>{2, 2});
  EXPECT_EQ(pair.category_miou.at(2), 0.75);
  EXPECT_EQ(pair.instance_miou, 0.75);
}

TEST(PerPartAccuracy, HandCount) {
  const std::vector<int> truth{0, 0, 1, 1};
  const std::vector<int> pred{0, 1, 1, 1};
  const PartAccuracy a = per_part_accuracy(pred, truth);
  EXPECT_EQ(a.per_part.at(0), 0.5);
  EXPECT_EQ(a.per_part.at(1), 1.0);
  EXPECT_EQ(a.average, 0.75);
  EXPECT_EQ(a.overall, 0.75);
  // Part 2 only appears in the prediction and is excluded.
  const PartAccuracy b = per_part_accuracy(std::vector<int>{2, 0, 1, 1}, truth);
  EXPECT_EQ(b.per_part.count(2), 0u);
  EXPECT_EQ(b.average, 0.75);
}

TEST(Metrics, MatchBruteForceOnRandomInstances) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const int parts = 2 + t % 5;
    const std::size_t k = 5 + static_cast<std::size_t>(t % 17);
    const auto pred = random_labels(k, parts, rng), truth = random_labels(k, parts, rng);
    std::vector<int> ids(static_cast<std::size_t>(parts));
    std::iota(ids.begin(), ids.end(), 0);
    EXPECT_EQ(shape_miou(pred, truth, ids), oracle::shape_miou(pred, truth, ids));
    EXPECT_EQ(overall_accuracy(pred, truth), oracle::accuracy(pred, truth));
    const PartAccuracy pa = per_part_accuracy(pred, truth);
    const oracle::PartMeans pm = oracle::part_means(pred, truth);
    EXPECT_EQ(pa.per_part, pm.per_part);
    EXPECT_EQ(pa.average, pm.average);
    EXPECT_EQ(pa.overall, pm.overall);

    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> values(k);
    for (double& v : values) v = u(rng);
    const auto cats = random_labels(k, 3, rng);
    const IoUReport r = category_miou(values, cats);
    const oracle::CategoryMeans cm = oracle::category_means(values, cats);
    EXPECT_EQ(r.category_miou, cm.per_category);
    EXPECT_EQ(r.instance_miou, cm.instance);
    EXPECT_EQ(r.class_average_miou, cm.class_average);
  }
}

TEST(ConfusionTally, CountsAndRecall) {
  ConfusionTally tally(3);
  tally.add(std::vector<int>{0, 0, 1, 2}, std::vector<int>{0, 1, 1, 2});
  EXPECT_EQ(tally.total(), 4u);
  EXPECT_EQ(tally.count(0, 1), 1u);
  EXPECT_EQ(tally.accuracy(), 0.75);
  const auto recall = tally.per_class_accuracy();
  EXPECT_EQ(recall.at(0), 0.5);
  EXPECT_EQ(recall.at(2), 1.0);
  EXPECT_THROW(tally.add(3, 0), LabelError);
}
