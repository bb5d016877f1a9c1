#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "puzzlecloud/metrics.hpp"
#include "puzzlecloud/model.hpp"
#include "puzzlecloud/pointcloud.hpp"
#include "puzzlecloud/puzzle.hpp"

namespace puzzlecloud {

// Learning-rate recipes: Adam 1e-3 divided by 4 every 20 epochs
// (classification), SGD 1e-2 with momentum 0.9 divided by 2 every 20 epochs,
// and Adam 1e-3 divided by 2 every 20 epochs (segmentation).
enum class OptimizerPreset { adam, sgd, adam_seg };

inline std::string to_string(OptimizerPreset preset) {
  switch (preset) {
    case OptimizerPreset::adam: return "adam";
    case OptimizerPreset::sgd: return "sgd";
    case OptimizerPreset::adam_seg: return "adam_seg";
  }
  return "?";
}

inline OptimizerPreset optimizer_preset_from_string(const std::string& name) {
  if (name == "adam") return OptimizerPreset::adam;
  if (name == "sgd") return OptimizerPreset::sgd;
  if (name == "adam_seg") return OptimizerPreset::adam_seg;
  throw ConfigError("unknown optimizer '" + name + "'");
}

struct AugmentConfig {
  bool rotate = true;
  bool jitter = true;
  double jitter_sigma = 0.01;
  double jitter_clip = 0.05;
};

struct TrainConfig {
  double alpha = 0.6;
  int puzzle_l = 3;
  std::size_t batch_size = 64;
  std::size_t epochs = 60;
  OptimizerPreset optimizer = OptimizerPreset::adam;
  std::optional<double> base_lr;  // overrides the preset's initial rate
  std::size_t decay_every = 20;
  std::uint64_t seed = 0;
  Task task = Task::classification;
  AugmentConfig augment;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (decay_every < 1) throw ConfigError("decay_every must be >= 1");
    if (base_lr && !(*base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
    PuzzleConfig check(puzzle_l);
    (void)check;
  }
};

inline double preset_base_lr(OptimizerPreset preset) {
  return preset == OptimizerPreset::sgd ? 0.01 : 0.001;
}

inline double preset_decay_factor(OptimizerPreset preset) {
  return preset == OptimizerPreset::adam ? 4.0 : 2.0;
}

// base_lr / factor^floor(epoch / decay_every)
inline double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  const double base = config.base_lr.value_or(preset_base_lr(config.optimizer));
  const double steps = static_cast<double>(epoch / config.decay_every);
  return base / std::pow(preset_decay_factor(config.optimizer), steps);
}

inline OptimizerState make_optimizer(const TrainConfig& config, const ModelParams& params) {
  const double base = config.base_lr.value_or(preset_base_lr(config.optimizer));
  return config.optimizer == OptimizerPreset::sgd ? make_sgd(params, base)
                                                  : make_adam(params, base);
}

struct JointLoss {
  Tensor total;
  double main = 0.0;
  double puzzle = 0.0;
};

// total = L_m + alpha * L_p, both mean cross-entropies over their own rows.
// With alpha == 0 the puzzle term is reported but kept out of the graph.
// An undefined `puzzle_logits` means there is no puzzle term at all.
inline JointLoss joint_loss(const Tensor& main_logits, std::span<const int> main_targets,
                            const Tensor& puzzle_logits, std::span<const int> puzzle_targets,
                            double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  JointLoss out;
  Tensor main = softmax_cross_entropy(main_logits, main_targets);
  out.main = main.item();
  if (!puzzle_logits.defined()) {
    out.total = main;
    return out;
  }
  if (alpha == 0.0) {
    NoGradGuard no_grad;
    out.puzzle = softmax_cross_entropy(puzzle_logits, puzzle_targets).item();
    out.total = main;
    return out;
  }
  Tensor puzzle = softmax_cross_entropy(puzzle_logits, puzzle_targets);
  out.puzzle = puzzle.item();
  out.total = add_scaled(main, puzzle, alpha);
  return out;
}

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double main_loss = 0.0;
  double puzzle_loss = 0.0;
  double total_loss = 0.0;
  double main_metric = 0.0;  // accuracy (classification) or mIoU (segmentation)
  double puzzle_accuracy = 0.0;
};

struct EvalReport {
  Task task = Task::classification;
  std::size_t samples = 0;
  double main_metric = 0.0;       // accuracy or instance mIoU
  double overall_accuracy = 0.0;  // shape accuracy or point accuracy
  std::map<int, double> per_class_accuracy;  // classification
  std::optional<IoUReport> iou;               // segmentation
  std::optional<PartAccuracy> part_accuracy;  // segmentation
  std::optional<double> puzzle_accuracy;
};

// Fisher-Yates over an index vector.
template <class Rng>
void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(indices[i - 1], indices[pick(rng)]);
  }
}

// Random rotation about y followed by clipped jitter, as toggled.
template <class Rng>
PointCloud augment(PointCloud cloud, const AugmentConfig& config, Rng& rng) {
  if (config.rotate) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    cloud = rotate_y(std::move(cloud), angle(rng));
  }
  if (config.jitter) cloud = jitter(std::move(cloud), config.jitter_sigma, config.jitter_clip, rng);
  return cloud;
}

// Endless reshuffled pass over a stream; used for the puzzle stream, which is
// sized independently of the main stream.
struct CyclingCursor {
  std::vector<std::size_t> order;
  std::size_t position = 0;

  template <class Rng>
  std::size_t next(std::size_t stream_size, Rng& rng) {
    if (order.size() != stream_size || position >= order.size()) {
      order.resize(stream_size);
      for (std::size_t i = 0; i < stream_size; ++i) order[i] = i;
      shuffle_indices(order, rng);
      position = 0;
    }
    return order[position++];
  }
};

// Owns a model, its optimizer, and the two random streams of a run. The main
// stream drives batch order, main-sample augmentation and dropout; the puzzle
// stream drives puzzle-sample selection, augmentation and permutations. A
// baseline network therefore consumes exactly the main stream of a
// multi-task one.
class Trainer {
 public:
  Trainer(PointNetModel model, TrainConfig config)
      : model_(std::move(model)), config_(std::move(config)) {
    config_.validate();
    if (config_.task != model_.config().task) throw ConfigError("trainer and model disagree on the task");
    if (model_.has_puzzle_head() &&
        model_.config().num_voxels != static_cast<std::size_t>(PuzzleConfig(config_.puzzle_l).num_voxels())) {
      throw ConfigError("puzzle head has " + std::to_string(model_.config().num_voxels) +
                        " outputs but l=" + std::to_string(config_.puzzle_l));
    }
    if (config_.alpha > 0.0 && !model_.has_puzzle_head()) {
      throw ConfigError("alpha > 0 needs a model with a puzzle head");
    }
    optimizer_ = make_optimizer(config_, model_.params());
    main_rng_.seed(stream_seed(config_.seed, 1));
    puzzle_rng_.seed(stream_seed(config_.seed, 2));
  }

  static std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint64_t out[1];
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    out[0] = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    return out[0];
  }

  PointNetModel& model() { return model_; }
  const PointNetModel& model() const { return model_; }
  const TrainConfig& config() const { return config_; }
  OptimizerState& optimizer() { return optimizer_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  std::mt19937_64& main_rng() { return main_rng_; }
  std::mt19937_64& puzzle_rng() { return puzzle_rng_; }
  CyclingCursor& puzzle_cursor() { return cursor_; }
  const std::mt19937_64& main_rng() const { return main_rng_; }
  const std::mt19937_64& puzzle_rng() const { return puzzle_rng_; }
  const CyclingCursor& puzzle_cursor() const { return cursor_; }
  std::size_t epochs_done() const { return epoch_; }
  void set_epochs_done(std::size_t epoch) { epoch_ = epoch; }

  // One pass over the main stream: ceil(N / batch) optimizer steps. Each step
  // pairs the main batch with an equally sized batch from the puzzle stream,
  // freshly puzzled.
  EpochStats train_epoch(const Dataset& main_stream, std::span<const UnlabeledCloud> puzzle_stream) {
    if (main_stream.samples.empty()) throw ConfigError("main stream is empty");
    const bool use_puzzle = model_.has_puzzle_head() && !puzzle_stream.empty();
    if (config_.alpha > 0.0 && puzzle_stream.empty()) {
      throw ConfigError("alpha > 0 but the puzzle stream is empty");
    }
    const PuzzleConfig puzzle_config(config_.puzzle_l);

    EpochStats stats;
    stats.epoch = epoch_;
    stats.lr = lr_at_epoch(config_, epoch_);

    std::vector<std::size_t> order(main_stream.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_indices(order, main_rng_);

    double main_loss_sum = 0.0, puzzle_loss_sum = 0.0, total_loss_sum = 0.0;
    double metric_sum = 0.0;
    std::size_t metric_count = 0;
    std::size_t puzzle_correct = 0, puzzle_points = 0;
    std::size_t batches = 0;

    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      const std::size_t batch = end - start;

      std::vector<PointCloud> clouds;
      clouds.reserve(batch);
      for (std::size_t i = start; i < end; ++i) {
        clouds.push_back(augment(main_stream.samples[order[i]], config_.augment, main_rng_));
      }
      const std::vector<int> targets = main_targets(clouds);
      ForwardContext ctx{true, &main_rng_, true};
      const Encoded encoded = model_.encode(batch_tensor(clouds), ctx);
      const Tensor main_logits = model_.main_logits(encoded, ctx);

      Tensor puzzle_logits;
      std::vector<int> puzzle_targets;
      if (use_puzzle) {
        std::vector<std::vector<Point3>> shuffled;
        shuffled.reserve(batch);
        for (std::size_t i = 0; i < batch; ++i) {
          const UnlabeledCloud& source =
              puzzle_stream[cursor_.next(puzzle_stream.size(), puzzle_rng_)];
          PointCloud cloud = augment(source.as_cloud(), config_.augment, puzzle_rng_);
          PuzzledSample puzzled = apply_puzzle(cloud, puzzle_config, puzzle_rng_);
          puzzle_targets.insert(puzzle_targets.end(), puzzled.voxel_labels.begin(),
                                puzzled.voxel_labels.end());
          shuffled.push_back(std::move(puzzled.shuffled_points));
        }
        ForwardContext pctx{true, &puzzle_rng_, false};
        std::optional<NoGradGuard> no_grad;
        if (config_.alpha == 0.0) no_grad.emplace();
        const Encoded penc = model_.encode(batch_tensor(shuffled), pctx);
        puzzle_logits = model_.solve_puzzle(penc, pctx);
      }

      const JointLoss loss =
          joint_loss(main_logits, targets, puzzle_logits, puzzle_targets, config_.alpha);
      loss.total.backward();
      optimizer_step(model_.params(), optimizer_, stats.lr);

      const double weight = static_cast<double>(batch);
      main_loss_sum += loss.main * weight;
      puzzle_loss_sum += loss.puzzle * weight;
      total_loss_sum += loss.total.item() * weight;
      accumulate_metric(clouds, main_logits, main_stream, metric_sum, metric_count);
      if (use_puzzle) {
        const std::vector<int> predicted = argmax_rows(puzzle_logits);
        for (std::size_t i = 0; i < predicted.size(); ++i) {
          puzzle_correct += predicted[i] == puzzle_targets[i];
        }
        puzzle_points += predicted.size();
      }
      ++batches;
    }

    const double n = static_cast<double>(main_stream.size());
    stats.main_loss = main_loss_sum / n;
    stats.puzzle_loss = puzzle_loss_sum / n;
    stats.total_loss = total_loss_sum / n;
    stats.main_metric = metric_count ? metric_sum / static_cast<double>(metric_count) : 0.0;
    stats.puzzle_accuracy =
        puzzle_points ? static_cast<double>(puzzle_correct) / static_cast<double>(puzzle_points) : 0.0;
    ++epoch_;
    return stats;
  }

  // Eval-mode forward over a labeled dataset. When the model has a puzzle
  // head, puzzle accuracy is measured on puzzles drawn from a fixed seed.
  EvalReport evaluate(const Dataset& dataset) const {
    return evaluate_model(model_, config_, dataset);
  }

  static EvalReport evaluate_model(const PointNetModel& source_model, const TrainConfig& config,
                                   const Dataset& dataset) {
    if (dataset.samples.empty()) throw ConfigError("evaluation set is empty");
    PointNetModel model = source_model;  // shares parameters; eval never writes them
    const Task task = model.config().task;
    for (const PointCloud& s : dataset.samples) {
      if (task == Task::classification && !s.class_label) {
        throw ConfigError("sample '" + s.source_id + "' has no class label to evaluate");
      }
      if (task == Task::segmentation && !s.part_labels) {
        throw ConfigError("sample '" + s.source_id + "' has no part labels to evaluate");
      }
    }
    NoGradGuard no_grad;
    ForwardContext ctx{false, nullptr, false};
    EvalReport report;
    report.task = task;
    report.samples = dataset.size();

    std::vector<int> predicted, truth;
    std::vector<double> shape_values;
    std::vector<int> shape_categories;
    std::vector<int> point_pred, point_truth;
    for (std::size_t start = 0; start < dataset.size(); start += config.batch_size) {
      const std::size_t end = std::min(dataset.size(), start + config.batch_size);
      std::vector<const std::vector<Point3>*> ptrs;
      for (std::size_t i = start; i < end; ++i) ptrs.push_back(&dataset.samples[i].points);
      const Encoded encoded = model.encode(make_point_batch(ptrs), ctx);
      const std::vector<int> argmax = argmax_rows(model.main_logits(encoded, ctx));
      if (task == Task::classification) {
        for (std::size_t i = start; i < end; ++i) {
          predicted.push_back(argmax[i - start]);
          truth.push_back(*dataset.samples[i].class_label);
        }
        continue;
      }
      std::size_t offset = 0;
      for (std::size_t i = start; i < end; ++i) {
        const PointCloud& s = dataset.samples[i];
        const std::span<const int> pred(argmax.data() + offset, s.size());
        offset += s.size();
        point_pred.insert(point_pred.end(), pred.begin(), pred.end());
        point_truth.insert(point_truth.end(), s.part_labels->begin(), s.part_labels->end());
        const std::vector<int> parts = parts_for(dataset, s);
        shape_values.push_back(shape_miou(pred, *s.part_labels, parts));
        shape_categories.push_back(s.class_label.value_or(0));
      }
    }

    if (task == Task::classification) {
      ConfusionTally tally(model.config().num_classes);
      tally.add(truth, predicted);
      report.overall_accuracy = overall_accuracy(predicted, truth);
      report.main_metric = report.overall_accuracy;
      report.per_class_accuracy = tally.per_class_accuracy();
    } else {
      report.iou = category_miou(shape_values, shape_categories);
      report.part_accuracy = per_part_accuracy(point_pred, point_truth);
      report.overall_accuracy = report.part_accuracy->overall;
      report.main_metric = report.iou->instance_miou;
    }

    if (model.has_puzzle_head()) {
      std::mt19937_64 rng(stream_seed(config.seed, 3));
      const PuzzleConfig puzzle_config(config.puzzle_l);
      std::size_t correct = 0, points = 0;
      for (std::size_t start = 0; start < dataset.size(); start += config.batch_size) {
        const std::size_t end = std::min(dataset.size(), start + config.batch_size);
        std::vector<std::vector<Point3>> shuffled;
        std::vector<int> labels;
        for (std::size_t i = start; i < end; ++i) {
          PuzzledSample p = apply_puzzle(dataset.samples[i], puzzle_config, rng);
          labels.insert(labels.end(), p.voxel_labels.begin(), p.voxel_labels.end());
          shuffled.push_back(std::move(p.shuffled_points));
        }
        const Encoded encoded = model.encode(batch_tensor(shuffled), ctx);
        const std::vector<int> pred = argmax_rows(model.solve_puzzle(encoded, ctx));
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
        points += pred.size();
      }
      report.puzzle_accuracy = static_cast<double>(correct) / static_cast<double>(points);
    }
    return report;
  }

 private:
  static Tensor batch_tensor(const std::vector<PointCloud>& clouds) {
    std::vector<const std::vector<Point3>*> ptrs;
    for (const PointCloud& c : clouds) ptrs.push_back(&c.points);
    return make_point_batch(ptrs);
  }

  static Tensor batch_tensor(const std::vector<std::vector<Point3>>& clouds) {
    std::vector<const std::vector<Point3>*> ptrs;
    for (const auto& c : clouds) ptrs.push_back(&c);
    return make_point_batch(ptrs);
  }

  static std::vector<int> parts_for(const Dataset& dataset, const PointCloud& sample) {
    if (sample.class_label && static_cast<std::size_t>(*sample.class_label) < dataset.category_parts.size() &&
        !dataset.category_parts[static_cast<std::size_t>(*sample.class_label)].empty()) {
      return dataset.category_parts[static_cast<std::size_t>(*sample.class_label)];
    }
    std::vector<int> all(static_cast<std::size_t>(dataset.num_parts.value_or(0)));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
  }

  std::vector<int> main_targets(const std::vector<PointCloud>& clouds) const {
    std::vector<int> targets;
    for (const PointCloud& c : clouds) {
      if (config_.task == Task::classification) {
        if (!c.class_label) throw ConfigError("sample '" + c.source_id + "' lacks a class label");
        targets.push_back(*c.class_label);
      } else {
        if (!c.part_labels) throw ConfigError("sample '" + c.source_id + "' lacks part labels");
        targets.insert(targets.end(), c.part_labels->begin(), c.part_labels->end());
      }
    }
    return targets;
  }

  void accumulate_metric(const std::vector<PointCloud>& clouds, const Tensor& logits,
                         const Dataset& dataset, double& sum, std::size_t& count) const {
    const std::vector<int> argmax = argmax_rows(logits);
    if (config_.task == Task::classification) {
      for (std::size_t i = 0; i < clouds.size(); ++i) sum += argmax[i] == *clouds[i].class_label;
      count += clouds.size();
      return;
    }
    std::size_t offset = 0;
    for (const PointCloud& c : clouds) {
      const std::span<const int> pred(argmax.data() + offset, c.size());
      offset += c.size();
      sum += shape_miou(pred, *c.part_labels, parts_for(dataset, c));
      ++count;
    }
  }

  PointNetModel model_;
  TrainConfig config_;
  OptimizerState optimizer_;
  std::mt19937_64 main_rng_;
  std::mt19937_64 puzzle_rng_;
  CyclingCursor cursor_;
  std::size_t epoch_ = 0;
};

}  // namespace puzzlecloud
