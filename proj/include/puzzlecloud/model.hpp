#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "puzzlecloud/numerics.hpp"
#include "puzzlecloud/pointcloud.hpp"

namespace puzzlecloud {

enum class Task { classification, segmentation };

inline std::string to_string(Task task) {
  return task == Task::classification ? "classification" : "segmentation";
}

inline Task task_from_string(const std::string& name) {
  if (name == "classification") return Task::classification;
  if (name == "segmentation") return Task::segmentation;
  throw ConfigError("unknown task '" + name + "'");
}

// Layer widths and head sizes of the PointNet-style network. The per-point
// MLP output at `local_feature_layer` feeds the per-point heads; the last
// per-point width is the global feature size.
struct EncoderConfig {
  std::vector<std::size_t> per_point_mlp_widths{64, 64, 64, 128, 1024};
  std::size_t local_feature_layer = 1;
  std::vector<std::size_t> head_widths_classification{512, 256};
  std::vector<std::size_t> head_widths_per_point{512, 256, 128};
  double dropout_rate = 0.3;
  Task task = Task::classification;
  std::size_t num_classes = 0;
  std::size_t num_parts = 0;
  // 0 builds a baseline network with no puzzle branch at all.
  std::size_t num_voxels = 27;
  bool batch_standardization = false;
  // Segmentation only: the first per-point head layer is shared between the
  // segmentation and puzzle branches.
  bool share_first_head_layer = true;

  void validate() const {
    if (per_point_mlp_widths.empty()) throw ConfigError("encoder needs at least one per-point layer");
    if (local_feature_layer >= per_point_mlp_widths.size()) {
      throw ConfigError("local_feature_layer " + std::to_string(local_feature_layer) +
                        " out of range for " + std::to_string(per_point_mlp_widths.size()) +
                        " layers");
    }
    auto positive = [](const std::vector<std::size_t>& widths, const char* what) {
      for (std::size_t w : widths) {
        if (w == 0) throw ConfigError(std::string(what) + " widths must be >= 1");
      }
    };
    positive(per_point_mlp_widths, "per-point MLP");
    positive(head_widths_classification, "classification head");
    positive(head_widths_per_point, "per-point head");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("dropout_rate must lie in [0,1)");
    }
    if (task == Task::classification && num_classes < 2) {
      throw ConfigError("classification needs at least 2 classes");
    }
    if (task == Task::segmentation && num_parts < 2) {
      throw ConfigError("segmentation needs at least 2 parts");
    }
    if (task == Task::segmentation && share_first_head_layer && head_widths_per_point.empty()) {
      throw ConfigError("sharing the first head layer needs a non-empty per-point head");
    }
  }

  std::size_t local_width() const { return per_point_mlp_widths[local_feature_layer]; }
  std::size_t global_width() const { return per_point_mlp_widths.back(); }
};

struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // dropout draws; required when training with dropout
  bool update_running_stats = true;
};

struct Encoded {
  Tensor per_point;  // (B, K, local_width)
  Tensor global;     // (B, global_width)
};

// Stacks clouds of equal size into a (B, K, 3) tensor.
inline Tensor make_point_batch(std::span<const std::vector<Point3>* const> clouds) {
  if (clouds.empty()) throw DimensionError("empty batch");
  const std::size_t k = clouds.front()->size();
  std::vector<double> data;
  data.reserve(clouds.size() * k * 3);
  for (const auto* cloud : clouds) {
    if (cloud->size() != k) {
      throw DimensionError("batch mixes clouds of " + std::to_string(k) + " and " +
                           std::to_string(cloud->size()) + " points");
    }
    for (const Point3& p : *cloud) data.insert(data.end(), p.begin(), p.end());
  }
  return Tensor({clouds.size(), k, 3}, std::move(data));
}

class PointNetModel {
 public:
  // Parameters are created and initialized in a fixed order (encoder, main
  // head, puzzle head) from one seeded stream, so a baseline network and a
  // multi-task network with the same seed start from identical shared and
  // main-head weights.
  PointNetModel(EncoderConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(seed);

    std::size_t width = 3;
    for (std::size_t i = 0; i < config_.per_point_mlp_widths.size(); ++i) {
      encoder_.push_back(make_dense("encoder.mlp" + std::to_string(i), width,
                                    config_.per_point_mlp_widths[i], ParamGroup::feature,
                                    config_.batch_standardization, rng));
      width = config_.per_point_mlp_widths[i];
    }

    const std::size_t per_point_in = config_.local_width() + config_.global_width();
    if (config_.task == Task::classification) {
      width = config_.global_width();
      for (std::size_t i = 0; i < config_.head_widths_classification.size(); ++i) {
        main_head_.push_back(make_dense("classifier.fc" + std::to_string(i), width,
                                        config_.head_widths_classification[i],
                                        ParamGroup::main_head, config_.batch_standardization, rng));
        width = config_.head_widths_classification[i];
      }
      main_head_.push_back(make_dense("classifier.out", width, config_.num_classes,
                                      ParamGroup::main_head, false, rng));
    } else {
      std::size_t first = 0;
      width = per_point_in;
      if (config_.share_first_head_layer) {
        shared_head_ = make_dense("shared_head.fc0", width, config_.head_widths_per_point[0],
                                  ParamGroup::feature, config_.batch_standardization, rng);
        width = config_.head_widths_per_point[0];
        first = 1;
      }
      build_per_point_head(main_head_, "segmenter", first, width, config_.num_parts,
                           ParamGroup::main_head, rng);
    }

    if (config_.num_voxels > 0) {
      std::size_t first = 0;
      width = per_point_in;
      if (shared_head_) {
        width = config_.head_widths_per_point[0];
        first = 1;
      }
      build_per_point_head(puzzle_head_, "puzzle", first, width, config_.num_voxels,
                           ParamGroup::puzzle_head, rng);
    }
  }

  // Deep copy; plain copies share parameter storage.
  PointNetModel clone() const {
    PointNetModel copy = *this;
    copy.params_ = params_.clone();
    return copy;
  }

  const EncoderConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  bool has_puzzle_head() const { return !puzzle_head_.empty(); }

  std::vector<RunningStats>& running_stats() { return stats_; }
  const std::vector<RunningStats>& running_stats() const { return stats_; }

  // Shared per-point MLP on (B, K, 3) input, then max over points.
  Encoded encode(const Tensor& batch, ForwardContext& ctx) {
    if (batch.rank() != 3 || batch.dim(2) != 3) {
      throw DimensionError("encode expects (B,K,3), got " + shape_str(batch.shape()));
    }
    if (batch.dim(1) == 0) throw DimensionError("encode on an empty cloud (K == 0)");
    Tensor x = batch;
    Tensor local;
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
      x = apply(encoder_[i], x, true, ctx);
      if (i == config_.local_feature_layer) local = x;
    }
    return {local, max_over_points(x).values};
  }

  // (B, global) -> (B, C) class logits.
  Tensor classify(const Tensor& global, ForwardContext& ctx) {
    if (config_.task != Task::classification) throw ConfigError("model was built for segmentation");
    Tensor x = global;
    for (std::size_t i = 0; i + 1 < main_head_.size(); ++i) x = apply(main_head_[i], x, true, ctx);
    if (ctx.training && config_.dropout_rate > 0.0 && !ctx.rng) {
      throw ConfigError("training-mode dropout needs an RNG");
    }
    if (ctx.training && config_.dropout_rate > 0.0) {
      x = dropout(x, config_.dropout_rate, true, *ctx.rng);
    }
    return apply(main_head_.back(), x, false, ctx);
  }

  // (B, K, Q) part logits.
  Tensor segment(const Encoded& encoded, ForwardContext& ctx) {
    if (config_.task != Task::segmentation) throw ConfigError("model was built for classification");
    return per_point_forward(main_head_, encoded, ctx);
  }

  // (B, K, l^3) original-voxel logits.
  Tensor solve_puzzle(const Encoded& encoded, ForwardContext& ctx) {
    if (!has_puzzle_head()) throw ConfigError("model has no puzzle head");
    return per_point_forward(puzzle_head_, encoded, ctx);
  }

  // Main-task logits for the configured task.
  Tensor main_logits(const Encoded& encoded, ForwardContext& ctx) {
    return config_.task == Task::classification ? classify(encoded.global, ctx)
                                                : segment(encoded, ctx);
  }

 private:
  struct Dense {
    std::size_t weight;
    std::size_t bias;
    std::optional<std::size_t> stats;
  };

  template <class Rng>
  Dense make_dense(const std::string& name, std::size_t in, std::size_t out, ParamGroup group,
                   bool standardize, Rng& rng) {
    Dense d;
    d.weight = params_.add(name + ".weight", {in, out}, group);
    d.bias = params_.add(name + ".bias", {out}, group);
    he_uniform(params_[d.weight].tensor, in, rng);
    if (standardize) {
      d.stats = stats_.size();
      stats_.push_back({std::vector<double>(out, 0.0), std::vector<double>(out, 1.0)});
    }
    return d;
  }

  template <class Rng>
  void build_per_point_head(std::vector<Dense>& head, const std::string& prefix,
                            std::size_t first, std::size_t width, std::size_t outputs,
                            ParamGroup group, Rng& rng) {
    for (std::size_t i = first; i < config_.head_widths_per_point.size(); ++i) {
      head.push_back(make_dense(prefix + ".fc" + std::to_string(i), width,
                                config_.head_widths_per_point[i], group,
                                config_.batch_standardization, rng));
      width = config_.head_widths_per_point[i];
    }
    head.push_back(make_dense(prefix + ".out", width, outputs, group, false, rng));
  }

  Tensor apply(const Dense& d, const Tensor& x, bool activate, ForwardContext& ctx) {
    Tensor y = linear(x, params_[d.weight].tensor, params_[d.bias].tensor);
    if (d.stats) {
      y = batch_standardize(y, stats_[*d.stats], ctx.training, ctx.update_running_stats);
    }
    return activate ? relu(y) : y;
  }

  Tensor per_point_forward(const std::vector<Dense>& head, const Encoded& encoded,
                           ForwardContext& ctx) {
    Tensor x = concat_global(encoded.per_point, encoded.global);
    if (shared_head_) x = apply(*shared_head_, x, true, ctx);
    for (std::size_t i = 0; i + 1 < head.size(); ++i) x = apply(head[i], x, true, ctx);
    return apply(head.back(), x, false, ctx);
  }

  EncoderConfig config_;
  ModelParams params_;
  std::vector<RunningStats> stats_;
  std::vector<Dense> encoder_;
  std::optional<Dense> shared_head_;
  std::vector<Dense> main_head_;
  std::vector<Dense> puzzle_head_;
};

}  // namespace puzzlecloud
