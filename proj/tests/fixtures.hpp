#pragma once

#include <vector>

#include "puzzlecloud.hpp"

namespace fixture {

namespace pc = puzzlecloud;

inline pc::EncoderConfig tiny_encoder(const pc::Dataset& data, pc::Task task, int l = 2) {
  pc::EncoderConfig c;
  c.per_point_mlp_widths = {8, 8, 16};
  c.local_feature_layer = 1;
  c.head_widths_classification = {8};
  c.head_widths_per_point = {8};
  c.dropout_rate = 0.0;
  c.task = task;
  c.num_classes = data.class_names.size();
  c.num_parts = static_cast<std::size_t>(data.num_parts.value_or(0));
  c.num_voxels = static_cast<std::size_t>(l * l * l);
  return c;
}

inline pc::TrainConfig quick_train(pc::Task task, double alpha, int l = 2) {
  pc::TrainConfig t;
  t.alpha = alpha;
  t.puzzle_l = l;
  t.batch_size = 4;
  t.epochs = 2;
  t.task = task;
  t.seed = 11;
  return t;
}

// 4 classes x `per_class` clean shapes of 64 points.
inline pc::Dataset small_dataset(std::size_t per_class = 3, std::uint64_t seed = 5,
                                 const pc::DomainProfile& profile = pc::clean_profile()) {
  return pc::generate_dataset(pc::builtin_recipes(), per_class, 64, profile, seed);
}

inline std::vector<pc::UnlabeledCloud> unlabeled(const pc::Dataset& d) {
  std::vector<pc::UnlabeledCloud> out;
  for (const auto& s : d.samples) out.emplace_back(s);
  return out;
}

inline bool same_values(const pc::ModelParams& a, const pc::ModelParams& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = a[i].tensor.data(), y = b[i].tensor.data();
    if (a[i].name != b[i].name || x.size() != y.size() || !std::equal(x.begin(), x.end(), y.begin())) {
      return false;
    }
  }
  return true;
}

}  // namespace fixture
