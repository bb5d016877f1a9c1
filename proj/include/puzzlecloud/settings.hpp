#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "puzzlecloud/errors.hpp"
#include "puzzlecloud/pointcloud.hpp"

namespace puzzlecloud {

// The six data-availability protocols: single domain, few-shot,
// semi-supervised, transfer learning, domain generalization, domain adaptation.
enum class ScenarioKind { SD, FS, SS, TL, DG, DA };

inline std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::SD: return "SD";
    case ScenarioKind::FS: return "FS";
    case ScenarioKind::SS: return "SS";
    case ScenarioKind::TL: return "TL";
    case ScenarioKind::DG: return "DG";
    case ScenarioKind::DA: return "DA";
  }
  return "?";
}

inline ScenarioKind scenario_kind_from_string(const std::string& name) {
  for (ScenarioKind k : {ScenarioKind::SD, ScenarioKind::FS, ScenarioKind::SS, ScenarioKind::TL,
                         ScenarioKind::DG, ScenarioKind::DA}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown scenario kind '" + name + "'");
}

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::SD;
  Dataset source_train;
  Dataset source_test;
  std::optional<Dataset> extra_unlabeled;  // S'
  std::optional<Dataset> target;           // T
  double labeled_fraction = 1.0;
  std::uint64_t seed = 0;
  // TL only: also puzzle the labeled source samples.
  bool tl_puzzle_includes_source = false;
  // Target class name -> source class name. Empty means the label spaces
  // match by name; unmapped target classes are dropped.
  std::map<std::string, std::string> class_mapping;
};

struct ResolvedScenario {
  Dataset main_stream;
  std::vector<UnlabeledCloud> puzzle_stream;
  Dataset eval_set;
};

// Per class, keeps round(fraction * n_c) samples (at least one) chosen by a
// seeded shuffle; the rest go to the remainder. Input order is preserved in
// both outputs.
inline std::pair<Dataset, Dataset> stratified_subsample(const Dataset& dataset, double fraction,
                                                        std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("labeled fraction must lie in (0,1], got " + std::to_string(fraction));
  }
  std::vector<std::vector<std::size_t>> by_class(dataset.class_names.size());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& label = dataset.samples[i].class_label;
    if (!label) throw DatasetError("sample '" + dataset.samples[i].source_id + "' has no class label");
    by_class.at(static_cast<std::size_t>(*label)).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<bool> keep(dataset.samples.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) {
      throw DatasetError("class '" + dataset.class_names[c] + "' has no samples to subsample");
    }
    for (std::size_t i = members.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(members[i - 1], members[pick(rng)]);
    }
    const auto wanted = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(members.size())));
    const std::size_t n = std::clamp<std::size_t>(wanted, 1, members.size());
    for (std::size_t i = 0; i < n; ++i) keep[members[i]] = true;
  }
  Dataset kept = dataset.empty_like();
  Dataset remainder = dataset.empty_like();
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    (keep[i] ? kept : remainder).samples.push_back(dataset.samples[i]);
  }
  return {std::move(kept), std::move(remainder)};
}

// Re-expresses `dataset` in the source label space through `mapping`
// (target name -> source name, identity by name when empty). Samples whose
// class has no counterpart are dropped.
inline Dataset remap_classes(const Dataset& dataset, const Dataset& source_space,
                             const std::map<std::string, std::string>& mapping) {
  std::map<std::string, int> source_index;
  for (std::size_t i = 0; i < source_space.class_names.size(); ++i) {
    source_index[source_space.class_names[i]] = static_cast<int>(i);
  }
  std::vector<std::optional<int>> to_source(dataset.class_names.size());
  for (std::size_t i = 0; i < dataset.class_names.size(); ++i) {
    std::string name = dataset.class_names[i];
    if (!mapping.empty()) {
      const auto m = mapping.find(name);
      if (m == mapping.end()) continue;
      name = m->second;
    }
    const auto s = source_index.find(name);
    if (s != source_index.end()) to_source[i] = s->second;
  }
  Dataset out = source_space.empty_like();
  for (const PointCloud& sample : dataset.samples) {
    PointCloud copy = sample;
    if (sample.class_label) {
      const auto& mapped = to_source.at(static_cast<std::size_t>(*sample.class_label));
      if (!mapped) continue;
      copy.class_label = *mapped;
    }
    out.samples.push_back(std::move(copy));
  }
  if (out.samples.empty()) throw DatasetError("no target class maps onto the source label space");
  return out;
}

namespace detail {

inline void append_unlabeled(std::vector<UnlabeledCloud>& stream, const Dataset& dataset) {
  for (const PointCloud& s : dataset.samples) stream.emplace_back(s);
}

inline void require_disjoint(const Dataset& a, const Dataset& b, const char* what) {
  std::map<std::string, bool> ids;
  for (const PointCloud& s : a.samples) ids[s.source_id] = true;
  for (const PointCloud& s : b.samples) {
    if (ids.count(s.source_id)) {
      throw DatasetError(std::string(what) + ": sample '" + s.source_id + "' appears in both sets");
    }
  }
}

}  // namespace detail

// Routes data to the two losses and to evaluation.
//   SD  main S_train            puzzle S_train              eval S_test
//   FS  main fraction           puzzle fraction             eval S_test
//   SS  main fraction           puzzle S_train (all)        eval S_test
//   TL  main S_train            puzzle S' (optionally +S)   eval S_test
//   DG  main S_train            puzzle S_train              eval T
//   DA  main S_train            puzzle S_train + T          eval T
inline ResolvedScenario resolve(const ScenarioSpec& spec) {
  if (spec.source_train.samples.empty()) throw ConfigError("scenario needs a non-empty S_train");
  const bool partial = spec.kind == ScenarioKind::FS || spec.kind == ScenarioKind::SS;
  if (partial && !(spec.labeled_fraction > 0.0 && spec.labeled_fraction < 1.0)) {
    throw ConfigError(to_string(spec.kind) + " needs a labeled fraction in (0,1)");
  }
  if (spec.kind == ScenarioKind::TL && !spec.extra_unlabeled) {
    throw ConfigError("TL needs an extra unlabeled dataset");
  }
  const bool cross_domain = spec.kind == ScenarioKind::DG || spec.kind == ScenarioKind::DA;
  if (cross_domain && !spec.target) {
    throw ConfigError(to_string(spec.kind) + " needs a target dataset");
  }
  if (!cross_domain && spec.source_test.samples.empty()) {
    throw ConfigError(to_string(spec.kind) + " needs a non-empty S_test");
  }
  detail::require_disjoint(spec.source_train, spec.source_test, "S_train/S_test");

  ResolvedScenario out;
  switch (spec.kind) {
    case ScenarioKind::SD:
      out.main_stream = spec.source_train;
      detail::append_unlabeled(out.puzzle_stream, spec.source_train);
      out.eval_set = spec.source_test;
      break;
    case ScenarioKind::FS:
    case ScenarioKind::SS: {
      auto [kept, remainder] =
          stratified_subsample(spec.source_train, spec.labeled_fraction, spec.seed);
      detail::append_unlabeled(out.puzzle_stream, kept);
      if (spec.kind == ScenarioKind::SS) detail::append_unlabeled(out.puzzle_stream, remainder);
      out.main_stream = std::move(kept);
      out.eval_set = spec.source_test;
      break;
    }
    case ScenarioKind::TL:
      out.main_stream = spec.source_train;
      if (spec.tl_puzzle_includes_source) detail::append_unlabeled(out.puzzle_stream, spec.source_train);
      detail::append_unlabeled(out.puzzle_stream, *spec.extra_unlabeled);
      out.eval_set = spec.source_test;
      break;
    case ScenarioKind::DG:
      out.main_stream = spec.source_train;
      detail::append_unlabeled(out.puzzle_stream, spec.source_train);
      out.eval_set = remap_classes(*spec.target, spec.source_train, spec.class_mapping);
      break;
    case ScenarioKind::DA:
      out.main_stream = spec.source_train;
      detail::append_unlabeled(out.puzzle_stream, spec.source_train);
      detail::append_unlabeled(out.puzzle_stream, *spec.target);
      out.eval_set = remap_classes(*spec.target, spec.source_train, spec.class_mapping);
      break;
  }
  detail::require_disjoint(out.main_stream, out.eval_set, "main stream/eval set");
  return out;
}

}  // namespace puzzlecloud
