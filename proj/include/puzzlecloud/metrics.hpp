#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "puzzlecloud/errors.hpp"

namespace puzzlecloud {

namespace detail {
inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a) + " predictions vs " +
                         std::to_string(b) + " labels");
  }
}
}  // namespace detail

inline double overall_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  detail::require_same_length(predicted.size(), truth.size(), "overall_accuracy");
  if (truth.empty()) throw DimensionError("overall_accuracy on zero items");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

// Rows are truth, columns are prediction.
class ConfusionTally {
 public:
  explicit ConfusionTally(std::size_t classes)
      : classes_(classes), counts_(classes * classes, 0) {}

  void add(int truth, int predicted) {
    if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= classes_ ||
        static_cast<std::size_t>(predicted) >= classes_) {
      throw LabelError("confusion entry (" + std::to_string(truth) + "," +
                       std::to_string(predicted) + ") outside " + std::to_string(classes_) +
                       " classes");
    }
    ++counts_[static_cast<std::size_t>(truth) * classes_ + static_cast<std::size_t>(predicted)];
    ++total_;
  }

  void add(std::span<const int> truth, std::span<const int> predicted) {
    detail::require_same_length(predicted.size(), truth.size(), "ConfusionTally::add");
    for (std::size_t i = 0; i < truth.size(); ++i) add(truth[i], predicted[i]);
  }

  std::size_t classes() const { return classes_; }
  std::size_t total() const { return total_; }
  std::size_t count(int truth, int predicted) const {
    return counts_[static_cast<std::size_t>(truth) * classes_ + static_cast<std::size_t>(predicted)];
  }
  std::size_t class_total(int truth) const {
    std::size_t n = 0;
    for (std::size_t p = 0; p < classes_; ++p) n += count(truth, static_cast<int>(p));
    return n;
  }

  double accuracy() const {
    if (total_ == 0) return 0.0;
    std::size_t diag = 0;
    for (std::size_t c = 0; c < classes_; ++c) diag += count(static_cast<int>(c), static_cast<int>(c));
    return static_cast<double>(diag) / static_cast<double>(total_);
  }

  // Recall per class; classes absent from the truth get no entry.
  std::map<int, double> per_class_accuracy() const {
    std::map<int, double> out;
    for (std::size_t c = 0; c < classes_; ++c) {
      const std::size_t n = class_total(static_cast<int>(c));
      if (n == 0) continue;
      out[static_cast<int>(c)] =
          static_cast<double>(count(static_cast<int>(c), static_cast<int>(c))) /
          static_cast<double>(n);
    }
    return out;
  }

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

// Mean over the category's parts of |pred ∩ truth| / |pred ∪ truth|, with an
// empty union counting as IoU 1.
inline double shape_miou(std::span<const int> predicted, std::span<const int> truth,
                         std::span<const int> category_parts) {
  detail::require_same_length(predicted.size(), truth.size(), "shape_miou");
  if (truth.empty()) throw DimensionError("shape_miou on zero points");
  if (category_parts.empty()) throw ConfigError("shape_miou needs at least one part id");
  double sum = 0.0;
  for (int part : category_parts) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool in_pred = predicted[i] == part;
      const bool in_truth = truth[i] == part;
      inter += in_pred && in_truth;
      uni += in_pred || in_truth;
    }
    sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return sum / static_cast<double>(category_parts.size());
}

struct IoUReport {
  std::vector<double> shape_miou;             // per evaluated shape, input order
  std::map<int, double> category_miou;        // category id -> mean shape mIoU
  double instance_miou = 0.0;                 // mean over every shape
  double class_average_miou = 0.0;            // mean over categories
};

// Groups shape mIoUs by category. `categories[i]` is the category of shape i.
inline IoUReport category_miou(std::span<const double> shape_values,
                               std::span<const int> categories) {
  detail::require_same_length(shape_values.size(), categories.size(), "category_miou");
  IoUReport report;
  report.shape_miou.assign(shape_values.begin(), shape_values.end());
  std::map<int, std::pair<double, std::size_t>> sums;
  double total = 0.0;
  for (std::size_t i = 0; i < shape_values.size(); ++i) {
    auto& [sum, n] = sums[categories[i]];
    sum += shape_values[i];
    ++n;
    total += shape_values[i];
  }
  double class_sum = 0.0;
  for (const auto& [category, entry] : sums) {
    const double mean = entry.first / static_cast<double>(entry.second);
    report.category_miou[category] = mean;
    class_sum += mean;
  }
  if (!shape_values.empty()) {
    report.instance_miou = total / static_cast<double>(shape_values.size());
    report.class_average_miou = class_sum / static_cast<double>(sums.size());
  }
  return report;
}

struct PartAccuracy {
  std::map<int, double> per_part;  // only parts present in the truth
  double average = 0.0;            // unweighted mean over per_part
  double overall = 0.0;            // pointwise accuracy
};

inline PartAccuracy per_part_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  detail::require_same_length(predicted.size(), truth.size(), "per_part_accuracy");
  if (truth.empty()) throw DimensionError("per_part_accuracy on zero points");
  std::map<int, std::pair<std::size_t, std::size_t>> tally;  // part -> (correct, total)
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& [ok, n] = tally[truth[i]];
    ++n;
    if (predicted[i] == truth[i]) {
      ++ok;
      ++correct;
    }
  }
  PartAccuracy out;
  double sum = 0.0;
  for (const auto& [part, entry] : tally) {
    const double acc = static_cast<double>(entry.first) / static_cast<double>(entry.second);
    out.per_part[part] = acc;
    sum += acc;
  }
  out.average = sum / static_cast<double>(tally.size());
  out.overall = static_cast<double>(correct) / static_cast<double>(truth.size());
  return out;
}

}  // namespace puzzlecloud
