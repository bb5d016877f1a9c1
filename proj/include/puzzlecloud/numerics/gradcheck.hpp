#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "puzzlecloud/numerics/parameters.hpp"

namespace puzzlecloud {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Entries probed per tensor; 0 probes every entry.
  std::size_t max_entries_per_tensor = 0;
  // Denominator floor of the relative error |a-n| / max(|a|, |n|, floor).
  double scale_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t checked = 0;
  // Probes whose +/- epsilon evaluations changed a ReLU sign or max-pool
  // winner; central differences are meaningless there and they are skipped.
  std::size_t skipped_kinks = 0;
  std::string worst_entry;
};

// Compares autodiff gradients of the scalar `forward_fn` against central
// finite differences for the given tensors. `forward_fn` must be
// deterministic; it is called once with grad enabled and twice per probe
// under NoGradGuard.
inline GradCheckResult gradient_check(const std::function<Tensor()>& forward_fn,
                                      std::vector<Tensor> tensors,
                                      const GradCheckOptions& options = {}) {
  for (Tensor& t : tensors) t.zero_grad();
  auto& recorder = detail::pattern_recorder();
  const auto evaluate = [&](std::uint64_t* pattern) {
    recorder = {};
    recorder.active = true;
    double value;
    try {
      NoGradGuard no_grad;
      value = forward_fn().item();
    } catch (...) {
      recorder.active = false;
      throw;
    }
    recorder.active = false;
    if (pattern) *pattern = recorder.hash;
    return value;
  };

  Tensor loss = forward_fn();
  loss.backward();
  std::uint64_t base_pattern = 0;
  evaluate(&base_pattern);

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Tensor& t = tensors[ti];
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());

    std::vector<std::size_t> entries(t.numel());
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
    if (options.max_entries_per_tensor && entries.size() > options.max_entries_per_tensor) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_tensor);
    }

    auto values = t.mutable_data();
    for (std::size_t entry : entries) {
      const double saved = values[entry];
      std::uint64_t plus_pattern = 0, minus_pattern = 0;
      values[entry] = saved + options.epsilon;
      const double plus = evaluate(&plus_pattern);
      values[entry] = saved - options.epsilon;
      const double minus = evaluate(&minus_pattern);
      values[entry] = saved;
      if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double a = analytic[entry];
      const double abs_err = std::abs(a - numeric);
      const double scale =
          std::max({std::abs(a), std::abs(numeric), options.scale_floor});
      const double rel = abs_err / scale;
      ++result.checked;
      result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_entry = "tensor " + std::to_string(ti) + "[" +
                             std::to_string(entry) + "] analytic " + std::to_string(a) +
                             " numeric " + std::to_string(numeric);
      }
    }
  }
  for (Tensor& t : tensors) t.zero_grad();
  return result;
}

}  // namespace puzzlecloud
