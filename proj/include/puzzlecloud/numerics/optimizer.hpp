#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "puzzlecloud/numerics/parameters.hpp"

namespace puzzlecloud {

enum class OptimizerKind { adam, sgd_momentum };

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct SgdHyper {
  double momentum = 0.9;
};

// Per-parameter slots are stored in parameter registration order.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double base_lr = 0.001;
  AdamHyper adam;
  SgdHyper sgd;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;   // adam
  std::vector<std::vector<double>> second_moment;  // adam
  std::vector<std::vector<double>> velocity;       // sgd
};

inline OptimizerState make_adam(const ModelParams& params, double base_lr,
                                AdamHyper hyper = {}) {
  OptimizerState state;
  state.kind = OptimizerKind::adam;
  state.base_lr = base_lr;
  state.adam = hyper;
  for (const Parameter& p : params) {
    state.first_moment.emplace_back(p.tensor.numel(), 0.0);
    state.second_moment.emplace_back(p.tensor.numel(), 0.0);
  }
  return state;
}

inline OptimizerState make_sgd(const ModelParams& params, double base_lr,
                               SgdHyper hyper = {}) {
  OptimizerState state;
  state.kind = OptimizerKind::sgd_momentum;
  state.base_lr = base_lr;
  state.sgd = hyper;
  for (const Parameter& p : params) state.velocity.emplace_back(p.tensor.numel(), 0.0);
  return state;
}

// One in-place update with bias-corrected Adam or heavy-ball SGD
// (v <- mu*v + g, p <- p - lr*v), then zeroes every gradient.
inline void optimizer_step(ModelParams& params, OptimizerState& state, double lr) {
  auto& slots = state.kind == OptimizerKind::adam ? state.first_moment : state.velocity;
  if (slots.size() != params.size() ||
      (state.kind == OptimizerKind::adam && state.second_moment.size() != params.size())) {
    throw StateError("optimizer holds " + std::to_string(slots.size()) +
                     " slots for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    if (!p.tensor.requires_grad() || !p.tensor.has_grad()) {
      throw StateError("parameter '" + p.name + "' has no gradient buffer");
    }
    if (slots[i].size() != p.tensor.numel() ||
        (state.kind == OptimizerKind::adam &&
         state.second_moment[i].size() != p.tensor.numel())) {
      throw StateError("optimizer slot shape mismatch for '" + p.name + "'");
    }
  }

  ++state.step;
  if (state.kind == OptimizerKind::adam) {
    const auto& h = state.adam;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(h.beta1, t);
    const double correction2 = 1.0 - std::pow(h.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& tensor = params[i].tensor;
      auto value = tensor.mutable_data();
      auto grad = tensor.grad();
      auto& m = state.first_moment[i];
      auto& v = state.second_moment[i];
      for (std::size_t j = 0; j < value.size(); ++j) {
        const double g = grad[j];
        m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g;
        v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g * g;
        const double m_hat = m[j] / correction1;
        const double v_hat = v[j] / correction2;
        value[j] -= lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
      }
    }
  } else {
    const double mu = state.sgd.momentum;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& tensor = params[i].tensor;
      auto value = tensor.mutable_data();
      auto grad = tensor.grad();
      auto& vel = state.velocity[i];
      for (std::size_t j = 0; j < value.size(); ++j) {
        vel[j] = mu * vel[j] + grad[j];
        value[j] -= lr * vel[j];
      }
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    detail::check_finite(params[i].tensor.data(), "optimizer_step");
  }
  params.zero_grad();
}

}  // namespace puzzlecloud
