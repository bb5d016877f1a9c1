#pragma once

#include <cmath>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "puzzlecloud/numerics/tensor.hpp"

namespace puzzlecloud {

// Which part of the network a parameter belongs to: the shared feature
// extractor, the main-task head, or the puzzle head.
enum class ParamGroup { feature, main_head, puzzle_head };

inline std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::feature: return "feature";
    case ParamGroup::main_head: return "main_head";
    case ParamGroup::puzzle_head: return "puzzle_head";
  }
  return "?";
}

inline ParamGroup param_group_from_string(std::string_view name) {
  if (name == "feature") return ParamGroup::feature;
  if (name == "main_head") return ParamGroup::main_head;
  if (name == "puzzle_head") return ParamGroup::puzzle_head;
  throw ConfigError("unknown parameter group '" + std::string(name) + "'");
}

struct Parameter {
  std::string name;
  Tensor tensor;
  ParamGroup group;
};

// Ordered, name-unique collection of trainable tensors.
class ModelParams {
 public:
  // Registers a zero-initialized trainable tensor and returns its index.
  std::size_t add(std::string name, Shape shape, ParamGroup group) {
    for (const Parameter& p : params_) {
      if (p.name == name) throw ConfigError("duplicate parameter name '" + name + "'");
    }
    params_.push_back({std::move(name), Tensor::zeros(std::move(shape), true), group});
    return params_.size() - 1;
  }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  const Parameter* find(std::string_view name) const {
    for (const Parameter& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  void zero_grad() {
    for (Parameter& p : params_) p.tensor.zero_grad();
  }

  // Deep copy: the returned set owns fresh storage.
  ModelParams clone() const {
    ModelParams copy;
    for (const Parameter& p : params_) {
      Tensor t(p.tensor.shape(), std::vector<double>(p.tensor.data().begin(),
                                                     p.tensor.data().end()),
               true);
      copy.params_.push_back({p.name, std::move(t), p.group});
    }
    return copy;
  }

  std::size_t count_values() const {
    std::size_t n = 0;
    for (const Parameter& p : params_) n += p.tensor.numel();
    return n;
  }

 private:
  std::vector<Parameter> params_;
};

// He-uniform fill, U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <class Rng>
void he_uniform(Tensor& weight, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : weight.mutable_data()) v = dist(rng);
}

}  // namespace puzzlecloud
