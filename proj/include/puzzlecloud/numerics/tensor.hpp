#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "puzzlecloud/errors.hpp"

namespace puzzlecloud {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first backward reaches it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

// Running FNV-1a hash over the discrete choices made by piecewise ops
// (ReLU signs, max-pool winners). Gradient checking uses it to detect when a
// finite-difference probe crossed a kink.
struct PatternRecorder {
  bool active = false;
  std::uint64_t hash = 1469598103934665603ull;

  void mix(std::uint64_t v) {
    hash ^= v;
    hash *= 1099511628211ull;
  }
};

inline PatternRecorder& pattern_recorder() {
  thread_local PatternRecorder recorder;
  return recorder;
}

inline void check_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + " produced a non-finite value");
    }
  }
}

}  // namespace detail

// Disables graph construction for its lifetime (evaluation, probes).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

// Dense row-major float64 array with optional gradient. Copies share storage
// (handle semantics), which is what lets one parameter feed several graphs.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (shape_numel(shape) != data.size()) {
      throw DimensionError("tensor shape " + shape_str(shape) + " needs " +
                           std::to_string(shape_numel(shape)) + " values, got " +
                           std::to_string(data.size()));
    }
    detail::check_finite(data, "tensor");
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
    if (requires_grad) node_->ensure_grad();
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor scalar(double value) { return Tensor({}, {value}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }

  double item() const {
    if (numel() != 1) {
      throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    }
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }

  void zero_grad() {
    if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  const char* op_name() const { return node_->op; }

  // Same values, cut from the graph.
  Tensor detach() const { return Tensor(shape(), node_->data, false); }

  // Reverse-mode sweep from a scalar. Gradients accumulate into every
  // reachable tensor that requires them.
  void backward() const {
    if (numel() != 1) {
      throw DimensionError("backward() needs a scalar, got shape " +
                           shape_str(shape()));
    }
    if (!node_->requires_grad) return;

    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        detail::Node* parent = node->parents[next++].get();
        if (parent->requires_grad && visited.insert(parent).second) {
          stack.emplace_back(parent, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }

    node_->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Node* node = *it;
      if (node->backward && node->grad.size() == node->data.size()) {
        node->backward(*node);
      }
    }
  }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

// Wraps freshly computed op output. The graph edge is only recorded when grad
// mode is on and some input needs a gradient.
inline Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                          std::vector<Tensor> inputs,
                          std::function<void(Node&)> backward_fn) {
  check_finite(data, op);
  auto holder = std::make_shared<Node>();
  holder->shape = std::move(shape);
  holder->data = std::move(data);
  Tensor out(holder);
  Node& node = *holder;
  node.op = op;
  bool needs_grad = false;
  if (grad_mode()) {
    for (const Tensor& in : inputs) needs_grad = needs_grad || in.requires_grad();
  }
  if (needs_grad) {
    node.requires_grad = true;
    for (const Tensor& in : inputs) node.parents.push_back(in.node());
    node.backward = std::move(backward_fn);
  }
  return out;
}

// Gradient buffer of parent `i`, or nullptr when it does not need one.
inline double* parent_grad(Node& node, std::size_t i) {
  Node& parent = *node.parents[i];
  if (!parent.requires_grad) return nullptr;
  return parent.ensure_grad().data();
}

}  // namespace detail
}  // namespace puzzlecloud
