#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "puzzlecloud/numerics/tensor.hpp"

namespace puzzlecloud {

// Affine map along the last axis: out[..., j] = bias[j] + sum_k in[..., k] * weight[k, j].
// Rows are computed independently with a fixed summation order, so the result
// for a row never depends on which other rows share the batch.
inline Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || bias.rank() != 1 || input.rank() < 1) {
    throw DimensionError("linear expects weight (Din,Dout) and bias (Dout), got " +
                         shape_str(weight.shape()) + " and " + shape_str(bias.shape()));
  }
  const std::size_t din = weight.dim(0);
  const std::size_t dout = weight.dim(1);
  if (input.shape().back() != din || bias.dim(0) != dout) {
    throw DimensionError("linear: input " + shape_str(input.shape()) + " vs weight " +
                         shape_str(weight.shape()) + " vs bias " +
                         shape_str(bias.shape()));
  }
  const std::size_t rows = input.numel() / din;
  Shape out_shape = input.shape();
  out_shape.back() = dout;

  std::vector<double> out(rows * dout);
  const double* x = input.data().data();
  const double* w = weight.data().data();
  const double* b = bias.data().data();
  for (std::size_t i = 0; i < rows; ++i) {
    double* o = out.data() + i * dout;
    std::copy(b, b + dout, o);
    const double* xi = x + i * din;
    for (std::size_t k = 0; k < din; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      const double* wk = w + k * dout;
      for (std::size_t j = 0; j < dout; ++j) o[j] += xv * wk[j];
    }
  }

  return detail::make_result(
      std::move(out_shape), std::move(out), "linear", {input, weight, bias},
      [rows, din, dout](detail::Node& self) {
        const double* g = self.grad.data();
        const double* x = self.parents[0]->data.data();
        const double* w = self.parents[1]->data.data();
        if (double* gx = detail::parent_grad(self, 0)) {
          for (std::size_t i = 0; i < rows; ++i) {
            const double* gi = g + i * dout;
            double* gxi = gx + i * din;
            for (std::size_t k = 0; k < din; ++k) {
              const double* wk = w + k * dout;
              double acc = 0.0;
              for (std::size_t j = 0; j < dout; ++j) acc += gi[j] * wk[j];
              gxi[k] += acc;
            }
          }
        }
        if (double* gw = detail::parent_grad(self, 1)) {
          for (std::size_t i = 0; i < rows; ++i) {
            const double* gi = g + i * dout;
            const double* xi = x + i * din;
            for (std::size_t k = 0; k < din; ++k) {
              const double xv = xi[k];
              if (xv == 0.0) continue;
              double* gwk = gw + k * dout;
              for (std::size_t j = 0; j < dout; ++j) gwk[j] += xv * gi[j];
            }
          }
        }
        if (double* gb = detail::parent_grad(self, 2)) {
          for (std::size_t i = 0; i < rows; ++i) {
            const double* gi = g + i * dout;
            for (std::size_t j = 0; j < dout; ++j) gb[j] += gi[j];
          }
        }
      });
}

// max(0, x); the subgradient at exactly 0 is 0.
inline Tensor relu(const Tensor& input) {
  std::vector<double> out(input.data().begin(), input.data().end());
  auto& recorder = detail::pattern_recorder();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool on = out[i] > 0.0;
    if (!on) out[i] = 0.0;
    if (recorder.active) recorder.mix(on ? 2 * i + 1 : 2 * i);
  }
  return detail::make_result(input.shape(), std::move(out), "relu", {input},
                             [](detail::Node& self) {
                               double* gx = detail::parent_grad(self, 0);
                               if (!gx) return;
                               const auto& x = self.parents[0]->data;
                               for (std::size_t i = 0; i < x.size(); ++i) {
                                 if (x[i] > 0.0) gx[i] += self.grad[i];
                               }
                             });
}

struct MaxPoolResult {
  Tensor values;                     // (B, D)
  std::vector<std::size_t> argmax;   // B*D point indices, row-major
};

// Symmetric aggregation over the point axis of a (B, K, D) tensor. Ties go to
// the lowest point index; the backward pass routes each feature's gradient to
// that single winner.
inline MaxPoolResult max_over_points(const Tensor& input) {
  if (input.rank() != 3) {
    throw DimensionError("max_over_points expects (B,K,D), got " +
                         shape_str(input.shape()));
  }
  const std::size_t batch = input.dim(0), points = input.dim(1), feats = input.dim(2);
  if (points == 0) throw DimensionError("max_over_points on an empty cloud (K == 0)");

  std::vector<double> out(batch * feats);
  std::vector<std::size_t> argmax(batch * feats, 0);
  const double* x = input.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x + b * points * feats;
    double* ob = out.data() + b * feats;
    std::size_t* ab = argmax.data() + b * feats;
    std::copy(xb, xb + feats, ob);
    for (std::size_t k = 1; k < points; ++k) {
      const double* row = xb + k * feats;
      for (std::size_t d = 0; d < feats; ++d) {
        if (row[d] > ob[d]) {
          ob[d] = row[d];
          ab[d] = k;
        }
      }
    }
  }
  auto& recorder = detail::pattern_recorder();
  if (recorder.active) {
    for (std::size_t i = 0; i < argmax.size(); ++i) recorder.mix(argmax[i] * 7919 + i);
  }

  Tensor values = detail::make_result(
      {batch, feats}, std::move(out), "max_over_points", {input},
      [argmax, points, feats](detail::Node& self) {
        double* gx = detail::parent_grad(self, 0);
        if (!gx) return;
        const std::size_t batch = self.shape[0];
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t d = 0; d < feats; ++d) {
            const std::size_t k = argmax[b * feats + d];
            gx[(b * points + k) * feats + d] += self.grad[b * feats + d];
          }
        }
      });
  return {std::move(values), std::move(argmax)};
}

// Mean over rows of -log softmax(logits)[target]. Leading axes are flattened,
// so (B, K, C) logits with B*K targets give a per-point loss.
inline Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets) {
  if (logits.rank() < 2) {
    throw DimensionError("softmax_cross_entropy expects (N,C), got " +
                         shape_str(logits.shape()));
  }
  const std::size_t classes = logits.shape().back();
  const std::size_t rows = classes ? logits.numel() / classes : 0;
  if (rows == 0) throw DimensionError("softmax_cross_entropy on zero rows");
  if (targets.size() != rows) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(rows) +
                         " rows but " + std::to_string(targets.size()) + " targets");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw LabelError("target " + std::to_string(t) + " outside [0," +
                       std::to_string(classes) + ")");
    }
  }

  std::vector<double> probs(rows * classes);
  const double* z = logits.data().data();
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* zi = z + i * classes;
    double* pi = probs.data() + i * classes;
    const double peak = *std::max_element(zi, zi + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      pi[c] = std::exp(zi[c] - peak);
      sum += pi[c];
    }
    for (std::size_t c = 0; c < classes; ++c) pi[c] /= sum;
    total += std::log(sum) - (zi[targets[i]] - peak);
  }
  const double loss = total / static_cast<double>(rows);

  std::vector<int> labels(targets.begin(), targets.end());
  return detail::make_result(
      {}, {loss}, "softmax_cross_entropy", {logits},
      [probs = std::move(probs), labels = std::move(labels), rows,
       classes](detail::Node& self) {
        double* gz = detail::parent_grad(self, 0);
        if (!gz) return;
        const double scale = self.grad[0] / static_cast<double>(rows);
        for (std::size_t i = 0; i < rows; ++i) {
          const double* pi = probs.data() + i * classes;
          double* gi = gz + i * classes;
          for (std::size_t c = 0; c < classes; ++c) gi[c] += scale * pi[c];
          gi[labels[i]] -= scale;
        }
      });
}

// Inverted dropout. Identity in eval mode or at rate 0 (no RNG is consumed).
template <class Rng>
Tensor dropout(const Tensor& input, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return input;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(input.numel());
  for (double& m : mask) m = unit(rng) < rate ? 0.0 : keep_scale;
  std::vector<double> out(input.numel());
  const auto x = input.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];

  return detail::make_result(input.shape(), std::move(out), "dropout", {input},
                             [mask = std::move(mask)](detail::Node& self) {
                               double* gx = detail::parent_grad(self, 0);
                               if (!gx) return;
                               for (std::size_t i = 0; i < mask.size(); ++i) {
                                 gx[i] += self.grad[i] * mask[i];
                               }
                             });
}

// Appends the per-shape global feature (B, Dg) to every point row of
// (B, K, Dl), giving (B, K, Dl + Dg).
inline Tensor concat_global(const Tensor& local, const Tensor& global) {
  if (local.rank() != 3 || global.rank() != 2 || local.dim(0) != global.dim(0)) {
    throw DimensionError("concat_global: local " + shape_str(local.shape()) +
                         " vs global " + shape_str(global.shape()));
  }
  const std::size_t batch = local.dim(0), points = local.dim(1);
  const std::size_t dl = local.dim(2), dg = global.dim(1), width = dl + dg;
  std::vector<double> out(batch * points * width);
  const double* l = local.data().data();
  const double* g = global.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < points; ++k) {
      double* row = out.data() + (b * points + k) * width;
      const double* lrow = l + (b * points + k) * dl;
      std::copy(lrow, lrow + dl, row);
      std::copy(g + b * dg, g + (b + 1) * dg, row + dl);
    }
  }
  return detail::make_result(
      {batch, points, width}, std::move(out), "concat_global", {local, global},
      [batch, points, dl, dg, width](detail::Node& self) {
        const double* go = self.grad.data();
        if (double* gl = detail::parent_grad(self, 0)) {
          for (std::size_t r = 0; r < batch * points; ++r) {
            for (std::size_t d = 0; d < dl; ++d) gl[r * dl + d] += go[r * width + d];
          }
        }
        if (double* gg = detail::parent_grad(self, 1)) {
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t k = 0; k < points; ++k) {
              const double* row = go + (b * points + k) * width + dl;
              for (std::size_t d = 0; d < dg; ++d) gg[b * dg + d] += row[d];
            }
          }
        }
      });
}

// a + weight * b for same-shape tensors.
inline Tensor add_scaled(const Tensor& a, const Tensor& b, double weight) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add_scaled: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + weight * b.data()[i];
  return detail::make_result(a.shape(), std::move(out), "add_scaled", {a, b},
                             [weight](detail::Node& self) {
                               const std::size_t n = self.grad.size();
                               if (double* ga = detail::parent_grad(self, 0)) {
                                 for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i];
                               }
                               if (double* gb = detail::parent_grad(self, 1)) {
                                 for (std::size_t i = 0; i < n; ++i) {
                                   gb[i] += weight * self.grad[i];
                                 }
                               }
                             });
}

// Running statistics of a batch-standardization layer.
struct RunningStats {
  std::vector<double> mean;
  std::vector<double> variance;
};

// Per-feature standardization over all leading axes, without affine terms.
// Training mode uses batch moments and (optionally) folds them into `stats`
// with the given momentum on the old value; eval mode uses `stats`.
inline Tensor batch_standardize(const Tensor& input, RunningStats& stats, bool training,
                                bool update_stats, double momentum = 0.9,
                                double epsilon = 1e-5) {
  const std::size_t feats = input.shape().back();
  const std::size_t rows = input.numel() / feats;
  if (stats.mean.size() != feats || stats.variance.size() != feats) {
    throw DimensionError("batch_standardize: running stats sized " +
                         std::to_string(stats.mean.size()) + " for " +
                         std::to_string(feats) + " features");
  }
  const double* x = input.data().data();
  std::vector<double> mean(feats, 0.0), var(feats, 0.0);
  if (training) {
    if (rows < 2) throw DimensionError("batch_standardize needs at least 2 rows in training");
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t d = 0; d < feats; ++d) mean[d] += x[i * feats + d];
    for (double& m : mean) m /= static_cast<double>(rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t d = 0; d < feats; ++d) {
        const double c = x[i * feats + d] - mean[d];
        var[d] += c * c;
      }
    for (double& v : var) v /= static_cast<double>(rows);
    if (update_stats) {
      for (std::size_t d = 0; d < feats; ++d) {
        stats.mean[d] = momentum * stats.mean[d] + (1.0 - momentum) * mean[d];
        stats.variance[d] = momentum * stats.variance[d] + (1.0 - momentum) * var[d];
      }
    }
  } else {
    mean = stats.mean;
    var = stats.variance;
  }
  std::vector<double> inv_std(feats);
  for (std::size_t d = 0; d < feats; ++d) inv_std[d] = 1.0 / std::sqrt(var[d] + epsilon);
  std::vector<double> out(input.numel());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t d = 0; d < feats; ++d)
      out[i * feats + d] = (x[i * feats + d] - mean[d]) * inv_std[d];

  std::vector<double> normalized = training ? out : std::vector<double>{};
  return detail::make_result(
      input.shape(), std::move(out), "batch_standardize", {input},
      [inv_std, normalized = std::move(normalized), rows, feats,
       training](detail::Node& self) {
        double* gx = detail::parent_grad(self, 0);
        if (!gx) return;
        const double* g = self.grad.data();
        if (!training) {
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t d = 0; d < feats; ++d)
              gx[i * feats + d] += g[i * feats + d] * inv_std[d];
          return;
        }
        std::vector<double> sum_g(feats, 0.0), sum_gx(feats, 0.0);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t d = 0; d < feats; ++d) {
            sum_g[d] += g[i * feats + d];
            sum_gx[d] += g[i * feats + d] * normalized[i * feats + d];
          }
        const double n = static_cast<double>(rows);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t d = 0; d < feats; ++d) {
            const std::size_t at = i * feats + d;
            gx[at] += inv_std[d] / n *
                      (n * g[at] - sum_g[d] - normalized[at] * sum_gx[d]);
          }
      });
}

// Index of the largest entry in each row of the last axis; lowest index wins ties.
inline std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t classes = logits.shape().back();
  const std::size_t rows = logits.numel() / classes;
  std::vector<int> out(rows);
  const double* z = logits.data().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* zi = z + i * classes;
    out[i] = static_cast<int>(std::max_element(zi, zi + classes) - zi);
  }
  return out;
}

}  // namespace puzzlecloud
