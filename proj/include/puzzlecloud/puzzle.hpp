#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "puzzlecloud/errors.hpp"
#include "puzzlecloud/pointcloud.hpp"

namespace puzzlecloud {

// Splits each axis of the unit cube into `intervals` equal parts, giving
// intervals^3 voxels.
struct PuzzleConfig {
  int intervals = 3;

  explicit PuzzleConfig(int l = 3) : intervals(l) {
    if (l < 2) throw ConfigError("puzzle needs at least 2 intervals per axis, got " + std::to_string(l));
  }

  int num_voxels() const { return intervals * intervals * intervals; }
};

// A shuffled cloud and, per point, the voxel it was taken FROM.
struct PuzzledSample {
  std::vector<Point3> shuffled_points;
  std::vector<int> voxel_labels;   // original voxel of each point
  std::vector<int> permutation;    // original voxel v -> destination voxel
  std::vector<Point3> scaled_points;  // unit-cube input before shuffling
};

namespace detail {

constexpr double kVoxelTolerance = 1e-9;

// Axis interval of a coordinate in [0,1]: half-open [i/l, (i+1)/l) with the
// last interval closed.
inline int axis_interval(double coord, int l) {
  if (!(coord >= -kVoxelTolerance && coord <= 1.0 + kVoxelTolerance)) {
    throw DomainError("voxel coordinate " + std::to_string(coord) + " outside [0,1]");
  }
  const double clamped = std::clamp(coord, 0.0, 1.0);
  const int i = static_cast<int>(std::floor(clamped * l));
  return std::min(i, l - 1);
}

}  // namespace detail

// Linear voxel id i_x + l*i_y + l^2*i_z of a unit-cube point.
inline int voxel_index(const Point3& point, int l) {
  if (l < 1) throw ConfigError("voxel_index needs l >= 1");
  const int ix = detail::axis_interval(point[0], l);
  const int iy = detail::axis_interval(point[1], l);
  const int iz = detail::axis_interval(point[2], l);
  return ix + l * iy + l * l * iz;
}

inline std::array<int, 3> voxel_coords(int voxel, int l) {
  return {voxel % l, (voxel / l) % l, voxel / (l * l)};
}

// Points must already be unit-cube scaled.
inline std::vector<int> assign_voxel_labels(const PointCloud& cloud, const PuzzleConfig& config) {
  std::vector<int> labels;
  labels.reserve(cloud.size());
  for (const Point3& p : cloud.points) labels.push_back(voxel_index(p, config.intervals));
  return labels;
}

// Uniform permutation of every voxel, empty ones included (Fisher-Yates).
template <class Rng>
std::vector<int> random_voxel_permutation(const PuzzleConfig& config, Rng& rng) {
  const int n = config.num_voxels();
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  return perm;
}

inline bool is_permutation_of_voxels(std::span<const int> perm) {
  std::vector<bool> seen(perm.size(), false);
  for (int v : perm) {
    if (v < 0 || static_cast<std::size_t>(v) >= perm.size() || seen[static_cast<std::size_t>(v)]) {
      return false;
    }
    seen[static_cast<std::size_t>(v)] = true;
  }
  return true;
}

// Moves every point by center(perm[v]) - center(v), where v is its voxel, so
// each voxel's content travels as one rigid piece. Labels keep the original v.
//
// A point sitting exactly on a shared face can round into the neighbouring
// voxel after the move (and points on the closed top face of the last
// interval land on an open boundary). Such coordinates are nudged by a few
// ulps back inside the destination interval, so voxel_index of every shuffled
// point equals perm[label].
inline PuzzledSample apply_puzzle_with_permutation(const PointCloud& cloud,
                                                   const PuzzleConfig& config,
                                                   std::vector<int> permutation) {
  const int l = config.intervals;
  if (permutation.size() != static_cast<std::size_t>(config.num_voxels()) ||
      !is_permutation_of_voxels(permutation)) {
    throw ConfigError("puzzle permutation is not a bijection on " +
                      std::to_string(config.num_voxels()) + " voxels");
  }
  PointCloud scaled = scale_unit_cube(cloud);
  PuzzledSample out;
  out.voxel_labels = assign_voxel_labels(scaled, config);
  out.permutation = std::move(permutation);
  out.shuffled_points.reserve(scaled.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    const int from = out.voxel_labels[i];
    const int to = out.permutation[static_cast<std::size_t>(from)];
    const auto src = voxel_coords(from, l);
    const auto dst = voxel_coords(to, l);
    Point3 p = scaled.points[i];
    for (int a = 0; a < 3; ++a) {
      if (src[a] == dst[a]) continue;
      const double shift = static_cast<double>(dst[a] - src[a]) / l;
      double moved = p[a] + shift;
      const double lower = static_cast<double>(dst[a]) / l;
      const double upper = static_cast<double>(dst[a] + 1) / l;
      moved = std::clamp(moved, lower, upper);
      while (detail::axis_interval(moved, l) > dst[a]) moved = std::nextafter(moved, 0.0);
      while (detail::axis_interval(moved, l) < dst[a]) moved = std::nextafter(moved, 2.0);
      p[a] = moved;
    }
    out.shuffled_points.push_back(p);
  }
  out.scaled_points = std::move(scaled.points);
  return out;
}

// Full puzzle transform: unit-cube scale, label by voxel, draw a fresh
// permutation, move the pieces.
template <class Rng>
PuzzledSample apply_puzzle(const PointCloud& cloud, const PuzzleConfig& config, Rng& rng) {
  validate(cloud);
  return apply_puzzle_with_permutation(cloud, config, random_voxel_permutation(config, rng));
}

// Undoes the piece moves of a puzzled sample.
inline std::vector<Point3> unshuffle(const PuzzledSample& sample, int l) {
  std::vector<Point3> restored = sample.shuffled_points;
  for (std::size_t i = 0; i < restored.size(); ++i) {
    const int from = sample.voxel_labels[i];
    const auto src = voxel_coords(from, l);
    const auto dst = voxel_coords(sample.permutation[static_cast<std::size_t>(from)], l);
    for (int a = 0; a < 3; ++a) {
      restored[i][a] -= static_cast<double>(dst[a] - src[a]) / l;
    }
  }
  return restored;
}

// Fraction of points whose predicted original voxel is right.
inline double puzzle_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("puzzle_accuracy: " + std::to_string(predicted.size()) +
                         " predictions for " + std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw DimensionError("puzzle_accuracy on zero points");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace puzzlecloud
