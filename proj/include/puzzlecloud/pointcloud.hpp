#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "puzzlecloud/errors.hpp"

namespace puzzlecloud {

using Point3 = std::array<double, 3>;

// K unordered points with optional shape-level and per-point labels.
struct PointCloud {
  std::vector<Point3> points;
  std::optional<int> class_label;
  std::optional<std::vector<int>> part_labels;
  std::string source_id;

  std::size_t size() const { return points.size(); }
};

// A cloud with every main-task label removed. Streams that only feed the
// self-supervised loss hold these, so reading a label is a hard error.
class UnlabeledCloud {
 public:
  UnlabeledCloud() = default;
  explicit UnlabeledCloud(const PointCloud& cloud)
      : points_(cloud.points), source_id_(cloud.source_id) {}

  const std::vector<Point3>& points() const { return points_; }
  const std::string& source_id() const { return source_id_; }
  std::size_t size() const { return points_.size(); }

  [[noreturn]] int class_label() const {
    throw LabelError("class label of '" + source_id_ + "' was stripped");
  }
  [[noreturn]] const std::vector<int>& part_labels() const {
    throw LabelError("part labels of '" + source_id_ + "' were stripped");
  }

  PointCloud as_cloud() const {
    PointCloud cloud;
    cloud.points = points_;
    cloud.source_id = source_id_;
    return cloud;
  }

 private:
  std::vector<Point3> points_;
  std::string source_id_;
};

inline void validate(const PointCloud& cloud) {
  if (cloud.points.empty()) {
    throw DimensionError("point cloud '" + cloud.source_id + "' has no points");
  }
  for (const Point3& p : cloud.points) {
    for (double c : p) {
      if (!std::isfinite(c)) {
        throw NumericError("point cloud '" + cloud.source_id + "' has a non-finite coordinate");
      }
    }
  }
  if (cloud.part_labels && cloud.part_labels->size() != cloud.points.size()) {
    throw DimensionError("point cloud '" + cloud.source_id + "' has " +
                         std::to_string(cloud.part_labels->size()) + " part labels for " +
                         std::to_string(cloud.points.size()) + " points");
  }
}

struct Mesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::size_t, 3>> faces;
};

inline double triangle_area(const Point3& a, const Point3& b, const Point3& c) {
  const Point3 u{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  const Point3 v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
  const double x = u[1] * v[2] - u[2] * v[1];
  const double y = u[2] * v[0] - u[0] * v[2];
  const double z = u[0] * v[1] - u[1] * v[0];
  return 0.5 * std::sqrt(x * x + y * y + z * z);
}

// A labeled collection. `category_parts[c]` lists the part ids that belong to
// class c (used by per-category mIoU); `num_parts` counts every part id in use.
struct Dataset {
  std::vector<PointCloud> samples;
  std::vector<std::string> class_names;
  std::optional<int> num_parts;
  std::vector<std::vector<int>> category_parts;
  std::vector<std::string> part_names;

  std::size_t size() const { return samples.size(); }

  void validate() const {
    for (const PointCloud& s : samples) {
      puzzlecloud::validate(s);
      if (s.class_label &&
          (*s.class_label < 0 ||
           static_cast<std::size_t>(*s.class_label) >= class_names.size())) {
        throw LabelError("sample '" + s.source_id + "' has class label " +
                         std::to_string(*s.class_label) + " outside " +
                         std::to_string(class_names.size()) + " classes");
      }
      if (s.part_labels) {
        if (!num_parts) {
          throw LabelError("sample '" + s.source_id + "' has part labels but dataset has no part count");
        }
        for (int part : *s.part_labels) {
          if (part < 0 || part >= *num_parts) {
            throw LabelError("sample '" + s.source_id + "' has part label " +
                             std::to_string(part) + " outside [0," +
                             std::to_string(*num_parts) + ")");
          }
        }
      }
    }
  }

  // Copy of the metadata with no samples.
  Dataset empty_like() const {
    Dataset out;
    out.class_names = class_names;
    out.num_parts = num_parts;
    out.category_parts = category_parts;
    out.part_names = part_names;
    return out;
  }
};

struct SurfaceSample {
  PointCloud cloud;
  std::vector<std::size_t> face_index;  // face each point was drawn from
};

// Area-weighted face choice, then uniform barycentric sampling
// (sqrt(r1) warp). Zero-area faces are never chosen.
template <class Rng>
SurfaceSample sample_mesh_surface_with_faces(const Mesh& mesh, std::size_t k, Rng& rng) {
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    for (std::size_t v : face) {
      if (v >= mesh.vertices.size()) {
        throw DegenerateError("face " + std::to_string(f) + " references vertex " +
                              std::to_string(v) + " of " +
                              std::to_string(mesh.vertices.size()));
      }
    }
    total += triangle_area(mesh.vertices[face[0]], mesh.vertices[face[1]],
                           mesh.vertices[face[2]]);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw DegenerateError("mesh has zero total surface area");

  std::uniform_real_distribution<double> pick(0.0, total);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SurfaceSample out;
  out.cloud.points.reserve(k);
  out.face_index.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double target = pick(rng);
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    // Only reachable through the end clamp: step back off trailing zero-area faces.
    std::size_t f = static_cast<std::size_t>(it - cumulative.begin());
    while (f > 0 && cumulative[f] == cumulative[f - 1]) --f;
    const auto& face = mesh.faces[f];
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    const double w0 = 1.0 - r1, w1 = r1 * (1.0 - r2), w2 = r1 * r2;
    const Point3& a = mesh.vertices[face[0]];
    const Point3& b = mesh.vertices[face[1]];
    const Point3& c = mesh.vertices[face[2]];
    out.cloud.points.push_back({w0 * a[0] + w1 * b[0] + w2 * c[0],
                                w0 * a[1] + w1 * b[1] + w2 * c[1],
                                w0 * a[2] + w1 * b[2] + w2 * c[2]});
    out.face_index.push_back(f);
  }
  return out;
}

template <class Rng>
PointCloud sample_mesh_surface(const Mesh& mesh, std::size_t k, Rng& rng) {
  return sample_mesh_surface_with_faces(mesh, k, rng).cloud;
}

// Centroid to the origin, farthest point to norm 1.
inline PointCloud normalize_unit_sphere(PointCloud cloud) {
  validate(cloud);
  Point3 centroid{0.0, 0.0, 0.0};
  for (const Point3& p : cloud.points)
    for (int a = 0; a < 3; ++a) centroid[a] += p[a];
  for (double& c : centroid) c /= static_cast<double>(cloud.size());
  double max_norm = 0.0;
  for (Point3& p : cloud.points) {
    for (int a = 0; a < 3; ++a) p[a] -= centroid[a];
    max_norm = std::max(max_norm, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
  }
  if (!(max_norm > 0.0)) {
    throw DegenerateError("cloud '" + cloud.source_id + "' collapses to a single point");
  }
  for (Point3& p : cloud.points)
    for (double& c : p) c /= max_norm;
  return cloud;
}

// Min corner to the origin, then one uniform scale so the longest extent
// spans [0, 1]. Aspect ratio is preserved.
inline PointCloud scale_unit_cube(PointCloud cloud) {
  validate(cloud);
  Point3 lo = cloud.points.front(), hi = cloud.points.front();
  for (const Point3& p : cloud.points) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  if (!(extent > 0.0)) {
    throw DegenerateError("cloud '" + cloud.source_id + "' has zero extent on every axis");
  }
  for (Point3& p : cloud.points) {
    for (int a = 0; a < 3; ++a) {
      p[a] = std::clamp((p[a] - lo[a]) / extent, 0.0, 1.0);
    }
  }
  return cloud;
}

// Adds clipped Gaussian noise N(0, sigma) to every coordinate.
template <class Rng>
PointCloud jitter(PointCloud cloud, double sigma, double clip, Rng& rng) {
  if (sigma < 0.0 || !(clip > 0.0)) {
    throw ConfigError("jitter needs sigma >= 0 and clip > 0");
  }
  if (sigma == 0.0) return cloud;
  std::normal_distribution<double> noise(0.0, sigma);
  for (Point3& p : cloud.points)
    for (double& c : p) c += std::clamp(noise(rng), -clip, clip);
  return cloud;
}

// Rotation about the up (y) axis:
// x' = x cos t + z sin t, y' = y, z' = -x sin t + z cos t.
inline PointCloud rotate_y(PointCloud cloud, double angle) {
  if (angle == 0.0) return cloud;
  const double c = std::cos(angle), s = std::sin(angle);
  for (Point3& p : cloud.points) {
    const double x = p[0], z = p[2];
    p[0] = x * c + z * s;
    p[2] = -x * s + z * c;
  }
  return cloud;
}

}  // namespace puzzlecloud
