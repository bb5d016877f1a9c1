#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "puzzlecloud/errors.hpp"
#include "puzzlecloud/io.hpp"
#include "puzzlecloud/pointcloud.hpp"

namespace puzzlecloud {

enum class PrimitiveKind { box, cylinder, sphere };

// Axis-aligned solid: `size` is the half-extent per axis for boxes,
// (radius, half-height, radius) for y-axis cylinders and the radii of an
// ellipsoid for spheres.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::box;
  Point3 center{0.0, 0.0, 0.0};
  Point3 size{0.5, 0.5, 0.5};
  int part = 0;  // recipe-local part id
};

struct ShapeRecipe {
  std::string class_name;
  std::vector<std::string> part_names;  // recipe-local ids index this
  std::vector<Primitive> primitives;
  double variation = 0.15;  // per-axis stretch drawn from [1-v, 1+v] per sample

  void validate() const {
    if (class_name.empty()) throw ConfigError("recipe without a class name");
    if (primitives.empty()) throw ConfigError("recipe '" + class_name + "' has no primitives");
    if (part_names.empty()) throw ConfigError("recipe '" + class_name + "' declares no parts");
    std::vector<bool> used(part_names.size(), false);
    for (const Primitive& p : primitives) {
      if (p.part < 0 || static_cast<std::size_t>(p.part) >= part_names.size()) {
        throw ConfigError("recipe '" + class_name + "' uses undeclared part " + std::to_string(p.part));
      }
      for (double s : p.size) {
        if (!(s > 0.0)) throw ConfigError("recipe '" + class_name + "' has a degenerate primitive");
      }
      used[static_cast<std::size_t>(p.part)] = true;
    }
    if (std::find(used.begin(), used.end(), false) != used.end()) {
      throw ConfigError("recipe '" + class_name + "' declares a part no primitive covers");
    }
    if (!(variation >= 0.0 && variation < 1.0)) {
      throw ConfigError("recipe '" + class_name + "' variation must lie in [0,1)");
    }
  }
};

// Corruption applied after surface sampling. The clean profile leaves the
// sampled surface untouched; the scan-like one adds noise, a missing slab
// and clutter.
struct DomainProfile {
  std::string name = "clean";
  double jitter_sigma = 0.0;
  double jitter_clip = 0.05;
  double occlusion_fraction = 0.0;   // share of the surface removed by a random half-space
  double background_fraction = 0.0;  // per-point probability of a clutter point
  bool random_rotation = false;      // about y

  void validate() const {
    if (!(occlusion_fraction >= 0.0 && occlusion_fraction < 1.0)) {
      throw ConfigError("occlusion_fraction must lie in [0,1)");
    }
    if (!(background_fraction >= 0.0 && background_fraction < 1.0)) {
      throw ConfigError("background_fraction must lie in [0,1)");
    }
    if (jitter_sigma < 0.0 || !(jitter_clip > 0.0)) {
      throw ConfigError("jitter needs sigma >= 0 and clip > 0");
    }
  }
};

inline DomainProfile clean_profile() { return {}; }

inline DomainProfile scan_profile() {
  DomainProfile p;
  p.name = "scan";
  p.jitter_sigma = 0.02;
  p.occlusion_fraction = 0.25;
  p.background_fraction = 0.1;
  p.random_rotation = true;
  return p;
}

inline DomainProfile profile_from_name(const std::string& name) {
  if (name == "clean") return clean_profile();
  if (name == "scan") return scan_profile();
  throw ConfigError("unknown domain profile '" + name + "'");
}

inline Mesh box_mesh(const Point3& c, const Point3& h) {
  Mesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.push_back({c[0] + ((i & 1) ? h[0] : -h[0]), c[1] + ((i & 2) ? h[1] : -h[1]),
                          c[2] + ((i & 4) ? h[2] : -h[2])});
  }
  const std::array<std::array<std::size_t, 4>, 6> quads{{
      {0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1}, {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}}};
  for (const auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

// Closed cylinder along y.
inline Mesh cylinder_mesh(const Point3& c, const Point3& s, std::size_t segments = 24) {
  Mesh m;
  const double rx = s[0], hy = s[1], rz = s[2];
  for (std::size_t i = 0; i < segments; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(segments);
    m.vertices.push_back({c[0] + rx * std::cos(t), c[1] - hy, c[2] + rz * std::sin(t)});
    m.vertices.push_back({c[0] + rx * std::cos(t), c[1] + hy, c[2] + rz * std::sin(t)});
  }
  const std::size_t bottom = m.vertices.size();
  m.vertices.push_back({c[0], c[1] - hy, c[2]});
  m.vertices.push_back({c[0], c[1] + hy, c[2]});
  for (std::size_t i = 0; i < segments; ++i) {
    const std::size_t j = (i + 1) % segments;
    m.faces.push_back({2 * i, 2 * j, 2 * j + 1});
    m.faces.push_back({2 * i, 2 * j + 1, 2 * i + 1});
    m.faces.push_back({bottom, 2 * j, 2 * i});
    m.faces.push_back({bottom + 1, 2 * i + 1, 2 * j + 1});
  }
  return m;
}

// Latitude/longitude ellipsoid.
inline Mesh sphere_mesh(const Point3& c, const Point3& r, std::size_t stacks = 12,
                        std::size_t slices = 24) {
  Mesh m;
  m.vertices.push_back({c[0], c[1] + r[1], c[2]});
  for (std::size_t i = 1; i < stacks; ++i) {
    const double phi = std::numbers::pi * static_cast<double>(i) / static_cast<double>(stacks);
    for (std::size_t j = 0; j < slices; ++j) {
      const double t = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(slices);
      m.vertices.push_back({c[0] + r[0] * std::sin(phi) * std::cos(t), c[1] + r[1] * std::cos(phi),
                            c[2] + r[2] * std::sin(phi) * std::sin(t)});
    }
  }
  const std::size_t south = m.vertices.size();
  m.vertices.push_back({c[0], c[1] - r[1], c[2]});
  auto ring = [&](std::size_t i, std::size_t j) { return 1 + (i - 1) * slices + j % slices; };
  for (std::size_t j = 0; j < slices; ++j) {
    m.faces.push_back({0, ring(1, j + 1), ring(1, j)});
    m.faces.push_back({south, ring(stacks - 1, j), ring(stacks - 1, j + 1)});
  }
  for (std::size_t i = 1; i + 1 < stacks; ++i) {
    for (std::size_t j = 0; j < slices; ++j) {
      m.faces.push_back({ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)});
      m.faces.push_back({ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)});
    }
  }
  return m;
}

inline Mesh primitive_mesh(const Primitive& p) {
  switch (p.kind) {
    case PrimitiveKind::box: return box_mesh(p.center, p.size);
    case PrimitiveKind::cylinder: return cylinder_mesh(p.center, p.size);
    case PrimitiveKind::sphere: return sphere_mesh(p.center, p.size);
  }
  return {};
}

// Table, chair, lamp and mug: four classes with two or three parts each.
inline std::vector<ShapeRecipe> builtin_recipes() {
  using K = PrimitiveKind;
  std::vector<ShapeRecipe> out;

  ShapeRecipe table{"table", {"top", "leg"}, {}};
  table.primitives.push_back({K::box, {0.0, 0.5, 0.0}, {0.8, 0.05, 0.5}, 0});
  for (double x : {-0.7, 0.7})
    for (double z : {-0.4, 0.4}) table.primitives.push_back({K::box, {x, 0.0, z}, {0.05, 0.45, 0.05}, 1});
  out.push_back(table);

  ShapeRecipe chair{"chair", {"seat", "back", "leg"}, {}};
  chair.primitives.push_back({K::box, {0.0, 0.0, 0.0}, {0.4, 0.05, 0.4}, 0});
  chair.primitives.push_back({K::box, {0.0, 0.5, -0.37}, {0.4, 0.45, 0.04}, 1});
  for (double x : {-0.35, 0.35})
    for (double z : {-0.35, 0.35}) chair.primitives.push_back({K::cylinder, {x, -0.45, z}, {0.04, 0.4, 0.04}, 2});
  out.push_back(chair);

  ShapeRecipe lamp{"lamp", {"base", "pole", "shade"}, {}};
  lamp.primitives.push_back({K::cylinder, {0.0, -0.8, 0.0}, {0.35, 0.05, 0.35}, 0});
  lamp.primitives.push_back({K::cylinder, {0.0, -0.1, 0.0}, {0.04, 0.65, 0.04}, 1});
  lamp.primitives.push_back({K::sphere, {0.0, 0.7, 0.0}, {0.4, 0.25, 0.4}, 2});
  out.push_back(lamp);

  ShapeRecipe mug{"mug", {"body", "handle"}, {}};
  mug.primitives.push_back({K::cylinder, {0.0, 0.0, 0.0}, {0.4, 0.5, 0.4}, 0});
  mug.primitives.push_back({K::box, {0.55, 0.0, 0.0}, {0.15, 0.3, 0.05}, 1});
  out.push_back(mug);

  return out;
}

namespace detail {

template <class Rng>
PointCloud generate_shape(const ShapeRecipe& recipe, std::size_t k,
                          const std::vector<int>& global_parts, int background_part,
                          const DomainProfile& profile, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Point3 stretch;
  for (double& s : stretch) s = 1.0 + recipe.variation * (2.0 * unit(rng) - 1.0);

  Mesh mesh;
  std::vector<int> face_part;
  for (const Primitive& p : recipe.primitives) {
    Primitive q = p;
    for (int a = 0; a < 3; ++a) {
      q.center[a] *= stretch[a];
      q.size[a] *= stretch[a];
    }
    const Mesh piece = primitive_mesh(q);
    const std::size_t offset = mesh.vertices.size();
    mesh.vertices.insert(mesh.vertices.end(), piece.vertices.begin(), piece.vertices.end());
    for (const auto& f : piece.faces) {
      mesh.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
      face_part.push_back(global_parts[static_cast<std::size_t>(p.part)]);
    }
  }

  std::size_t background = 0;
  if (profile.background_fraction > 0.0) {
    std::bernoulli_distribution clutter(profile.background_fraction);
    for (std::size_t i = 0; i < k; ++i) background += clutter(rng);
    background = std::min(background, k - 1);
  }
  const std::size_t object = k - background;
  const auto drawn = static_cast<std::size_t>(
      std::ceil(static_cast<double>(object) / (1.0 - profile.occlusion_fraction)));

  SurfaceSample surface = sample_mesh_surface_with_faces(mesh, drawn, rng);
  std::vector<std::size_t> order(drawn);
  for (std::size_t i = 0; i < drawn; ++i) order[i] = i;
  if (drawn > object) {
    // Occlusion: keep the `object` points lowest along a random direction.
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Point3 dir{gauss(rng), gauss(rng), gauss(rng)};
    std::vector<double> depth(drawn);
    for (std::size_t i = 0; i < drawn; ++i) {
      const Point3& p = surface.cloud.points[i];
      depth[i] = p[0] * dir[0] + p[1] * dir[1] + p[2] * dir[2];
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return depth[a] < depth[b]; });
    order.resize(object);
    std::sort(order.begin(), order.end());
  }

  PointCloud cloud;
  cloud.part_labels.emplace();
  Point3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (std::size_t i : order) {
    const Point3& p = surface.cloud.points[i];
    cloud.points.push_back(p);
    cloud.part_labels->push_back(face_part[surface.face_index[i]]);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  // Clutter fills the object's bounding box grown by a quarter per side.
  for (std::size_t i = 0; i < background; ++i) {
    Point3 p;
    for (int a = 0; a < 3; ++a) {
      const double pad = 0.25 * (hi[a] - lo[a]);
      p[a] = lo[a] - pad + unit(rng) * (hi[a] - lo[a] + 2.0 * pad);
    }
    cloud.points.push_back(p);
    cloud.part_labels->push_back(background_part);
  }

  if (profile.jitter_sigma > 0.0) cloud = jitter(std::move(cloud), profile.jitter_sigma, profile.jitter_clip, rng);
  if (profile.random_rotation) cloud = rotate_y(std::move(cloud), 2.0 * std::numbers::pi * unit(rng));
  return normalize_unit_sphere(std::move(cloud));
}

}  // namespace detail

// Labels: class id = recipe index; part ids are numbered recipe by recipe,
// and the last id marks background clutter. The label space depends only on
// the recipes, never on the profile.
inline Dataset generate_dataset(const std::vector<ShapeRecipe>& recipes, std::size_t samples_per_class,
                                std::size_t k_points, const DomainProfile& profile,
                                std::uint64_t seed) {
  if (recipes.size() < 2) throw ConfigError("datagen needs at least 2 recipes");
  if (k_points < 64) throw ConfigError("datagen needs k_points >= 64");
  if (samples_per_class < 1) throw ConfigError("datagen needs samples_per_class >= 1");
  profile.validate();

  Dataset out;
  int next_part = 0;
  std::vector<std::vector<int>> global_parts;
  for (const ShapeRecipe& r : recipes) {
    r.validate();
    out.class_names.push_back(r.class_name);
    std::vector<int> ids;
    for (const std::string& part : r.part_names) {
      ids.push_back(next_part++);
      out.part_names.push_back(r.class_name + "/" + part);
    }
    out.category_parts.push_back(ids);
    global_parts.push_back(std::move(ids));
  }
  const int background_part = next_part;
  out.part_names.push_back("background");
  out.num_parts = next_part + 1;

  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < recipes.size(); ++c) {
    for (std::size_t i = 0; i < samples_per_class; ++i) {
      PointCloud cloud =
          detail::generate_shape(recipes[c], k_points, global_parts[c], background_part, profile, rng);
      cloud.class_label = static_cast<int>(c);
      cloud.source_id = profile.name + "/" + std::to_string(seed) + "/" + recipes[c].class_name + "/" +
                        std::to_string(i);
      out.samples.push_back(std::move(cloud));
    }
  }
  out.validate();
  return out;
}

// Stratified disjoint split; each class keeps at least one sample per side.
inline std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction,
                                         std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0,1)");
  }
  std::vector<std::vector<std::size_t>> by_class(dataset.class_names.size());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& label = dataset.samples[i].class_label;
    if (!label) throw DatasetError("sample '" + dataset.samples[i].source_id + "' has no class label");
    by_class.at(static_cast<std::size_t>(*label)).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<bool> test(dataset.samples.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(members.size())));
    if (n_test < 1 || n_test >= members.size()) {
      throw DatasetError("class '" + dataset.class_names[c] + "' with " +
                         std::to_string(members.size()) + " samples is too small to split");
    }
    for (std::size_t i = members.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(members[i - 1], members[pick(rng)]);
    }
    for (std::size_t i = 0; i < n_test; ++i) test[members[i]] = true;
  }
  Dataset train = dataset.empty_like();
  Dataset held = dataset.empty_like();
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    (test[i] ? held : train).samples.push_back(dataset.samples[i]);
  }
  return {std::move(train), std::move(held)};
}

// One labeled PLY per sample plus manifest.json holding the label space.
inline void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["class_names"] = dataset.class_names;
  manifest["part_names"] = dataset.part_names;
  manifest["category_parts"] = dataset.category_parts;
  if (dataset.num_parts) manifest["num_parts"] = *dataset.num_parts;
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const PointCloud& s = dataset.samples[i];
    char name[32];
    std::snprintf(name, sizeof name, "sample_%05zu.ply", i);
    write_ply_points((dir / name).string(), s);
    nlohmann::json e{{"file", name}, {"source_id", s.source_id}};
    if (s.class_label) e["class_label"] = *s.class_label;
    entries.push_back(e);
  }
  manifest["samples"] = entries;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DatasetError("no manifest.json in '" + dir.string() + "'");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
    if (manifest.at("schema_version").get<int>() != 1) {
      throw DatasetError("unsupported manifest schema_version in '" + path.string() + "'");
    }
    Dataset out;
    out.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    out.part_names = manifest.value("part_names", std::vector<std::string>{});
    out.category_parts = manifest.value("category_parts", std::vector<std::vector<int>>{});
    if (manifest.contains("num_parts")) out.num_parts = manifest["num_parts"].get<int>();
    for (const auto& e : manifest.at("samples")) {
      PointCloud s = read_ply_points((dir / e.at("file").get<std::string>()).string());
      s.source_id = e.value("source_id", s.source_id);
      if (e.contains("class_label")) s.class_label = e["class_label"].get<int>();
      out.samples.push_back(std::move(s));
    }
    out.validate();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError("bad manifest '" + path.string() + "': " + e.what());
  }
}

}  // namespace puzzlecloud
