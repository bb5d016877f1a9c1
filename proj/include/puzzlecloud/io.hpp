#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "puzzlecloud/errors.hpp"
#include "puzzlecloud/pointcloud.hpp"

namespace puzzlecloud {

using Rgb = std::array<std::uint8_t, 3>;

// Fixed 27-entry palette (one color per voxel of a 3x3x3 puzzle). Ids beyond
// 26 wrap around.
inline const std::array<Rgb, 27>& voxel_palette() {
  static const std::array<Rgb, 27> palette = {{
      {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},
      {245, 130, 48},  {145, 30, 180},  {70, 240, 240},  {240, 50, 230},
      {210, 245, 60},  {250, 190, 212}, {0, 128, 128},   {220, 190, 255},
      {170, 110, 40},  {255, 250, 200}, {128, 0, 0},     {170, 255, 195},
      {128, 128, 0},   {255, 215, 180}, {0, 0, 128},     {128, 128, 128},
      {255, 255, 255}, {0, 0, 0},       {100, 149, 237}, {255, 99, 71},
      {46, 139, 87},   {218, 165, 32},  {199, 21, 133},
  }};
  return palette;
}

inline Rgb palette_color(int id) {
  const auto& palette = voxel_palette();
  const int n = static_cast<int>(palette.size());
  return palette[static_cast<std::size_t>(((id % n) + n) % n)];
}

namespace detail {

// Line reader that skips blank lines and '#' comments and remembers line numbers.
class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw ParseError(path, 0, "cannot open file");
  }

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  }

  std::string require(const char* what) {
    std::string line;
    if (!next(line)) fail(std::string("unexpected end of file, expected ") + what);
    return line;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_, line_no_, what);
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

inline std::string format_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace detail

// ASCII OFF. Polygons with more than three corners are fan-triangulated.
// Accepts the "OFF<V> <F> <E>" header variant found in ModelNet files.
inline Mesh read_off(const std::string& path) {
  detail::LineReader reader(path);
  std::string header = reader.require("OFF header");
  const auto first = header.find_first_not_of(" \t");
  if (header.compare(first, 3, "OFF") != 0) reader.fail("missing OFF header");
  std::string counts = header.substr(first + 3);
  if (counts.find_first_not_of(" \t") == std::string::npos) {
    counts = reader.require("vertex/face counts");
  }
  std::istringstream cs(counts);
  long long nv = -1, nf = -1;
  if (!(cs >> nv >> nf) || nv < 0 || nf < 0) reader.fail("bad vertex/face counts");

  Mesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i) {
    std::istringstream ls(reader.require("vertex"));
    Point3 p;
    if (!(ls >> p[0] >> p[1] >> p[2])) reader.fail("bad vertex line");
    mesh.vertices.push_back(p);
  }
  for (long long i = 0; i < nf; ++i) {
    std::istringstream ls(reader.require("face"));
    long long n = 0;
    if (!(ls >> n) || n < 3) reader.fail("bad face arity");
    std::vector<std::size_t> idx(static_cast<std::size_t>(n));
    for (auto& v : idx) {
      long long raw;
      if (!(ls >> raw)) reader.fail("face has fewer indices than declared");
      if (raw < 0 || raw >= nv) reader.fail("face index " + std::to_string(raw) + " out of range");
      v = static_cast<std::size_t>(raw);
    }
    for (std::size_t j = 1; j + 1 < idx.size(); ++j) {
      mesh.faces.push_back({idx[0], idx[j], idx[j + 1]});
    }
  }
  return mesh;
}

// ASCII PLY vertices: x, y, z plus an optional integer `label` property that
// becomes per-point part labels. Other properties and elements are skipped.
inline PointCloud read_ply_points(const std::string& path) {
  detail::LineReader reader(path);
  if (reader.require("ply magic") != "ply") reader.fail("missing 'ply' magic");
  std::string line = reader.require("format line");
  if (line.rfind("format ascii", 0) != 0) reader.fail("only 'format ascii' is supported");

  struct Element {
    std::string name;
    long long count = 0;
    std::vector<std::string> properties;
    std::vector<bool> single_precision;
    bool has_list = false;
  };
  std::vector<Element> elements;
  while (true) {
    line = reader.require("end_header");
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "comment" || word == "obj_info") continue;
    if (word == "element") {
      Element e;
      if (!(ls >> e.name >> e.count) || e.count < 0) reader.fail("bad element line");
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) reader.fail("property before any element");
      std::string type, name;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type;
        elements.back().has_list = true;
      }
      if (!(ls >> name)) reader.fail("bad property line");
      elements.back().properties.push_back(name);
      elements.back().single_precision.push_back(type == "float" || type == "float32");
    } else {
      reader.fail("unknown header keyword '" + word + "'");
    }
  }

  PointCloud cloud;
  cloud.source_id = path;
  bool found_vertex = false;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      for (long long i = 0; i < e.count; ++i) reader.require(e.name.c_str());
      continue;
    }
    found_vertex = true;
    int ix = -1, iy = -1, iz = -1, ilabel = -1;
    for (std::size_t i = 0; i < e.properties.size(); ++i) {
      const auto& p = e.properties[i];
      if (p == "x") ix = static_cast<int>(i);
      if (p == "y") iy = static_cast<int>(i);
      if (p == "z") iz = static_cast<int>(i);
      if (p == "label") ilabel = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0) reader.fail("vertex element lacks x/y/z");
    if (ilabel >= 0) cloud.part_labels.emplace();
    std::vector<double> row(e.properties.size());
    for (long long i = 0; i < e.count; ++i) {
      std::istringstream ls(reader.require("vertex"));
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (!(ls >> row[j])) reader.fail("vertex line has fewer values than properties");
        if (e.single_precision[j]) row[j] = static_cast<float>(row[j]);
      }
      cloud.points.push_back({row[ix], row[iy], row[iz]});
      if (ilabel >= 0) cloud.part_labels->push_back(static_cast<int>(row[ilabel]));
    }
  }
  if (!found_vertex) reader.fail("no vertex element");
  return cloud;
}

// Coordinates are written with 9 significant digits.
inline void write_ply_points(const std::string& path, const PointCloud& cloud,
                             const std::vector<Rgb>* colors = nullptr) {
  if (colors && colors->size() != cloud.size()) {
    throw DimensionError("write_ply: " + std::to_string(colors->size()) +
                         " colors for " + std::to_string(cloud.size()) + " points");
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.part_labels) out << "property int label\n";
  if (colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    out << detail::format_coord(p[0]) << ' ' << detail::format_coord(p[1]) << ' '
        << detail::format_coord(p[2]);
    if (cloud.part_labels) out << ' ' << (*cloud.part_labels)[i];
    if (colors) {
      const Rgb& c = (*colors)[i];
      out << ' ' << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2]);
    }
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

// Colors each point by palette[color_ids[i]].
inline void write_ply_colored(const std::string& path, const PointCloud& cloud,
                              const std::vector<int>& color_ids) {
  if (color_ids.size() != cloud.size()) {
    throw DimensionError("write_ply_colored: " + std::to_string(color_ids.size()) +
                         " ids for " + std::to_string(cloud.size()) + " points");
  }
  std::vector<Rgb> colors;
  colors.reserve(color_ids.size());
  for (int id : color_ids) colors.push_back(palette_color(id));
  write_ply_points(path, cloud, &colors);
}

}  // namespace puzzlecloud
