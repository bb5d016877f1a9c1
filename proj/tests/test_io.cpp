#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "puzzlecloud/io.hpp"

using namespace puzzlecloud;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("puzzlecloud_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(IoTest, MinimalOff) {
  const Mesh m = read_off(write("tri.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"));
  EXPECT_EQ(m.vertices.size(), 3u);
  EXPECT_EQ(m.faces.size(), 1u);
}

TEST_F(IoTest, OffCountsOnHeaderLineAndQuads) {
  const Mesh m = read_off(write("quad.off", "OFF4 1 0\n# comment\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"));
  EXPECT_EQ(m.vertices.size(), 4u);
  EXPECT_EQ(m.faces.size(), 2u);
}

TEST_F(IoTest, TruncatedOffReportsLine) {
  const std::string path = write("cut.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n");
  try {
    read_off(path);
    FAIL() << "truncated file accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST_F(IoTest, BadCountsReportLine) {
  try {
    read_off(write("bad.off", "OFF\nthree one zero\n"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST_F(IoTest, OffIndexOutOfRange) {
  EXPECT_THROW(read_off(write("oob.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n")), ParseError);
}

TEST_F(IoTest, PlyRoundTripExact) {
  // float32-representable coordinates survive 9 significant digits exactly.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  PointCloud c;
  for (int i = 0; i < 200; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  c.part_labels = std::vector<int>(200);
  for (int i = 0; i < 200; ++i) (*c.part_labels)[i] = i % 7;
  const std::string path = (dir_ / "rt.ply").string();
  write_ply_points(path, c);
  const PointCloud back = read_ply_points(path);
  EXPECT_EQ(back.points, c.points);
  EXPECT_EQ(back.part_labels, c.part_labels);
}

TEST_F(IoTest, ColoredPlyUsesPalette) {
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const std::string path = (dir_ / "col.ply").string();
  write_ply_colored(path, c, {0, 26, 27});
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line) && line != "end_header") {
  }
  for (int id : {0, 26, 27}) {
    std::getline(in, line);
    std::istringstream ls(line);
    double x, y, z;
    int r, g, b;
    ls >> x >> y >> z >> r >> g >> b;
    const Rgb want = voxel_palette()[static_cast<std::size_t>(id % 27)];
    EXPECT_EQ(r, want[0]);
    EXPECT_EQ(g, want[1]);
    EXPECT_EQ(b, want[2]);
  }
  EXPECT_EQ(read_ply_points(path).points, c.points);
}

TEST_F(IoTest, PlySkipsOtherElementsAndProperties) {
  const std::string text =
      "ply\nformat ascii 1.0\nelement vertex 2\nproperty float nx\nproperty float x\nproperty float y\n"
      "property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
      "9 1 2 3\n9 4 5 6\n3 0 1 1\n";
  const PointCloud c = read_ply_points(write("extra.ply", text));
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[1], (Point3{4, 5, 6}));
  EXPECT_FALSE(c.part_labels.has_value());
}

TEST_F(IoTest, PlyTruncated) {
  EXPECT_THROW(read_ply_points(write("cut.ply", "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\n"
                                                "property float y\nproperty float z\nend_header\n1 2 3\n")),
               ParseError);
  EXPECT_THROW(read_ply_points(write("bin.ply", "ply\nformat binary_little_endian 1.0\n")), ParseError);
}
