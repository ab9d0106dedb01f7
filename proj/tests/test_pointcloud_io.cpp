#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "otcd/errors.hpp"
#include "otcd/pointcloud_io.hpp"
#include "test_util.hpp"

namespace otcd {
namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

TEST(ReadXyz, ParsesPointsInFileOrder) {
  test::TempDir dir;
  write_text(dir.file("a.xyz"), "0 0 0\n1 2 3");
  const PointCloud c = read_xyz(dir.file("a.xyz"), false);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[0], (Point3{0, 0, 0}));
  EXPECT_EQ(c.points[1], (Point3{1, 2, 3}));
  EXPECT_FALSE(c.has_labels());
}

TEST(ReadXyz, ParsesLabel) {
  test::TempDir dir;
  write_text(dir.file("a.xyz"), "0 0 0 1\n");
  const PointCloud c = read_xyz(dir.file("a.xyz"), true);
  ASSERT_EQ(c.size(), 1u);
  ASSERT_TRUE(c.has_labels());
  EXPECT_EQ((*c.labels)[0], ChangeClass::kNew);
}

TEST(ReadXyz, SkipsCommentsAndBlankLines) {
  test::TempDir dir;
  write_text(dir.file("a.xyz"), "# header\n\n  1 1 1  \n# mid\n2\t2\t2\n");
  EXPECT_EQ(read_xyz(dir.file("a.xyz"), false).size(), 2u);
}

TEST(ReadXyz, RejectsNanWithLineNumber) {
  test::TempDir dir;
  write_text(dir.file("a.xyz"), "0 0 nan\n");
  try {
    read_xyz(dir.file("a.xyz"), false);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(ReadXyz, ReportsLineOfMalformedRow) {
  test::TempDir dir;
  write_text(dir.file("a.xyz"), "# c\n0 0 0\n1 2\n");
  try {
    read_xyz(dir.file("a.xyz"), false);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_text(dir.file("b.xyz"), "0 0 0\n1 2 x\n");
  EXPECT_THROW(read_xyz(dir.file("b.xyz"), false), ParseError);
  write_text(dir.file("c.xyz"), "0 0 inf\n");
  EXPECT_THROW(read_xyz(dir.file("c.xyz"), false), ParseError);
}

TEST(ReadXyz, RejectsBadLabels) {
  test::TempDir dir;
  write_text(dir.file("a.xyz"), "0 0 0 3\n");
  EXPECT_THROW(read_xyz(dir.file("a.xyz"), true), ParseError);
  write_text(dir.file("b.xyz"), "0 0 0 -1\n");
  EXPECT_THROW(read_xyz(dir.file("b.xyz"), true), ParseError);
  write_text(dir.file("c.xyz"), "0 0 0 1.5\n");
  EXPECT_THROW(read_xyz(dir.file("c.xyz"), true), ParseError);
  // Missing label column when labels are expected.
  write_text(dir.file("d.xyz"), "0 0 0\n");
  EXPECT_THROW(read_xyz(dir.file("d.xyz"), true), ParseError);
}

TEST(ReadXyz, EmptyOrMissingFileIsAnError) {
  test::TempDir dir;
  write_text(dir.file("a.xyz"), "# nothing\n");
  EXPECT_THROW(read_xyz(dir.file("a.xyz"), false), DataError);
  EXPECT_THROW(read_xyz(dir.file("missing.xyz"), false), DataError);
}

TEST(ReadXyz, NeverDropsLines) {
  test::TempDir dir;
  std::mt19937_64 rng(5);
  PointCloud c;
  c.points = test::random_points(500, 100.0, rng);
  c.labels = std::vector<ChangeClass>(500);
  for (std::size_t i = 0; i < 500; ++i) (*c.labels)[i] = static_cast<ChangeClass>(i % 3);
  write_xyz(dir.file("a.xyz"), c);
  const PointCloud back = read_xyz(dir.file("a.xyz"), true);
  EXPECT_EQ(back.points, c.points);  // round-trip precision is exact
  EXPECT_EQ(*back.labels, *c.labels);
  EXPECT_EQ(sniff_xyz_columns(dir.file("a.xyz")), 4);
}

TEST(WritePlyScored, SinglePointLayout) {
  test::TempDir dir;
  PointCloud c;
  c.points = {{0, 0, 0}};
  const std::vector<double> scores = {2.5};
  const std::vector<ChangeClass> classes = {ChangeClass::kNew};
  write_ply_scored(dir.file("a.ply"), c, scores, classes);

  std::ifstream in(dir.file("a.ply"));
  std::string line, last;
  bool vertex_1 = false, saw_end = false;
  while (std::getline(in, line)) {
    if (line == "element vertex 1") vertex_1 = true;
    if (saw_end && !line.empty()) last = line;
    if (line == "end_header") saw_end = true;
  }
  EXPECT_TRUE(vertex_1);
  EXPECT_EQ(last, "0 0 0 2.5 1");
}

TEST(WritePlyScored, LengthMismatch) {
  test::TempDir dir;
  PointCloud c;
  c.points = {{0, 0, 0}};
  EXPECT_THROW(write_ply_scored(dir.file("a.ply"), c, {}, {}), DataError);
}

TEST(WritePlyScored, RoundTrip) {
  test::TempDir dir;
  std::mt19937_64 rng(7);
  PointCloud c;
  c.points = test::random_points(200, 1000.0, rng);
  std::vector<double> scores(200);
  std::vector<ChangeClass> classes(200);
  std::normal_distribution<double> n(0.0, 5.0);
  for (std::size_t i = 0; i < 200; ++i) {
    scores[i] = n(rng);
    classes[i] = static_cast<ChangeClass>(i % 3);
  }
  scores[3] = std::numeric_limits<double>::infinity();
  write_ply_scored(dir.file("a.ply"), c, scores, classes);

  const PlyData back = read_ply(dir.file("a.ply"));
  EXPECT_EQ(back.cloud.points, c.points);
  ASSERT_TRUE(back.scores && back.classes);
  EXPECT_EQ(*back.classes, classes);
  for (std::size_t i = 0; i < 200; ++i) {
    if (std::isinf(scores[i])) {
      EXPECT_TRUE(std::isinf((*back.scores)[i]));
    } else {
      // change_score is declared float.
      EXPECT_EQ((*back.scores)[i], static_cast<double>(static_cast<float>(scores[i])));
    }
  }
}

TEST(ReadPly, XyzOnly) {
  test::TempDir dir;
  write_text(dir.file("a.ply"),
             "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty float x\nproperty float y\n"
             "property float z\nend_header\n1 2 3\n4 5 6\n");
  const PlyData d = read_ply(dir.file("a.ply"));
  ASSERT_EQ(d.cloud.size(), 2u);
  EXPECT_EQ(d.cloud.points[1], (Point3{4, 5, 6}));
  EXPECT_FALSE(d.scores);
  EXPECT_FALSE(d.classes);
}

TEST(ReadPly, Errors) {
  test::TempDir dir;
  const std::string head = "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\n"
                           "property float z\nend_header\n";
  write_text(dir.file("short.ply"), head + "0 0 0\n1 1 1\n2 2 2\n3 3 3\n");
  EXPECT_THROW(read_ply(dir.file("short.ply")), DataError);

  write_text(dir.file("nomagic.ply"), "format ascii 1.0\nend_header\n");
  EXPECT_THROW(read_ply(dir.file("nomagic.ply")), DataError);

  write_text(dir.file("bin.ply"),
             "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
             "property float z\nend_header\n");
  EXPECT_THROW(read_ply(dir.file("bin.ply")), DataError);

  write_text(dir.file("noz.ply"),
             "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n");
  EXPECT_THROW(read_ply(dir.file("noz.ply")), DataError);
}

TEST(ReadCloud, DispatchesOnExtension) {
  test::TempDir dir;
  PointCloud c;
  c.points = {{1, 2, 3}, {4, 5, 6}};
  c.labels = std::vector<ChangeClass>{ChangeClass::kDemolished, ChangeClass::kUnchanged};
  write_ply(dir.file("a.ply"), c);
  write_xyz(dir.file("a.xyz"), c);
  for (const char* name : {"a.ply", "a.xyz"}) {
    const PointCloud back = read_cloud(dir.file(name));
    EXPECT_EQ(back.points, c.points) << name;
    ASSERT_TRUE(back.labels) << name;
    EXPECT_EQ(*back.labels, *c.labels) << name;
  }
}

TEST(BoundingBox, Examples) {
  const std::vector<Point3> one = {{0, 0, 0}};
  EXPECT_EQ(bounding_box(one), (BoundingBox{{0, 0, 0}, {0, 0, 0}}));
  const std::vector<Point3> two = {{0, 0, 0}, {1, -1, 2}};
  EXPECT_EQ(bounding_box(two), (BoundingBox{{0, -1, 0}, {1, 0, 2}}));
  EXPECT_THROW(bounding_box(std::vector<Point3>{}), DataError);
}

TEST(PointCloud, ValidateLabelLength) {
  PointCloud c;
  c.points = {{0, 0, 0}};
  c.labels = std::vector<ChangeClass>{};
  EXPECT_THROW(validate(c), DataError);
  EXPECT_THROW(change_class_from_int(3), DataError);
  EXPECT_EQ(change_class_from_int(2), ChangeClass::kDemolished);
}

}  // namespace
}  // namespace otcd
