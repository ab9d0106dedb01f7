#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace otcd {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

inline Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// Per-point change class. Numeric values are part of the file formats.
enum class ChangeClass : std::uint8_t {
  kUnchanged = 0,
  kNew = 1,
  kDemolished = 2,
};

inline constexpr int kNumClasses = 3;

// Throws DataError for values outside {0, 1, 2}.
ChangeClass change_class_from_int(long long value);

const char* change_class_name(ChangeClass c);

struct PointCloud {
  std::vector<Point3> points;
  // Ground-truth labels; when present, labels->size() == points.size().
  std::optional<std::vector<ChangeClass>> labels;
  std::string epoch_tag;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return labels.has_value(); }
};

struct BoundingBox {
  Point3 min;
  Point3 max;

  bool contains_xy(const Point3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }
  // Grows the box by `margin` in x and y only.
  BoundingBox expanded_xy(double margin) const {
    return {{min.x - margin, min.y - margin, min.z}, {max.x + margin, max.y + margin, max.z}};
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Componentwise min/max. Throws DataError on an empty input.
BoundingBox bounding_box(std::span<const Point3> points);
BoundingBox bounding_box(const PointCloud& cloud);

// Throws DataError when the label vector length does not match the points.
void validate(const PointCloud& cloud);

}  // namespace otcd
