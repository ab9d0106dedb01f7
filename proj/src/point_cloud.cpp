#include "otcd/point_cloud.hpp"

#include <algorithm>

#include "otcd/errors.hpp"

namespace otcd {

ChangeClass change_class_from_int(long long value) {
  if (value < 0 || value >= kNumClasses) {
    throw DataError("class id " + std::to_string(value) + " outside {0,1,2}");
  }
  return static_cast<ChangeClass>(value);
}

const char* change_class_name(ChangeClass c) {
  switch (c) {
    case ChangeClass::kUnchanged:
      return "unchanged";
    case ChangeClass::kNew:
      return "new";
    case ChangeClass::kDemolished:
      return "demolished";
  }
  return "invalid";
}

BoundingBox bounding_box(std::span<const Point3> points) {
  if (points.empty()) throw DataError("bounding_box: empty point set");
  BoundingBox box{points.front(), points.front()};
  for (const Point3& p : points) {
    box.min.x = std::min(box.min.x, p.x);
    box.min.y = std::min(box.min.y, p.y);
    box.min.z = std::min(box.min.z, p.z);
    box.max.x = std::max(box.max.x, p.x);
    box.max.y = std::max(box.max.y, p.y);
    box.max.z = std::max(box.max.z, p.z);
  }
  return box;
}

BoundingBox bounding_box(const PointCloud& cloud) { return bounding_box(std::span<const Point3>(cloud.points)); }

void validate(const PointCloud& cloud) {
  if (cloud.labels && cloud.labels->size() != cloud.points.size()) {
    throw DataError("label count " + std::to_string(cloud.labels->size()) + " does not match point count " +
                    std::to_string(cloud.points.size()));
  }
}

}  // namespace otcd
