#include "otcd/synthgen.hpp"

#include <cmath>
#include <random>

#include "otcd/errors.hpp"

namespace otcd {
namespace {

bool present_in(BuildingStatus s, int epoch) {
  switch (s) {
    case BuildingStatus::kPersistent:
      return true;
    case BuildingStatus::kAdded:
      return epoch == 1;
    case BuildingStatus::kRemoved:
      return epoch == 0;
  }
  return false;
}

std::size_t sample_count(double area, double density) {
  return static_cast<std::size_t>(std::llround(area * density));
}

PointCloud sample_epoch(const SceneSpec& spec, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> ux(0.0, spec.extent_x);
  std::uniform_real_distribution<double> uy(0.0, spec.extent_y);
  std::normal_distribution<double> noise(0.0, 1.0);

  const double density = epoch == 0 ? spec.ground_density : spec.ground_density * spec.density_t1_ratio;
  PointCloud cloud;
  cloud.epoch_tag = epoch == 0 ? "t0" : "t1";
  if (epoch == 1) cloud.labels.emplace();

  std::vector<const Building*> present, removed;
  double covered = 0.0;
  for (const Building& b : spec.buildings) {
    if (present_in(b.status, epoch)) {
      present.push_back(&b);
      covered += b.footprint.area();
    } else if (b.status == BuildingStatus::kRemoved) {
      removed.push_back(&b);
    }
  }

  // Ground: rejection sampling outside present footprints until the
  // uncovered area holds its share of points.
  const std::size_t n_ground = sample_count(spec.extent_x * spec.extent_y - covered, density);
  while (cloud.points.size() < n_ground) {
    const double x = ux(rng);
    const double y = uy(rng);
    bool occluded = false;
    for (const Building* b : present) occluded = occluded || b->footprint.contains(x, y);
    if (occluded) continue;
    cloud.points.push_back({x, y, 0.0});
    if (epoch == 1) {
      bool in_removed = false;
      for (const Building* b : removed) in_removed = in_removed || b->footprint.contains(x, y);
      cloud.labels->push_back(in_removed ? ChangeClass::kDemolished : ChangeClass::kUnchanged);
    }
  }

  for (const Building* b : present) {
    const Rect& r = b->footprint;
    std::uniform_real_distribution<double> rx(r.x0, r.x1);
    std::uniform_real_distribution<double> ry(r.y0, r.y1);
    const std::size_t n = sample_count(r.area(), density);
    for (std::size_t k = 0; k < n; ++k) {
      const double x = rx(rng);
      const double y = ry(rng);
      cloud.points.push_back({x, y, b->height});
      if (epoch == 1) {
        cloud.labels->push_back(b->status == BuildingStatus::kAdded ? ChangeClass::kNew : ChangeClass::kUnchanged);
      }
    }
  }

  if (spec.noise_sigma_z > 0.0) {
    for (Point3& p : cloud.points) p.z += spec.noise_sigma_z * noise(rng);
  }
  return cloud;
}

}  // namespace

const char* building_status_name(BuildingStatus s) {
  switch (s) {
    case BuildingStatus::kPersistent:
      return "persistent";
    case BuildingStatus::kAdded:
      return "added";
    case BuildingStatus::kRemoved:
      return "removed";
  }
  return "invalid";
}

BuildingStatus parse_building_status(const std::string& name) {
  if (name == "persistent") return BuildingStatus::kPersistent;
  if (name == "added") return BuildingStatus::kAdded;
  if (name == "removed") return BuildingStatus::kRemoved;
  throw ConfigError("unknown building status '" + name + "'");
}

void validate(const SceneSpec& spec) {
  if (!(spec.extent_x > 0.0) || !(spec.extent_y > 0.0)) throw ConfigError("scene extent must be positive");
  if (!(spec.ground_density > 0.0) || !(spec.density_t1_ratio > 0.0)) {
    throw ConfigError("scene densities must be positive");
  }
  if (!(spec.noise_sigma_z >= 0.0)) throw ConfigError("noise_sigma_z must be nonnegative");
  for (std::size_t k = 0; k < spec.buildings.size(); ++k) {
    const Building& b = spec.buildings[k];
    const Rect& r = b.footprint;
    if (!(b.height > 0.0)) throw ConfigError("building " + std::to_string(k) + " has a non-positive height");
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) throw ConfigError("building " + std::to_string(k) + " has an empty footprint");
    if (r.x0 < 0.0 || r.y0 < 0.0 || r.x1 > spec.extent_x || r.y1 > spec.extent_y) {
      throw ConfigError("building " + std::to_string(k) + " footprint leaves the scene extent");
    }
    for (std::size_t m = 0; m < k; ++m) {
      const Rect& o = spec.buildings[m].footprint;
      if (r.x0 < o.x1 && o.x0 < r.x1 && r.y0 < o.y1 && o.y0 < r.y1) {
        throw ConfigError("buildings " + std::to_string(m) + " and " + std::to_string(k) + " overlap");
      }
    }
  }
  double covered = 0.0;
  for (const Building& b : spec.buildings) covered += b.footprint.area();
  if (covered >= spec.extent_x * spec.extent_y) throw ConfigError("footprints cover the whole scene");
}

ScenePair generate_pair(const SceneSpec& spec) {
  validate(spec);
  return {sample_epoch(spec, 0), sample_epoch(spec, 1)};
}

std::vector<Building> default_layout(double height) {
  using S = BuildingStatus;
  // Row-major over slot centers (12, 32, 52); slot (1, 1) stays empty.
  const S slots[3][3] = {
      {S::kAdded, S::kRemoved, S::kPersistent},
      {S::kRemoved, S::kPersistent, S::kAdded},
      {S::kPersistent, S::kAdded, S::kRemoved},
  };
  std::vector<Building> out;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) {
      if (row == 1 && col == 1) continue;
      const double cx = 12.0 + 20.0 * col;
      const double cy = 12.0 + 20.0 * row;
      out.push_back({{cx - 6.0, cy - 6.0, cx + 6.0, cy + 6.0}, height, slots[row][col]});
    }
  }
  return out;
}

std::vector<std::string> preset_names() {
  return {"low_res_low_noise", "high_res_low_noise", "low_res_high_noise", "multi_density"};
}

SceneSpec preset(const std::string& name) {
  SceneSpec s;
  s.name = name;
  s.buildings = default_layout();
  if (name == "low_res_low_noise") {
    s.ground_density = 2.0;
    s.noise_sigma_z = 0.05;
  } else if (name == "high_res_low_noise") {
    s.ground_density = 10.0;
    s.noise_sigma_z = 0.05;
  } else if (name == "low_res_high_noise") {
    s.ground_density = 1.0;
    s.noise_sigma_z = 0.3;
  } else if (name == "multi_density") {
    s.ground_density = 4.0;
    s.density_t1_ratio = 0.3;
    s.noise_sigma_z = 0.1;
  } else {
    throw ConfigError("unknown scene preset '" + name + "'");
  }
  return s;
}

}  // namespace otcd
