#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otcd/point_cloud.hpp"

namespace otcd {

enum class BuildingStatus {
  kPersistent,  // present in both epochs
  kAdded,       // epoch 1 only
  kRemoved,     // epoch 0 only
};

const char* building_status_name(BuildingStatus s);
BuildingStatus parse_building_status(const std::string& name);

// Axis-aligned XY rectangle [x0, x1) x [y0, y1).
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double area() const { return (x1 - x0) * (y1 - y0); }
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct Building {
  Rect footprint;
  double height = 10.0;
  BuildingStatus status = BuildingStatus::kPersistent;
};

struct SceneSpec {
  std::string name;
  double extent_x = 64.0;
  double extent_y = 64.0;
  // Epoch-0 sampling density in points per square meter; epoch 1 samples at
  // ground_density * density_t1_ratio.
  double ground_density = 2.0;
  double density_t1_ratio = 1.0;
  double noise_sigma_z = 0.05;
  std::uint64_t seed = 1;
  std::vector<Building> buildings;
};

// Throws ConfigError for non-positive densities or heights, footprints
// outside the extent and overlapping footprints.
void validate(const SceneSpec& spec);

struct ScenePair {
  PointCloud pc0;
  PointCloud pc1;  // carries ground-truth labels
};

// Ground is sampled uniformly outside the footprints of the buildings
// present in each epoch; roofs are sampled uniformly at z = height. Each
// surface receives round(area * density) points, then N(0, sigma^2)
// z-noise. pc1 labels: 1 on added roofs, 2 on ground inside removed
// footprints, 0 elsewhere. Deterministic in the seed.
ScenePair generate_pair(const SceneSpec& spec);

// Desk-scale presets on a 64 m x 64 m tile with the 8-building layout of
// default_layout(): low_res_low_noise, high_res_low_noise,
// low_res_high_noise, multi_density. Throws ConfigError for other names.
SceneSpec preset(const std::string& name);
std::vector<std::string> preset_names();

// 12 m x 12 m footprints on a 3 x 3 grid of a 64 m tile: three added, three
// removed, two persistent, one empty slot; all `height` meters tall.
std::vector<Building> default_layout(double height = 10.0);

}  // namespace otcd
