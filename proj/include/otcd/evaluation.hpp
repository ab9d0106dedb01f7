#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "otcd/change_detection.hpp"
#include "otcd/point_cloud.hpp"

namespace otcd {

// counts[g][p]: ground truth class g predicted as p.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const;
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Throws DataError on a length mismatch or a class id outside {0,1,2}.
ConfusionMatrix confusion(std::span<const ChangeClass> gt, std::span<const ChangeClass> pred);

struct Metrics {
  std::array<double, kNumClasses> iou_per_class{};
  // Mean of the IoUs of the two change classes (new, demolished).
  double mean_change_iou = 0.0;
  double tau_used = 0.0;
  ConfusionMatrix cm;
};

// IoU_c = TP / (TP + FP + FN). A class absent from both ground truth and
// prediction scores 1; any other zero denominator cannot occur.
Metrics iou(const ConfusionMatrix& cm);

struct SweepPoint {
  double tau = 0.0;
  Metrics metrics;
};

struct SweepResult {
  double best_tau = 0.0;
  Metrics best;
  std::vector<SweepPoint> curve;
};

// 0.5 m to 10 m in steps of 0.5 m.
std::vector<double> default_tau_grid();

// Classifies the cached scores at every tau of the grid and keeps the tau
// with the highest mean_change_iou (smallest tau on ties).
SweepResult sweep_scores(std::span<const double> scores, std::span<const ChangeClass> gt,
                         std::span<const double> tau_grid);

struct ThresholdSweep {
  SweepResult sweep;
  DetectionResult detection;  // classes at cfg.tau
};

// Runs detect_changes once and sweeps tau over its scores. Requires labels
// on pc1 (DataError otherwise) and a non-empty grid (ConfigError).
ThresholdSweep threshold_sweep(const PointCloud& pc0, const PointCloud& pc1, const ChangeDetectionConfig& cfg,
                               std::span<const double> tau_grid);

}  // namespace otcd
