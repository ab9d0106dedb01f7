#include "otcd/evaluation.hpp"

#include <cmath>

#include "otcd/errors.hpp"

namespace otcd {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts) {
    for (std::uint64_t c : row) t += c;
  }
  return t;
}

ConfusionMatrix confusion(std::span<const ChangeClass> gt, std::span<const ChangeClass> pred) {
  if (gt.size() != pred.size()) {
    throw DataError("confusion: " + std::to_string(gt.size()) + " ground-truth labels vs " +
                    std::to_string(pred.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const auto g = static_cast<unsigned>(gt[k]);
    const auto p = static_cast<unsigned>(pred[k]);
    if (g >= kNumClasses || p >= kNumClasses) {
      throw DataError("confusion: class id out of range at index " + std::to_string(k));
    }
    ++cm.counts[g][p];
  }
  return cm;
}

Metrics iou(const ConfusionMatrix& cm) {
  Metrics m;
  m.cm = cm;
  for (int c = 0; c < kNumClasses; ++c) {
    std::uint64_t gt_total = 0, pred_total = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      gt_total += cm.counts[c][k];
      pred_total += cm.counts[k][c];
    }
    const std::uint64_t tp = cm.counts[c][c];
    const std::uint64_t denom = gt_total + pred_total - tp;
    m.iou_per_class[c] = denom == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(denom);
  }
  m.mean_change_iou = 0.5 * (m.iou_per_class[1] + m.iou_per_class[2]);
  return m;
}

std::vector<double> default_tau_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 20; ++k) grid.push_back(0.5 * k);
  return grid;
}

SweepResult sweep_scores(std::span<const double> scores, std::span<const ChangeClass> gt,
                         std::span<const double> tau_grid) {
  if (tau_grid.empty()) throw ConfigError("threshold sweep needs a non-empty tau grid");
  if (scores.size() != gt.size()) throw DataError("threshold sweep: scores and labels differ in length");
  SweepResult out;
  bool have_best = false;
  for (double tau : tau_grid) {
    Metrics m = iou(confusion(gt, classify(scores, tau)));
    m.tau_used = tau;
    const bool better = !have_best || m.mean_change_iou > out.best.mean_change_iou ||
                        (m.mean_change_iou == out.best.mean_change_iou && tau < out.best_tau);
    if (better) {
      out.best = m;
      out.best_tau = tau;
      have_best = true;
    }
    out.curve.push_back({tau, std::move(m)});
  }
  return out;
}

ThresholdSweep threshold_sweep(const PointCloud& pc0, const PointCloud& pc1, const ChangeDetectionConfig& cfg,
                               std::span<const double> tau_grid) {
  if (!pc1.labels) throw DataError("threshold sweep needs ground-truth labels on the epoch-1 cloud");
  if (tau_grid.empty()) throw ConfigError("threshold sweep needs a non-empty tau grid");
  ThresholdSweep out;
  out.detection = detect_changes(pc0, pc1, cfg);
  out.sweep = sweep_scores(out.detection.map.scores, *pc1.labels, tau_grid);
  return out;
}

}  // namespace otcd
