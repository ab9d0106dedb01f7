#pragma once

#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "otcd/change_detection.hpp"
#include "otcd/chunking.hpp"
#include "otcd/evaluation.hpp"
#include "otcd/synthgen.hpp"

namespace otcd {

// {count, src:{min,median,max}, tgt:{min,median,max}, halo_over_cap, no_sources}
nlohmann::json chunk_stats_json(const ChunkStats& stats);

// {method, chunks:[{chunk_id, n0, n1, iterations, converged, wall_ms,
// peak_bytes_estimate, ...}], non_converged, halo_over_cap}
nlohmann::json diagnostics_json(const DetectionResult& result, const ChangeDetectionConfig& cfg);

// {method, dataset, tau, iou:{unchanged,new,demolished}, mean_change_iou,
// confusion, sweep:[{tau, mean_change_iou}, ...]}
nlohmann::json metrics_json(const Metrics& metrics, const std::string& method, const std::string& dataset,
                            std::span<const SweepPoint> sweep = {});

nlohmann::json scene_spec_json(const SceneSpec& spec);
// Throws ConfigError on missing or ill-typed fields.
SceneSpec scene_spec_from_json(const nlohmann::json& j);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

}  // namespace otcd
