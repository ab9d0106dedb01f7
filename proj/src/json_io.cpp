#include "otcd/json_io.hpp"

#include <cmath>
#include <fstream>

#include "otcd/errors.hpp"

namespace otcd {
namespace {

using nlohmann::json;

json size_json(const SizeSummary& s) { return {{"min", s.min}, {"median", s.median}, {"max", s.max}}; }

// JSON has no infinity; emit null for non-finite reals.
json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json chunk_stats_json(const ChunkStats& stats) {
  return {{"count", stats.count},
          {"src", size_json(stats.src)},
          {"tgt", size_json(stats.tgt)},
          {"halo_over_cap", stats.halo_over_cap},
          {"no_sources", stats.no_sources}};
}

json diagnostics_json(const DetectionResult& result, const ChangeDetectionConfig& cfg) {
  json chunks = json::array();
  for (const ChunkDiagnostics& d : result.chunks) {
    chunks.push_back({{"chunk_id", d.chunk_id},
                      {"n0", d.n0},
                      {"n1", d.n1},
                      {"iterations", d.iterations},
                      {"converged", d.converged},
                      {"wall_ms", d.wall_ms},
                      {"peak_bytes_estimate", d.peak_bytes_estimate},
                      {"epsilon", d.epsilon},
                      {"marginal_error", real(d.marginal_error)},
                      {"no_sources", d.no_sources},
                      {"halo_over_cap", d.halo_over_cap}});
  }
  return {{"method", method_name(cfg.method)},
          {"tau", cfg.tau},
          {"point_cap", cfg.chunking.point_cap},
          {"halo_margin", cfg.chunking.halo_margin},
          {"non_converged", result.non_converged()},
          {"halo_over_cap", result.halo_over_cap()},
          {"chunks", std::move(chunks)}};
}

json metrics_json(const Metrics& m, const std::string& method, const std::string& dataset,
                  std::span<const SweepPoint> sweep) {
  json cm = json::array();
  for (const auto& row : m.cm.counts) cm.push_back(row);
  json out = {{"method", method},
              {"dataset", dataset},
              {"tau", m.tau_used},
              {"iou", {{"unchanged", m.iou_per_class[0]}, {"new", m.iou_per_class[1]}, {"demolished", m.iou_per_class[2]}}},
              {"mean_change_iou", m.mean_change_iou},
              {"confusion", std::move(cm)}};
  json curve = json::array();
  for (const SweepPoint& p : sweep) curve.push_back({{"tau", p.tau}, {"mean_change_iou", p.metrics.mean_change_iou}});
  out["sweep"] = std::move(curve);
  return out;
}

json scene_spec_json(const SceneSpec& spec) {
  json buildings = json::array();
  for (const Building& b : spec.buildings) {
    buildings.push_back({{"footprint", {b.footprint.x0, b.footprint.y0, b.footprint.x1, b.footprint.y1}},
                         {"height", b.height},
                         {"status", building_status_name(b.status)}});
  }
  return {{"name", spec.name},
          {"extent", {spec.extent_x, spec.extent_y}},
          {"ground_density", spec.ground_density},
          {"density_t1_ratio", spec.density_t1_ratio},
          {"noise_sigma_z", spec.noise_sigma_z},
          {"seed", spec.seed},
          {"buildings", std::move(buildings)}};
}

SceneSpec scene_spec_from_json(const json& j) {
  try {
    SceneSpec s;
    s.name = j.value("name", std::string());
    const auto& extent = j.at("extent");
    s.extent_x = extent.at(0).get<double>();
    s.extent_y = extent.at(1).get<double>();
    s.ground_density = j.at("ground_density").get<double>();
    s.density_t1_ratio = j.value("density_t1_ratio", 1.0);
    s.noise_sigma_z = j.value("noise_sigma_z", 0.0);
    s.seed = j.value("seed", std::uint64_t{1});
    for (const auto& b : j.value("buildings", json::array())) {
      const auto& fp = b.at("footprint");
      s.buildings.push_back({{fp.at(0).get<double>(), fp.at(1).get<double>(), fp.at(2).get<double>(),
                              fp.at(3).get<double>()},
                             b.at("height").get<double>(),
                             parse_building_status(b.at("status").get<std::string>())});
    }
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid scene spec: ") + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write to '" + path + "' failed");
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace otcd
