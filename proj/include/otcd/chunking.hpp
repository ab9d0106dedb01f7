#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "otcd/point_cloud.hpp"

namespace otcd {

struct ChunkingConfig {
  std::size_t point_cap = 30000;
  // XY margin (meters) by which a chunk's source region is widened.
  double halo_margin = 0.0;
};

void validate(const ChunkingConfig& cfg);

struct ChunkPair {
  std::vector<std::size_t> source_indices;  // into pc_0
  std::vector<std::size_t> target_indices;  // into pc_1
  BoundingBox region;                       // XY extent of the quadtree cell
  int chunk_id = 0;
  // Targets present but no source point within the (halo-expanded) region.
  bool no_sources = false;
  // The halo pushed the source count above the point cap.
  bool halo_over_cap = false;
};

// Recursive XY quadtree over the joint bounding box. A cell is split into four
// equal quadrants while either epoch has more than point_cap points in it.
// Leaves without targets are dropped. Throws ConfigError for a zero cap and
// DataError when more than point_cap coincident (in XY) points make the
// split impossible.
std::vector<ChunkPair> build_chunks(const PointCloud& pc0, const PointCloud& pc1, const ChunkingConfig& cfg);

struct ChunkResult {
  const ChunkPair* chunk = nullptr;
  std::span<const double> scores;      // per target, in chunk.target_indices order
  std::span<const ChangeClass> classes;
};

struct MergedScores {
  std::vector<double> scores;
  std::vector<ChangeClass> classes;
};

// Scatters per-chunk target results back to pc_1 order. Throws DataError
// when a target index is missing, duplicated or out of range.
MergedScores merge_scores(std::span<const ChunkResult> chunks, std::size_t n1);

struct SizeSummary {
  std::size_t min = 0;
  double median = 0.0;
  std::size_t max = 0;
};

struct ChunkStats {
  std::size_t count = 0;
  SizeSummary src;
  SizeSummary tgt;
  std::size_t halo_over_cap = 0;
  std::size_t no_sources = 0;
};

// Exact order statistics of chunk sizes; the median of an even count is the
// mean of the two middle sizes. Throws DataError on an empty list.
ChunkStats chunk_stats(std::span<const ChunkPair> chunks);

SizeSummary summarize_sizes(std::vector<std::size_t> sizes);

}  // namespace otcd
