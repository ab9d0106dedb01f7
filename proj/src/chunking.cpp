#include "otcd/chunking.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "otcd/errors.hpp"

namespace otcd {
namespace {

struct Cell {
  BoundingBox box;
  std::vector<std::size_t> src;
  std::vector<std::size_t> tgt;
};

std::string xy_string(double x, double y) {
  std::ostringstream s;
  s.precision(17);
  s << "(" << x << ", " << y << ")";
  return s.str();
}

// All points of `idx` share one XY location.
bool coincident_xy(const std::vector<Point3>& pts, const std::vector<std::size_t>& idx) {
  for (std::size_t k = 1; k < idx.size(); ++k) {
    if (pts[idx[k]].x != pts[idx[0]].x || pts[idx[k]].y != pts[idx[0]].y) return false;
  }
  return true;
}

class QuadtreeBuilder {
 public:
  QuadtreeBuilder(const PointCloud& pc0, const PointCloud& pc1, const ChunkingConfig& cfg)
      : pc0_(pc0), pc1_(pc1), cfg_(cfg) {}

  std::vector<Cell> build(Cell root) {
    split(std::move(root));
    return std::move(leaves_);
  }

 private:
  void split(Cell cell) {
    if (cell.tgt.empty()) return;
    const std::size_t cap = cfg_.point_cap;
    if (cell.src.size() <= cap && cell.tgt.size() <= cap) {
      leaves_.push_back(std::move(cell));
      return;
    }
    check_progress(cell);

    const double mx = 0.5 * (cell.box.min.x + cell.box.max.x);
    const double my = 0.5 * (cell.box.min.y + cell.box.max.y);
    std::array<Cell, 4> quads;
    for (int q = 0; q < 4; ++q) {
      BoundingBox b = cell.box;
      if (q & 1) b.min.x = mx; else b.max.x = mx;
      if (q & 2) b.min.y = my; else b.max.y = my;
      quads[q].box = b;
    }
    // Points on a split line go to the lower quadrant.
    auto quadrant = [&](const Point3& p) { return (p.x > mx ? 1 : 0) + (p.y > my ? 2 : 0); };
    for (std::size_t i : cell.src) quads[quadrant(pc0_.points[i])].src.push_back(i);
    for (std::size_t j : cell.tgt) quads[quadrant(pc1_.points[j])].tgt.push_back(j);
    cell = Cell{};
    for (Cell& q : quads) split(std::move(q));
  }

  void check_progress(const Cell& cell) const {
    const std::size_t cap = cfg_.point_cap;
    if (cell.src.size() > cap && coincident_xy(pc0_.points, cell.src)) {
      const Point3& p = pc0_.points[cell.src.front()];
      throw DataError("cannot split chunk: " + std::to_string(cell.src.size()) + " epoch-0 points share XY " +
                      xy_string(p.x, p.y) + ", more than the point cap " + std::to_string(cap));
    }
    if (cell.tgt.size() > cap && coincident_xy(pc1_.points, cell.tgt)) {
      const Point3& p = pc1_.points[cell.tgt.front()];
      throw DataError("cannot split chunk: " + std::to_string(cell.tgt.size()) + " epoch-1 points share XY " +
                      xy_string(p.x, p.y) + ", more than the point cap " + std::to_string(cap));
    }
    const double mx = 0.5 * (cell.box.min.x + cell.box.max.x);
    const double my = 0.5 * (cell.box.min.y + cell.box.max.y);
    const bool x_stuck = !(mx > cell.box.min.x && mx < cell.box.max.x);
    const bool y_stuck = !(my > cell.box.min.y && my < cell.box.max.y);
    if (x_stuck && y_stuck) {
      throw DataError("cannot split chunk at " + xy_string(mx, my) + ": cell reached floating-point resolution");
    }
  }

  const PointCloud& pc0_;
  const PointCloud& pc1_;
  const ChunkingConfig& cfg_;
  std::vector<Cell> leaves_;
};

// Source indices of pc_0 inside an XY box, from an x-sorted index.
std::vector<std::size_t> sources_in(const std::vector<Point3>& pts, const std::vector<std::size_t>& by_x,
                                    const BoundingBox& box) {
  auto lo = std::lower_bound(by_x.begin(), by_x.end(), box.min.x,
                             [&](std::size_t i, double x) { return pts[i].x < x; });
  std::vector<std::size_t> out;
  for (auto it = lo; it != by_x.end() && pts[*it].x <= box.max.x; ++it) {
    if (box.contains_xy(pts[*it])) out.push_back(*it);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void validate(const ChunkingConfig& cfg) {
  if (cfg.point_cap < 1) throw ConfigError("point_cap must be at least 1");
  if (!(cfg.halo_margin >= 0.0) || !std::isfinite(cfg.halo_margin)) {
    throw ConfigError("halo_margin must be finite and nonnegative");
  }
}

std::vector<ChunkPair> build_chunks(const PointCloud& pc0, const PointCloud& pc1, const ChunkingConfig& cfg) {
  validate(cfg);
  if (pc0.empty() || pc1.empty()) throw DataError("build_chunks: both clouds must be non-empty");

  Cell root;
  const BoundingBox b0 = bounding_box(pc0);
  const BoundingBox b1 = bounding_box(pc1);
  root.box.min = {std::min(b0.min.x, b1.min.x), std::min(b0.min.y, b1.min.y), std::min(b0.min.z, b1.min.z)};
  root.box.max = {std::max(b0.max.x, b1.max.x), std::max(b0.max.y, b1.max.y), std::max(b0.max.z, b1.max.z)};
  root.src.resize(pc0.size());
  root.tgt.resize(pc1.size());
  for (std::size_t i = 0; i < pc0.size(); ++i) root.src[i] = i;
  for (std::size_t j = 0; j < pc1.size(); ++j) root.tgt[j] = j;

  std::vector<Cell> leaves = QuadtreeBuilder(pc0, pc1, cfg).build(std::move(root));

  std::vector<std::size_t> by_x;
  if (cfg.halo_margin > 0.0) {
    by_x.resize(pc0.size());
    for (std::size_t i = 0; i < pc0.size(); ++i) by_x[i] = i;
    std::stable_sort(by_x.begin(), by_x.end(),
                     [&](std::size_t a, std::size_t b) { return pc0.points[a].x < pc0.points[b].x; });
  }

  std::vector<ChunkPair> chunks;
  chunks.reserve(leaves.size());
  for (Cell& leaf : leaves) {
    ChunkPair c;
    c.region = leaf.box;
    c.target_indices = std::move(leaf.tgt);
    if (cfg.halo_margin > 0.0) {
      c.source_indices = sources_in(pc0.points, by_x, leaf.box.expanded_xy(cfg.halo_margin));
      c.halo_over_cap = c.source_indices.size() > cfg.point_cap;
    } else {
      c.source_indices = std::move(leaf.src);
    }
    c.no_sources = c.source_indices.empty();
    c.chunk_id = static_cast<int>(chunks.size());
    chunks.push_back(std::move(c));
  }
  return chunks;
}

MergedScores merge_scores(std::span<const ChunkResult> chunks, std::size_t n1) {
  MergedScores out;
  out.scores.assign(n1, 0.0);
  out.classes.assign(n1, ChangeClass::kUnchanged);
  std::vector<char> filled(n1, 0);
  for (const ChunkResult& r : chunks) {
    if (r.chunk == nullptr) throw DataError("merge_scores: missing chunk");
    const auto& idx = r.chunk->target_indices;
    if (r.scores.size() != idx.size() || r.classes.size() != idx.size()) {
      throw DataError("merge_scores: chunk " + std::to_string(r.chunk->chunk_id) + " result length mismatch");
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const std::size_t j = idx[k];
      if (j >= n1) throw DataError("merge_scores: target index " + std::to_string(j) + " out of range");
      if (filled[j]) throw DataError("merge_scores: target index " + std::to_string(j) + " owned by two chunks");
      filled[j] = 1;
      out.scores[j] = r.scores[k];
      out.classes[j] = r.classes[k];
    }
  }
  const auto missing = std::find(filled.begin(), filled.end(), 0);
  if (missing != filled.end()) {
    throw DataError("merge_scores: target index " + std::to_string(missing - filled.begin()) +
                    " not covered by any chunk");
  }
  return out;
}

SizeSummary summarize_sizes(std::vector<std::size_t> sizes) {
  if (sizes.empty()) throw DataError("summarize_sizes: empty list");
  std::sort(sizes.begin(), sizes.end());
  const std::size_t n = sizes.size();
  SizeSummary s;
  s.min = sizes.front();
  s.max = sizes.back();
  s.median = n % 2 == 1 ? static_cast<double>(sizes[n / 2])
                        : 0.5 * (static_cast<double>(sizes[n / 2 - 1]) + static_cast<double>(sizes[n / 2]));
  return s;
}

ChunkStats chunk_stats(std::span<const ChunkPair> chunks) {
  if (chunks.empty()) throw DataError("chunk_stats: empty chunk list");
  std::vector<std::size_t> src, tgt;
  ChunkStats st;
  for (const ChunkPair& c : chunks) {
    src.push_back(c.source_indices.size());
    tgt.push_back(c.target_indices.size());
    st.halo_over_cap += c.halo_over_cap ? 1 : 0;
    st.no_sources += c.no_sources ? 1 : 0;
  }
  st.count = chunks.size();
  st.src = summarize_sizes(std::move(src));
  st.tgt = summarize_sizes(std::move(tgt));
  return st;
}

}  // namespace otcd
