#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otcd/point_cloud.hpp"

namespace otcd {

// Reads an ASCII XYZ file: one point per line, `x y z` or `x y z label` when
// `has_label` is set. Blank lines and lines starting with '#' are skipped.
// Throws ParseError (with the 1-based line number) on malformed lines,
// non-finite coordinates and labels outside {0,1,2}.
PointCloud read_xyz(const std::string& path, bool has_label);

// Writes `x y z [label]` lines with round-trip precision.
void write_xyz(const std::string& path, const PointCloud& cloud);

// Number of whitespace-separated fields on the first data line, 0 if none.
int sniff_xyz_columns(const std::string& path);

struct PlyData {
  PointCloud cloud;
  std::optional<std::vector<double>> scores;
  std::optional<std::vector<ChangeClass>> classes;
};

// ASCII PLY with vertex properties x y z, change_score (float) and
// change_class (uchar). Scores may be +inf (unreached targets).
void write_ply_scored(const std::string& path, const PointCloud& cloud, std::span<const double> scores,
                      std::span<const ChangeClass> classes);

// ASCII PLY with x y z and, when the cloud carries labels, a `label` uchar.
void write_ply(const std::string& path, const PointCloud& cloud);

// Reads an ASCII 1.0 PLY. Recovers change_score / change_class when declared,
// and `label` into cloud.labels. Binary encodings are rejected.
PlyData read_ply(const std::string& path);

// Dispatches on extension: ".ply" goes to read_ply (labels from a `label`
// property), anything else to read_xyz with the column count sniffed.
PointCloud read_cloud(const std::string& path);

}  // namespace otcd
