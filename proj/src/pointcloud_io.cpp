#include "otcd/pointcloud_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <string_view>

#include "otcd/errors.hpp"

namespace otcd {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view tok, double& out) {
  // from_chars does not accept a leading '+'.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

bool parse_int(std::string_view tok, long long& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

bool is_data_line(std::string_view line) {
  const std::string_view t = trim(line);
  return !t.empty() && t.front() != '#';
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

// Shortest representation that reads back to the same value.
template <typename T>
std::string_view format_num(T value, char* buf, std::size_t cap) {
  const auto res = std::to_chars(buf, buf + cap, value);
  return {buf, static_cast<std::size_t>(res.ptr - buf)};
}

void write_point(std::ostream& out, const Point3& p) {
  char buf[64];
  out << format_num(p.x, buf, sizeof buf) << ' ';
  out << format_num(p.y, buf, sizeof buf) << ' ';
  out << format_num(p.z, buf, sizeof buf);
}

Point3 parse_point(const std::string& path, std::size_t lineno, std::span<const std::string_view> f) {
  double v[3];
  for (int k = 0; k < 3; ++k) {
    if (!parse_double(f[k], v[k])) {
      throw ParseError(path, lineno, "cannot parse coordinate '" + std::string(f[k]) + "'");
    }
    if (!std::isfinite(v[k])) {
      throw ParseError(path, lineno, "non-finite coordinate '" + std::string(f[k]) + "'");
    }
  }
  return {v[0], v[1], v[2]};
}

ChangeClass parse_label(const std::string& path, std::size_t lineno, std::string_view tok) {
  long long label = 0;
  if (!parse_int(tok, label)) {
    // Accept integral values written as reals, e.g. "1.0".
    double d = 0.0;
    if (!parse_double(tok, d) || d != std::floor(d) || !std::isfinite(d)) {
      throw ParseError(path, lineno, "cannot parse label '" + std::string(tok) + "'");
    }
    label = static_cast<long long>(d);
  }
  if (label < 0 || label >= kNumClasses) {
    throw ParseError(path, lineno, "label " + std::to_string(label) + " outside {0,1,2}");
  }
  return static_cast<ChangeClass>(label);
}

}  // namespace

PointCloud read_xyz(const std::string& path, bool has_label) {
  std::ifstream in = open_in(path);
  PointCloud cloud;
  if (has_label) cloud.labels.emplace();
  const std::size_t expected = has_label ? 4 : 3;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!is_data_line(line)) continue;
    const auto fields = split_ws(line);
    if (fields.size() != expected) {
      throw ParseError(path, lineno,
                       "expected " + std::to_string(expected) + " fields, found " + std::to_string(fields.size()));
    }
    cloud.points.push_back(parse_point(path, lineno, fields));
    if (has_label) cloud.labels->push_back(parse_label(path, lineno, fields[3]));
  }
  if (cloud.points.empty()) throw ParseError(path, 0, "no points");
  return cloud;
}

void write_xyz(const std::string& path, const PointCloud& cloud) {
  validate(cloud);
  std::ofstream out = open_out(path);
  if (!cloud.epoch_tag.empty()) out << "# epoch " << cloud.epoch_tag << '\n';
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    write_point(out, cloud.points[i]);
    if (cloud.labels) out << ' ' << static_cast<int>((*cloud.labels)[i]);
    out << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

int sniff_xyz_columns(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (is_data_line(line)) return static_cast<int>(split_ws(line).size());
  }
  return 0;
}

void write_ply_scored(const std::string& path, const PointCloud& cloud, std::span<const double> scores,
                      std::span<const ChangeClass> classes) {
  if (scores.size() != cloud.size() || classes.size() != cloud.size()) {
    throw DataError("write_ply_scored: cloud has " + std::to_string(cloud.size()) + " points but " +
                    std::to_string(scores.size()) + " scores and " + std::to_string(classes.size()) + " classes");
  }
  std::ofstream out = open_out(path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.size() << '\n';
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "property float change_score\nproperty uchar change_class\n";
  out << "end_header\n";
  char buf[64];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    write_point(out, cloud.points[i]);
    out << ' ' << format_num(static_cast<float>(scores[i]), buf, sizeof buf);
    out << ' ' << static_cast<int>(classes[i]) << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

void write_ply(const std::string& path, const PointCloud& cloud) {
  validate(cloud);
  std::ofstream out = open_out(path);
  out << "ply\nformat ascii 1.0\n";
  if (!cloud.epoch_tag.empty()) out << "comment epoch " << cloud.epoch_tag << '\n';
  out << "element vertex " << cloud.size() << '\n';
  out << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.labels) out << "property uchar label\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    write_point(out, cloud.points[i]);
    if (cloud.labels) out << ' ' << static_cast<int>((*cloud.labels)[i]);
    out << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

PlyData read_ply(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t lineno = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    return true;
  };

  if (!next_line() || trim(line) != "ply") throw ParseError(path, 1, "missing 'ply' magic");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
    std::vector<std::string> types;
  };
  std::vector<Element> elements;
  bool have_format = false;
  bool header_done = false;

  while (next_line()) {
    const auto f = split_ws(line);
    if (f.empty()) continue;
    if (f[0] == "end_header") {
      header_done = true;
      break;
    }
    if (f[0] == "comment" || f[0] == "obj_info") continue;
    if (f[0] == "format") {
      if (f.size() < 3) throw ParseError(path, lineno, "malformed format line");
      if (f[1] != "ascii") {
        throw ParseError(path, lineno, "unsupported PLY encoding '" + std::string(f[1]) + "' (only ascii)");
      }
      have_format = true;
    } else if (f[0] == "element") {
      long long count = 0;
      if (f.size() != 3 || !parse_int(f[2], count) || count < 0) {
        throw ParseError(path, lineno, "malformed element line");
      }
      elements.push_back({std::string(f[1]), static_cast<std::size_t>(count), {}, {}});
    } else if (f[0] == "property") {
      if (elements.empty()) throw ParseError(path, lineno, "property before any element");
      if (f.size() >= 2 && f[1] == "list") {
        if (f.size() != 5) throw ParseError(path, lineno, "malformed list property");
        elements.back().properties.emplace_back(f[4]);
        elements.back().types.emplace_back("list");
      } else {
        if (f.size() != 3) throw ParseError(path, lineno, "malformed property line");
        elements.back().properties.emplace_back(f[2]);
        elements.back().types.emplace_back(f[1]);
      }
    } else {
      throw ParseError(path, lineno, "unknown header keyword '" + std::string(f[0]) + "'");
    }
  }
  if (!header_done) throw ParseError(path, lineno, "missing end_header");
  if (!have_format) throw ParseError(path, lineno, "missing format line");

  std::size_t vertex_elem = elements.size();
  for (std::size_t e = 0; e < elements.size(); ++e) {
    if (elements[e].name == "vertex") vertex_elem = e;
  }
  if (vertex_elem == elements.size()) throw ParseError(path, lineno, "no vertex element");

  const Element& vertex = elements[vertex_elem];
  auto find = [&](std::string_view name) -> int {
    for (std::size_t k = 0; k < vertex.properties.size(); ++k) {
      if (vertex.properties[k] == name) return static_cast<int>(k);
    }
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError(path, lineno, "vertex element lacks x, y or z");
  const int iscore = find("change_score"), iclass = find("change_class"), ilabel = find("label");
  const bool score_is_float =
      iscore >= 0 && (vertex.types[iscore] == "float" || vertex.types[iscore] == "float32");

  // Skip rows of elements declared before the vertices.
  for (std::size_t e = 0; e < vertex_elem; ++e) {
    for (std::size_t r = 0; r < elements[e].count; ++r) {
      if (!next_line()) throw ParseError(path, lineno, "unexpected end of file in element '" + elements[e].name + "'");
    }
  }

  PlyData data;
  data.cloud.points.reserve(vertex.count);
  if (iscore >= 0) data.scores.emplace().reserve(vertex.count);
  if (iclass >= 0) data.classes.emplace().reserve(vertex.count);
  if (ilabel >= 0) data.cloud.labels.emplace().reserve(vertex.count);

  std::size_t rows = 0;
  while (rows < vertex.count) {
    if (!next_line()) {
      throw ParseError(path, lineno,
                       "header declares " + std::to_string(vertex.count) + " vertices, file has " + std::to_string(rows));
    }
    const auto f = split_ws(line);
    if (f.empty()) continue;
    if (f.size() != vertex.properties.size()) {
      throw ParseError(path, lineno,
                       "expected " + std::to_string(vertex.properties.size()) + " values, found " +
                           std::to_string(f.size()));
    }
    const std::string_view xyz[3] = {f[ix], f[iy], f[iz]};
    data.cloud.points.push_back(parse_point(path, lineno, xyz));
    if (iscore >= 0) {
      double s = 0.0;
      if (!parse_double(f[iscore], s) || std::isnan(s)) {
        throw ParseError(path, lineno, "cannot parse change_score '" + std::string(f[iscore]) + "'");
      }
      // Honor the declared precision so a round trip is exact.
      if (score_is_float) s = static_cast<double>(static_cast<float>(s));
      data.scores->push_back(s);
    }
    if (iclass >= 0) data.classes->push_back(parse_label(path, lineno, f[iclass]));
    if (ilabel >= 0) data.cloud.labels->push_back(parse_label(path, lineno, f[ilabel]));
    ++rows;
  }

  if (vertex_elem + 1 == elements.size()) {
    while (next_line()) {
      if (!trim(line).empty()) {
        throw ParseError(path, lineno, "more vertex rows than the declared " + std::to_string(vertex.count));
      }
    }
  }
  if (data.cloud.points.empty()) throw ParseError(path, 0, "no points");
  return data;
}

PointCloud read_cloud(const std::string& path) {
  const auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? std::string() : path.substr(dot);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".ply") return read_ply(path).cloud;
  return read_xyz(path, sniff_xyz_columns(path) == 4);
}

}  // namespace otcd
