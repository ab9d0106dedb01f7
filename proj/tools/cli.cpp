#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "otcd/change_detection.hpp"
#include "otcd/chunking.hpp"
#include "otcd/errors.hpp"
#include "otcd/evaluation.hpp"
#include "otcd/json_io.hpp"
#include "otcd/pointcloud_io.hpp"
#include "otcd/synthgen.hpp"

namespace otcd::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct SolverFlags {
  std::string method = "uot";
  bool balanced = false;
  double epsilon = 0.0;
  double epsilon_rel = 0.0;
  double rho = kDefaultRho;
  int max_iter = 5000;
  double tol = 1e-6;
  bool standard_domain = false;
  double memory_budget_gb = 16.0;
  CLI::Option* epsilon_opt = nullptr;
  CLI::Option* epsilon_rel_opt = nullptr;
  CLI::Option* method_opt = nullptr;
};

struct ChunkFlags {
  std::size_t point_cap = 30000;
  double halo = 0.0;
};

void add_solver_flags(CLI::App* app, SolverFlags& f) {
  f.method_opt = app->add_option("--method", f.method, "uot (default), ot or nn")
                     ->check(CLI::IsMember({"uot", "ot", "nn", "unbalanced_ot", "balanced_ot", "nn_baseline"}));
  app->add_flag("--balanced", f.balanced, "Shorthand for --method ot");
  f.epsilon_opt = app->add_option("--epsilon", f.epsilon, "Entropic weight in squared meters");
  f.epsilon_rel_opt = app->add_option("--epsilon-rel", f.epsilon_rel,
                                      "Entropic weight as a fraction of each chunk's median cost (default 0.1)");
  f.epsilon_opt->excludes(f.epsilon_rel_opt);
  app->add_option("--rho", f.rho, "KL weight on the source marginal, squared meters")->capture_default_str();
  app->add_option("--max-iter", f.max_iter, "Sinkhorn iteration limit")->capture_default_str();
  app->add_option("--tol", f.tol, "L1 marginal tolerance")->capture_default_str();
  app->add_flag("--standard-domain", f.standard_domain, "Plain scaling iterations instead of the log-domain solver");
  app->add_option("--memory-budget-gb", f.memory_budget_gb, "Per-chunk dense memory budget")->capture_default_str();
}

void add_chunk_flags(CLI::App* app, ChunkFlags& f) {
  app->add_option("--point-cap", f.point_cap, "Maximum points per epoch in a chunk")->capture_default_str();
  app->add_option("--halo", f.halo, "XY margin (m) added to each chunk's source region")->capture_default_str();
}

ChangeDetectionConfig make_config(const SolverFlags& s, const ChunkFlags& c) {
  ChangeDetectionConfig cfg;
  Method method = parse_method(s.method);
  if (s.balanced) {
    if (s.method_opt->count() > 0 && method != Method::kBalancedOt) {
      throw ConfigError("--balanced conflicts with --method " + s.method);
    }
    method = Method::kBalancedOt;
  }
  cfg.method = method;
  if (s.epsilon_opt->count() > 0) {
    cfg.solver.epsilon = s.epsilon;
    cfg.epsilon_rel.reset();
  } else {
    cfg.epsilon_rel = s.epsilon_rel_opt->count() > 0 ? s.epsilon_rel : kDefaultEpsilonRel;
  }
  cfg.solver.rho = method == Method::kBalancedOt ? std::numeric_limits<double>::infinity() : s.rho;
  cfg.solver.max_iter = s.max_iter;
  cfg.solver.tol = s.tol;
  cfg.solver.log_domain = !s.standard_domain;
  cfg.solver.memory_budget_bytes = static_cast<std::size_t>(s.memory_budget_gb * double(std::size_t{1} << 30));
  cfg.chunking.point_cap = c.point_cap;
  cfg.chunking.halo_margin = c.halo;
  return cfg;
}

// "a:b:step" (inclusive) or a comma-separated list.
std::vector<double> parse_tau_grid(const std::string& text) {
  std::vector<double> grid;
  auto number = [&](const std::string& tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.empty()) throw ConfigError("bad tau grid value '" + tok + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ConfigError("tau grid range must be start:stop:step");
    const double lo = number(parts[0]), hi = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0) || hi < lo) throw ConfigError("tau grid range must have step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= n; ++k) grid.push_back(lo + static_cast<double>(k) * step);
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) grid.push_back(number(p));
  }
  if (grid.empty()) throw ConfigError("empty tau grid");
  for (double t : grid) {
    if (!(t > 0.0)) throw ConfigError("tau grid values must be positive");
  }
  return grid;
}

std::string diag_path_for(const std::string& ply_path) {
  fs::path p(ply_path);
  if (p.extension() == ".ply") p.replace_extension();
  return p.string() + ".diag.json";
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

json class_counts(std::span<const ChangeClass> classes) {
  std::size_t n[kNumClasses] = {0, 0, 0};
  for (ChangeClass c : classes) ++n[static_cast<int>(c)];
  return {{"unchanged", n[0]}, {"new", n[1]}, {"demolished", n[2]}};
}

// --- subcommands -----------------------------------------------------------

struct DetectArgs {
  std::string t0, t1, out, diag;
  double tau = 1.0;
  unsigned workers = 0;
  bool strict = false;
  SolverFlags solver;
  ChunkFlags chunk;
};

int run_detect(const DetectArgs& a, std::ostream& out, std::ostream& err) {
  ChangeDetectionConfig cfg = make_config(a.solver, a.chunk);
  cfg.tau = a.tau;
  cfg.workers = a.workers;
  const PointCloud pc0 = read_cloud(a.t0);
  const PointCloud pc1 = read_cloud(a.t1);
  const DetectionResult result = detect_changes(pc0, pc1, cfg);
  write_ply_scored(a.out, pc1, result.map.scores, result.map.classes);
  const std::string diag = a.diag.empty() ? diag_path_for(a.out) : a.diag;
  write_json(diag, diagnostics_json(result, cfg));

  out << json{{"output", a.out}, {"diagnostics", diag}, {"points", pc1.size()}, {"chunks", result.chunks.size()},
              {"classes", class_counts(result.map.classes)}, {"non_converged", result.non_converged()}}
             .dump()
      << '\n';
  if (result.halo_over_cap() > 0) {
    err << "warning: " << result.halo_over_cap() << " chunk(s) exceed the point cap after the halo\n";
  }
  if (result.non_converged() > 0) {
    err << (a.strict ? "error: " : "warning: ") << result.non_converged()
        << " chunk(s) did not converge; see " << diag << '\n';
    if (a.strict) return kNotConverged;
  }
  return kOk;
}

struct SweepArgs {
  std::string t0, t1, out, dataset, scored, tau_grid;
  unsigned workers = 0;
  bool strict = false;
  SolverFlags solver;
  ChunkFlags chunk;
};

int run_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  ChangeDetectionConfig cfg = make_config(a.solver, a.chunk);
  cfg.workers = a.workers;
  const std::vector<double> grid = a.tau_grid.empty() ? default_tau_grid() : parse_tau_grid(a.tau_grid);
  cfg.tau = grid.front();
  const PointCloud pc0 = read_cloud(a.t0);
  const PointCloud pc1 = read_cloud(a.t1);
  const ThresholdSweep ts = threshold_sweep(pc0, pc1, cfg, grid);

  const json metrics = metrics_json(ts.sweep.best, method_name(cfg.method),
                                    a.dataset.empty() ? stem_of(a.t1) : a.dataset, ts.sweep.curve);
  if (!a.out.empty()) write_json(a.out, metrics);
  if (!a.scored.empty()) {
    write_ply_scored(a.scored, pc1, ts.detection.map.scores, classify(ts.detection.map.scores, ts.sweep.best_tau));
  }
  out << metrics.dump(2) << '\n';
  if (ts.detection.non_converged() > 0) {
    err << (a.strict ? "error: " : "warning: ") << ts.detection.non_converged() << " chunk(s) did not converge\n";
    if (a.strict) return kNotConverged;
  }
  return kOk;
}

struct EvalArgs {
  std::string scored, labels, out, method = "unknown", dataset;
  double tau = std::numeric_limits<double>::quiet_NaN();
};

int run_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  const PlyData scored = read_ply(a.scored);
  if (!scored.classes) throw DataError("'" + a.scored + "' has no change_class property");
  const PointCloud truth = read_cloud(a.labels);
  if (!truth.labels) throw DataError("'" + a.labels + "' carries no labels");
  if (truth.size() != scored.cloud.size()) {
    throw DataError("point count mismatch: " + std::to_string(scored.cloud.size()) + " scored vs " +
                    std::to_string(truth.size()) + " labeled");
  }
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (std::sqrt(squared_distance(truth.points[j], scored.cloud.points[j])) > 1e-6) {
      throw DataError("point " + std::to_string(j) + " differs between the scored and the labeled cloud");
    }
  }
  Metrics m = iou(confusion(*truth.labels, *scored.classes));
  m.tau_used = a.tau;
  json metrics = metrics_json(m, a.method, a.dataset.empty() ? stem_of(a.labels) : a.dataset);
  if (std::isnan(a.tau)) metrics["tau"] = nullptr;
  if (!a.out.empty()) write_json(a.out, metrics);
  out << metrics.dump(2) << '\n';
  return kOk;
}

struct SynthArgs {
  std::string preset = "low_res_low_noise", spec, out_dir = ".", format = "xyz";
  std::uint64_t seed = 1;
  bool seed_given = false;
  bool no_buildings = false;
  double density = 0.0, ratio = 0.0, noise = -1.0;
};

int run_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  SceneSpec spec = a.spec.empty() ? preset(a.preset) : scene_spec_from_json(read_json(a.spec));
  if (a.seed_given) spec.seed = a.seed;
  if (a.no_buildings) spec.buildings.clear();
  if (a.density > 0.0) spec.ground_density = a.density;
  if (a.ratio > 0.0) spec.density_t1_ratio = a.ratio;
  if (a.noise >= 0.0) spec.noise_sigma_z = a.noise;
  const ScenePair pair = generate_pair(spec);

  fs::create_directories(a.out_dir);
  const std::string ext = a.format == "ply" ? ".ply" : ".xyz";
  const std::string p0 = (fs::path(a.out_dir) / ("t0" + ext)).string();
  const std::string p1 = (fs::path(a.out_dir) / ("t1" + ext)).string();
  const std::string ps = (fs::path(a.out_dir) / "scene.json").string();
  if (a.format == "ply") {
    write_ply(p0, pair.pc0);
    write_ply(p1, pair.pc1);
  } else {
    write_xyz(p0, pair.pc0);
    write_xyz(p1, pair.pc1);
  }
  write_json(ps, scene_spec_json(spec));
  out << json{{"t0", p0}, {"t1", p1}, {"spec", ps}, {"n0", pair.pc0.size()}, {"n1", pair.pc1.size()},
              {"labels", class_counts(*pair.pc1.labels)}}
             .dump()
      << '\n';
  return kOk;
}

struct ChunkStatsArgs {
  std::string t0, t1;
  ChunkFlags chunk;
};

int run_chunk_stats(const ChunkStatsArgs& a, std::ostream& out, std::ostream&) {
  ChunkingConfig cfg;
  cfg.point_cap = a.chunk.point_cap;
  cfg.halo_margin = a.chunk.halo;
  const PointCloud pc0 = read_cloud(a.t0);
  const PointCloud pc1 = read_cloud(a.t1);
  const auto chunks = build_chunks(pc0, pc1, cfg);
  out << chunk_stats_json(chunk_stats(chunks)).dump(2) << '\n';
  return kOk;
}

struct BenchArgs {
  std::string sizes = "1000,5000,20000";
  int iters = 10;
  std::uint64_t seed = 1;
  SolverFlags solver;
};

int run_bench(const BenchArgs& a, std::ostream& out, std::ostream&) {
  std::vector<std::size_t> sizes;
  {
    std::stringstream ss(a.sizes);
    for (std::string tok; std::getline(ss, tok, ',');) {
      long long v = 0;
      try {
        v = std::stoll(tok);
      } catch (const std::exception&) {
        throw ConfigError("bad size '" + tok + "'");
      }
      if (v < 1) throw ConfigError("sizes must be positive");
      sizes.push_back(static_cast<std::size_t>(v));
    }
  }
  if (a.iters < 1) throw ConfigError("--iters must be at least 1");
  ChunkFlags unused;
  const ChangeDetectionConfig cfg = make_config(a.solver, unused);
  json table = json::array();
  for (const BenchRow& r : bench_solver(sizes, a.iters, a.seed, cfg)) {
    table.push_back({{"n", r.n}, {"wall_ms", r.wall_ms}, {"iterations", r.iterations},
                     {"peak_bytes_estimate", r.peak_bytes_estimate}});
  }
  out << table.dump(2) << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bi-temporal point cloud change detection with unbalanced optimal transport", "otcd"};
  app.require_subcommand(1);

  DetectArgs detect;
  auto* d = app.add_subcommand("detect", "Score and classify every epoch-1 point; writes a scored PLY");
  d->add_option("--t0", detect.t0, "Epoch-0 cloud (.xyz or .ply)")->required()->check(CLI::ExistingFile);
  d->add_option("--t1", detect.t1, "Epoch-1 cloud (.xyz or .ply)")->required()->check(CLI::ExistingFile);
  d->add_option("-o,--output", detect.out, "Scored PLY output")->required();
  d->add_option("--diag", detect.diag, "Diagnostics JSON (default: <output>.diag.json)");
  d->add_option("--tau", detect.tau, "Change threshold in meters")->capture_default_str();
  d->add_option("--workers", detect.workers, "Chunk worker threads (0 = all cores)");
  d->add_flag("--strict", detect.strict, "Exit 3 if any chunk fails to converge");
  add_solver_flags(d, detect.solver);
  add_chunk_flags(d, detect.chunk);

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "Detect once and sweep the threshold against epoch-1 labels");
  s->add_option("--t0", sweep.t0, "Epoch-0 cloud")->required()->check(CLI::ExistingFile);
  s->add_option("--t1", sweep.t1, "Labeled epoch-1 cloud")->required()->check(CLI::ExistingFile);
  s->add_option("--tau-grid", sweep.tau_grid, "start:stop:step or a comma list (default 0.5:10:0.5)");
  s->add_option("-o,--output", sweep.out, "Metrics JSON output");
  s->add_option("--scored", sweep.scored, "Also write a scored PLY at the best tau");
  s->add_option("--dataset", sweep.dataset, "Dataset name recorded in the metrics");
  s->add_option("--workers", sweep.workers, "Chunk worker threads (0 = all cores)");
  s->add_flag("--strict", sweep.strict, "Exit 3 if any chunk fails to converge");
  add_solver_flags(s, sweep.solver);
  add_chunk_flags(s, sweep.chunk);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Compare a scored PLY with a labeled epoch-1 cloud");
  e->add_option("--scored", eval.scored, "Scored PLY from detect")->required()->check(CLI::ExistingFile);
  e->add_option("--labels", eval.labels, "Labeled epoch-1 cloud")->required()->check(CLI::ExistingFile);
  e->add_option("-o,--output", eval.out, "Metrics JSON output");
  e->add_option("--tau", eval.tau, "Threshold the scored file was produced with (recorded only)");
  e->add_option("--method", eval.method, "Method name recorded in the metrics");
  e->add_option("--dataset", eval.dataset, "Dataset name recorded in the metrics");

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Generate a labeled synthetic scene pair");
  auto* preset_opt = y->add_option("--preset", synth.preset, "Scene preset")
                         ->check(CLI::IsMember(preset_names()))
                         ->capture_default_str();
  auto* spec_opt = y->add_option("--spec", synth.spec, "Scene spec JSON")->check(CLI::ExistingFile);
  preset_opt->excludes(spec_opt);
  y->add_option("--out-dir", synth.out_dir, "Output directory")->capture_default_str();
  y->add_option("--format", synth.format, "xyz or ply")->check(CLI::IsMember({"xyz", "ply"}))->capture_default_str();
  y->add_option("--seed", synth.seed, "Random seed")->each([&](const std::string&) { synth.seed_given = true; });
  y->add_flag("--no-buildings", synth.no_buildings, "Drop all buildings from the scene");
  y->add_option("--density", synth.density, "Override the epoch-0 density (points/m^2)");
  y->add_option("--ratio", synth.ratio, "Override the epoch-1 density ratio");
  y->add_option("--noise", synth.noise, "Override the z noise sigma (m)");

  ChunkStatsArgs stats;
  auto* c = app.add_subcommand("chunk-stats", "Print the chunk decomposition summary as JSON");
  c->add_option("--t0", stats.t0, "Epoch-0 cloud")->required()->check(CLI::ExistingFile);
  c->add_option("--t1", stats.t1, "Epoch-1 cloud")->required()->check(CLI::ExistingFile);
  add_chunk_flags(c, stats.chunk);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time dense solves on synthetic chunks of growing size");
  b->add_option("--sizes", bench.sizes, "Comma-separated chunk sizes")->capture_default_str();
  b->add_option("--iters", bench.iters, "Iterations per solve")->capture_default_str();
  b->add_option("--seed", bench.seed, "Random seed")->capture_default_str();
  add_solver_flags(b, bench.solver);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (d->parsed()) return run_detect(detect, out, err);
    if (s->parsed()) return run_sweep(sweep, out, err);
    if (e->parsed()) return run_eval(eval, out, err);
    if (y->parsed()) return run_synth(synth, out, err);
    if (c->parsed()) return run_chunk_stats(stats, out, err);
    if (b->parsed()) return run_bench(bench, out, err);
  } catch (const ConfigError& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kUsage;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error: " << ex.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace otcd::cli
