#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "otcd/change_detection.hpp"
#include "otcd/errors.hpp"
#include "otcd/evaluation.hpp"
#include "otcd/synthgen.hpp"

namespace otcd {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using C = ChangeClass;

ChangeDetectionConfig uot_config() {
  ChangeDetectionConfig cfg;
  cfg.epsilon_rel = 0.1;
  cfg.solver.rho = 100.0;
  cfg.workers = 1;
  return cfg;
}

// 48 m x 48 m tile with one 16 m x 16 m, 10 m tall building in the middle.
ScenePair one_building(BuildingStatus status) {
  SceneSpec s;
  s.extent_x = s.extent_y = 48;
  s.ground_density = 2;
  s.noise_sigma_z = 0.05;
  s.seed = 17;
  s.buildings.push_back({{16, 16, 32, 32}, 10.0, status});
  return generate_pair(s);
}

TEST(Classify, Examples) {
  EXPECT_EQ(classify(std::vector<double>{0.1, 5, -5}, 1.0), (std::vector<C>{C::kUnchanged, C::kNew, C::kDemolished}));
  EXPECT_EQ(classify(std::vector<double>{1.0, -1.0}, 1.0), (std::vector<C>{C::kUnchanged, C::kUnchanged}));
  EXPECT_EQ(classify(std::vector<double>(4, 0.0), 0.5), std::vector<C>(4, C::kUnchanged));
  EXPECT_EQ(classify(std::vector<double>{kInf}, 1e6), std::vector<C>{C::kNew});
  EXPECT_THROW(classify(std::vector<double>{0.0}, 0.0), ConfigError);
  EXPECT_THROW(classify(std::vector<double>{0.0}, std::nan("")), ConfigError);
}

TEST(Classify, UnchangedSetGrowsWithTau) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 4.0);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  std::vector<double> scores(500);
  for (auto& s : scores) s = n(rng);
  for (int trial = 0; trial < 50; ++trial) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    const auto ca = classify(scores, a), cb = classify(scores, b);
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (ca[j] == C::kUnchanged) EXPECT_EQ(cb[j], C::kUnchanged);
    }
  }
}

TEST(PointwiseScores, Examples) {
  const std::vector<std::uint8_t> reached = {1, 1, 1, 0};
  const std::vector<Point3> proj = {{1, 2, 3}, {0, 0, 0}, {0, 0, 10}, {0, 0, 0}};
  const std::vector<Point3> x1 = {{1, 2, 3}, {0, 0, 10}, {0, 0, 0}, {5, 5, 5}};
  const PointScores s = pointwise_scores(proj, reached, x1);
  EXPECT_EQ(s.scores, (std::vector<double>{0, 10, -10, kInf}));
  EXPECT_EQ(s.distances[0], 0.0);
  EXPECT_EQ(s.distances[1], 10.0);
  EXPECT_EQ(s.distances[2], 10.0);
  EXPECT_TRUE(std::isinf(s.distances[3]));
  EXPECT_THROW(pointwise_scores(proj, reached, std::vector<Point3>(3)), DataError);
}

TEST(ParseMethod, Names) {
  EXPECT_EQ(parse_method("uot"), Method::kUnbalancedOt);
  EXPECT_EQ(parse_method("unbalanced_ot"), Method::kUnbalancedOt);
  EXPECT_EQ(parse_method("ot"), Method::kBalancedOt);
  EXPECT_EQ(parse_method("balanced_ot"), Method::kBalancedOt);
  EXPECT_EQ(parse_method("nn"), Method::kNnBaseline);
  EXPECT_EQ(parse_method("nn_baseline"), Method::kNnBaseline);
  EXPECT_THROW(parse_method("m3c2"), ConfigError);
  EXPECT_STREQ(method_name(Method::kUnbalancedOt), "unbalanced_ot");
}

TEST(DetectChanges, IdentitySceneIsUnchanged) {
  SceneSpec s;
  s.extent_x = s.extent_y = 40;
  s.ground_density = 2;
  s.noise_sigma_z = 0.0;
  const ScenePair p = generate_pair(s);
  for (Method m : {Method::kUnbalancedOt, Method::kBalancedOt, Method::kNnBaseline}) {
    ChangeDetectionConfig cfg = uot_config();
    cfg.method = m;
    cfg.epsilon_rel = 0.01;
    if (m == Method::kBalancedOt) cfg.solver.rho = kInf;
    cfg.tau = 0.05;
    const DetectionResult r = detect_changes(p.pc0, p.pc0, cfg);
    EXPECT_EQ(std::count(r.map.classes.begin(), r.map.classes.end(), C::kUnchanged), long(p.pc0.size()))
        << method_name(m);
    EXPECT_EQ(r.map.scores.size(), p.pc0.size());
    EXPECT_EQ(r.map.distances.size(), p.pc0.size());
  }
}

TEST(DetectChanges, AddedBuildingIsNew) {
  const ScenePair p = one_building(BuildingStatus::kAdded);
  ChangeDetectionConfig cfg = uot_config();
  cfg.tau = 5.0;
  const DetectionResult r = detect_changes(p.pc0, p.pc1, cfg);
  const auto& gt = *p.pc1.labels;
  std::size_t roof = 0;
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (gt[j] == C::kNew) {
      ++roof;
      EXPECT_EQ(r.map.classes[j], C::kNew) << j;
    } else {
      EXPECT_EQ(r.map.classes[j], C::kUnchanged) << j;
    }
  }
  EXPECT_EQ(roof, 512u);
}

// Ground revealed by a demolition projects onto a blend of the old roof and
// the surrounding ground: with eps ~ 60 m^2 the blur radius is about half the
// 16 m footprint, so scores fade towards the footprint edge. The core at least
// 4 m inside must be flagged; the rim may fall under tau.
bool in_core(const Point3& q) { return q.x > 20 && q.x < 28 && q.y > 20 && q.y < 28; }

TEST(DetectChanges, RemovedBuildingIsDemolished) {
  const ScenePair p = one_building(BuildingStatus::kRemoved);
  ChangeDetectionConfig cfg = uot_config();
  cfg.tau = 3.0;
  const DetectionResult r = detect_changes(p.pc0, p.pc1, cfg);
  const auto& gt = *p.pc1.labels;
  std::size_t hit = 0, inside = 0, core = 0;
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (gt[j] == C::kDemolished) {
      ++inside;
      hit += r.map.classes[j] == C::kDemolished;
      if (in_core(p.pc1.points[j])) {
        ++core;
        EXPECT_EQ(r.map.classes[j], C::kDemolished) << j;
      }
    } else {
      EXPECT_EQ(r.map.classes[j], C::kUnchanged) << j;
    }
  }
  EXPECT_GT(core, 50u);
  EXPECT_GE(double(hit), 0.6 * double(inside));
}

TEST(DetectChanges, SwappingEpochsSwapsNewAndDemolished) {
  const ScenePair p = one_building(BuildingStatus::kAdded);
  ChangeDetectionConfig cfg = uot_config();
  cfg.tau = 3.0;
  const DetectionResult forward = detect_changes(p.pc0, p.pc1, cfg);
  const DetectionResult backward = detect_changes(p.pc1, p.pc0, cfg);
  std::size_t fwd_new = 0, core = 0;
  for (std::size_t j = 0; j < p.pc1.size(); ++j) {
    fwd_new += forward.map.classes[j] == C::kNew;
    EXPECT_NE(forward.map.classes[j], C::kDemolished) << j;
  }
  for (std::size_t j = 0; j < p.pc0.size(); ++j) {
    EXPECT_NE(backward.map.classes[j], C::kNew) << j;
    if (in_core(p.pc0.points[j])) {
      ++core;
      EXPECT_EQ(backward.map.classes[j], C::kDemolished) << j;
    }
  }
  EXPECT_EQ(fwd_new, 512u);
  EXPECT_GT(core, 50u);
}

TEST(DetectChanges, RigidVerticalShiftShiftsBalancedScores) {
  // For squared-Euclidean cost a z-shift of pc1 adds row and column terms to
  // C, which the balanced potentials absorb: the plan, hence the projection,
  // is unchanged and every score moves by exactly h.
  const ScenePair p = one_building(BuildingStatus::kAdded);
  PointCloud shifted = p.pc1;
  const double h = 0.75;
  for (auto& q : shifted.points) q.z += h;
  ChangeDetectionConfig cfg;
  cfg.method = Method::kBalancedOt;
  cfg.epsilon_rel.reset();  // a relative epsilon would follow the shifted median
  cfg.solver.epsilon = 20.0;
  cfg.solver.tol = 1e-12;
  cfg.solver.max_iter = 100000;
  cfg.workers = 1;
  const DetectionResult a = detect_changes(p.pc0, p.pc1, cfg), b = detect_changes(p.pc0, shifted, cfg);
  ASSERT_EQ(a.non_converged(), 0u);
  ASSERT_EQ(b.non_converged(), 0u);
  for (std::size_t j = 0; j < p.pc1.size(); ++j) EXPECT_NEAR(b.map.scores[j] - a.map.scores[j], h, 1e-6) << j;
}

TEST(DetectChanges, JointTranslationLeavesScoresUnchanged) {
  const ScenePair p = one_building(BuildingStatus::kRemoved);
  const Point3 t{1000.0, -250.0, 35.0};
  PointCloud a = p.pc0, b = p.pc1;
  for (auto& q : a.points) q = q + t;
  for (auto& q : b.points) q = q + t;
  ChangeDetectionConfig cfg = uot_config();
  cfg.solver.tol = 1e-10;
  cfg.solver.max_iter = 50000;
  const DetectionResult r0 = detect_changes(p.pc0, p.pc1, cfg), r1 = detect_changes(a, b, cfg);
  for (std::size_t j = 0; j < p.pc1.size(); ++j) EXPECT_NEAR(r0.map.scores[j], r1.map.scores[j], 1e-6) << j;
}

TEST(DetectChanges, LargeRhoMatchesBalanced) {
  SceneSpec s = preset("low_res_low_noise");
  const ScenePair p = generate_pair(s);
  ChangeDetectionConfig cfg;
  cfg.epsilon_rel.reset();
  cfg.solver.epsilon = 20.0;
  cfg.chunking.point_cap = 2000;
  cfg.workers = 1;
  cfg.method = Method::kBalancedOt;
  const DetectionResult bal = detect_changes(p.pc0, p.pc1, cfg);
  cfg.method = Method::kUnbalancedOt;
  cfg.solver.rho = 1e4 * cfg.solver.epsilon;
  const DetectionResult unb = detect_changes(p.pc0, p.pc1, cfg);
  std::size_t agree = 0;
  for (std::size_t j = 0; j < p.pc1.size(); ++j) agree += bal.map.classes[j] == unb.map.classes[j];
  EXPECT_GE(double(agree), 0.999 * double(p.pc1.size()));
}

TEST(DetectChanges, WorkerCountDoesNotChangeOutput) {
  const ScenePair p = generate_pair(preset("low_res_high_noise"));
  ChangeDetectionConfig cfg = uot_config();
  cfg.chunking.point_cap = 500;
  cfg.solver.max_iter = 300;
  const DetectionResult one = detect_changes(p.pc0, p.pc1, cfg);
  cfg.workers = 4;
  const DetectionResult four = detect_changes(p.pc0, p.pc1, cfg);
  EXPECT_EQ(one.map.scores, four.map.scores);
  EXPECT_EQ(one.map.classes, four.map.classes);
  ASSERT_EQ(one.chunks.size(), four.chunks.size());
  for (std::size_t k = 0; k < one.chunks.size(); ++k) EXPECT_EQ(one.chunks[k].iterations, four.chunks[k].iterations);
}

TEST(DetectChanges, NearestNeighbourBaseline) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  PointCloud a, b;
  for (int k = 0; k < 300; ++k) a.points.push_back({u(rng), u(rng), u(rng) / 4});
  for (int k = 0; k < 200; ++k) b.points.push_back({u(rng), u(rng), u(rng) / 4});
  ChangeDetectionConfig cfg;
  cfg.method = Method::kNnBaseline;
  cfg.workers = 1;
  const DetectionResult r = detect_changes(a, b, cfg);
  ASSERT_EQ(r.chunks.size(), 1u);
  for (std::size_t j = 0; j < b.size(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < a.size(); ++i) {
      if (squared_distance(a.points[i], b.points[j]) < squared_distance(a.points[best], b.points[j])) best = i;
    }
    EXPECT_EQ(r.map.scores[j], b.points[j].z - a.points[best].z);
    EXPECT_DOUBLE_EQ(r.map.distances[j], std::sqrt(squared_distance(a.points[best], b.points[j])));
  }
}

TEST(DetectChanges, ChunkWithoutSourcesIsNew) {
  PointCloud a, b;
  for (int k = 0; k < 4; ++k) {
    a.points.push_back({0.1 * k, 0.0, 0.0});
    b.points.push_back({0.1 * k, 0.0, 0.0});
    b.points.push_back({50 + 0.1 * k, 50.0, 0.0});
  }
  for (Method m : {Method::kUnbalancedOt, Method::kBalancedOt, Method::kNnBaseline}) {
    ChangeDetectionConfig cfg = uot_config();
    cfg.method = m;
    if (m == Method::kBalancedOt) cfg.solver.rho = kInf;
    cfg.chunking.point_cap = 4;
    const DetectionResult r = detect_changes(a, b, cfg);
    std::size_t empty = 0;
    for (const auto& d : r.chunks) empty += d.no_sources;
    EXPECT_EQ(empty, 1u);
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (b.points[j].x > 25) {
        EXPECT_TRUE(std::isinf(r.map.scores[j]));
        EXPECT_EQ(r.map.classes[j], C::kNew);
      } else {
        EXPECT_EQ(r.map.classes[j], C::kUnchanged);
      }
    }
  }
}

TEST(DetectChanges, NonConvergenceIsRecorded) {
  const ScenePair p = one_building(BuildingStatus::kAdded);
  ChangeDetectionConfig cfg = uot_config();
  cfg.solver.max_iter = 2;
  const DetectionResult r = detect_changes(p.pc0, p.pc1, cfg);
  EXPECT_EQ(r.non_converged(), r.chunks.size());
  EXPECT_EQ(r.map.scores.size(), p.pc1.size());
  for (const auto& d : r.chunks) {
    EXPECT_EQ(d.iterations, 2);
    EXPECT_GT(d.epsilon, 0.0);
    EXPECT_GT(d.peak_bytes_estimate, 0u);
  }
}

TEST(DetectChanges, RelativeEpsilonFollowsChunkMedian) {
  const ScenePair p = one_building(BuildingStatus::kAdded);
  ChangeDetectionConfig cfg = uot_config();
  const DetectionResult r = detect_changes(p.pc0, p.pc1, cfg);
  ASSERT_EQ(r.chunks.size(), 1u);
  EXPECT_DOUBLE_EQ(r.chunks[0].epsilon, 0.1 * median_squared_distance(p.pc0.points, p.pc1.points));
}

TEST(DetectChanges, Validation) {
  PointCloud a;
  a.points = {{0, 0, 0}};
  ChangeDetectionConfig cfg;
  cfg.tau = 0.0;
  EXPECT_THROW(detect_changes(a, a, cfg), ConfigError);
  cfg = ChangeDetectionConfig{};
  cfg.epsilon_rel = -1.0;
  EXPECT_THROW(detect_changes(a, a, cfg), ConfigError);
  cfg = ChangeDetectionConfig{};
  EXPECT_THROW(detect_changes(PointCloud{}, a, cfg), DataError);
}

TEST(ThresholdSweep, CachedScoresMatchEndToEndRuns) {
  const ScenePair p = generate_pair(preset("low_res_high_noise"));
  ChangeDetectionConfig cfg = uot_config();
  cfg.chunking.point_cap = 2000;
  const std::vector<double> grid = {0.5, 2.0, 4.5};
  const ThresholdSweep ts = threshold_sweep(p.pc0, p.pc1, cfg, grid);
  for (const SweepPoint& sp : ts.sweep.curve) {
    ChangeDetectionConfig at = cfg;
    at.tau = sp.tau;
    const DetectionResult r = detect_changes(p.pc0, p.pc1, at);
    EXPECT_EQ(r.map.classes, classify(ts.detection.map.scores, sp.tau));
    EXPECT_EQ(iou(confusion(*p.pc1.labels, r.map.classes)).mean_change_iou, sp.metrics.mean_change_iou);
  }
}

}  // namespace
}  // namespace otcd
