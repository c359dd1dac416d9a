#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "semloc/errors.hpp"
#include "semloc/filter.hpp"
#include "semloc/io.hpp"
#include "semloc/runner.hpp"

namespace semloc {
namespace {

FilterConfig known_pose_config(Pose2D pose, int count = 100) {
  FilterConfig c;
  c.init = InitMode::known_pose;
  c.init_pose = pose;
  c.init_count = count;
  c.n_min = count;
  c.n_max = count;
  return c;
}

std::vector<Particle> with_weights(const std::vector<double>& w) {
  std::vector<Particle> ps;
  for (std::size_t i = 0; i < w.size(); ++i) {
    ps.push_back({{static_cast<double>(i), 0.0, 0.0}, 0.0, w[i]});
  }
  return ps;
}

VineyardWorld two_rows() {
  WorldSpec spec;
  spec.rows = 2;
  spec.row_length = 12.0;
  return generate_vineyard(spec);
}

TEST(Initialize, KnownPoseZeroSpread) {
  Rng rng(1);
  const auto ps = initialize(known_pose_config({1, 2, 0.5}), Bounds{}, std::nullopt, rng);
  ASSERT_EQ(ps.size(), 100u);
  double total = 0.0;
  for (const auto& p : ps) {
    EXPECT_EQ(p.pose, (Pose2D{1, 2, 0.5}));
    EXPECT_DOUBLE_EQ(p.weight, 0.01);
    total += p.weight;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Initialize, GpsPriorMeanWithinCltBound) {
  FilterConfig c;
  c.n_max = 10000;
  c.init_count = 10000;
  Rng rng(3);
  const GpsFix fix{{5.0, -2.0}, 1.7};
  const auto ps = initialize(c, Bounds{}, fix, rng);
  ASSERT_EQ(ps.size(), 10000u);
  double mx = 0, my = 0;
  for (const auto& p : ps) {
    mx += p.pose.x;
    my += p.pose.y;
  }
  mx /= 10000;
  my /= 10000;
  const double bound = 3 * 1.7 / 100.0;
  EXPECT_NEAR(mx, 5.0, bound);
  EXPECT_NEAR(my, -2.0, bound);
}

TEST(Initialize, GpsPriorWithoutFixFallsBackToUniformWithWarning) {
  std::vector<std::string> warnings;
  set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
  FilterConfig c;
  Rng rng(1);
  const Bounds b{0, 0, 10, 5};
  const auto ps = initialize(c, b, std::nullopt, rng);
  set_warning_sink({});
  EXPECT_EQ(warnings.size(), 1u);
  for (const auto& p : ps) EXPECT_TRUE(b.contains(p.pose.position()));
}

TEST(Initialize, CountClampedToLimits) {
  FilterConfig c;
  c.init = InitMode::uniform;
  c.init_count = 10000;
  Rng rng(1);
  EXPECT_EQ(initialize(c, Bounds{0, 0, 1, 1}, std::nullopt, rng).size(), 500u);
}

TEST(Predict, ZeroDeltaZeroNoiseUnchanged) {
  Rng rng(1);
  auto ps = with_weights({0.5, 0.5});
  const auto before = ps;
  predict(ps, {}, {}, rng);
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(ps[i].pose, before[i].pose);
}

TEST(Predict, ForwardMetre) {
  Rng rng(1);
  std::vector<Particle> ps{{{2, 3, 0}, 0, 1}};
  predict(ps, {0, 1, 0}, {}, rng);
  EXPECT_NEAR(ps[0].pose.x, 3.0, 1e-15);
  EXPECT_NEAR(ps[0].pose.y, 3.0, 1e-15);
}

TEST(Predict, NoisyKeepsCountAndWeights) {
  Rng rng(1);
  auto ps = with_weights({0.1, 0.2, 0.3, 0.4});
  predict(ps, {0.1, 0.5, -0.1}, {0.05, 0.01, 0.05, 0.01, 0.002, 0.005}, rng);
  ASSERT_EQ(ps.size(), 4u);
  EXPECT_DOUBLE_EQ(ps[2].weight, 0.3);
}

TEST(Update, SingleParticleGetsWeightOne) {
  const VineyardWorld w = two_rows();
  const WallMap map = build_wall_map(w.survey());
  std::vector<Particle> ps{{{3, 1.25, 0}, 0, 1}};
  SemanticScan scan;
  scan.observations = {{SemanticClass::pole, 2.0, 0.3}};
  update(ps, scan, GpsFix{{0, 0}, 1.0}, map, FilterConfig{});
  EXPECT_DOUBLE_EQ(ps[0].weight, 1.0);
}

TEST(Update, GroundTruthParticleWins) {
  const VineyardWorld w = two_rows();
  const WallMap map = build_wall_map(w.survey());
  const Pose2D truth{4.3, 1.25, 0.0};
  SemanticScan scan;
  for (int i = 0; i < 36; ++i) {
    const double b = normalize_angle(-std::numbers::pi + i * std::numbers::pi / 18);
    const auto hit = map.raycast(truth.position(), b, 5.0);
    if (hit) scan.observations.push_back({hit->cls, hit->range, b});
  }
  std::vector<Particle> ps{{truth, 0, 0.5}, {{4.6, 1.0, 0.05}, 0, 0.5}};
  const auto summary = update(ps, scan, std::nullopt, map, FilterConfig{});
  EXPECT_GT(ps[0].weight, ps[1].weight);
  EXPECT_EQ(summary.log_obs_best, 0.0);
  EXPECT_EQ(summary.alpha, 0.0);
  EXPECT_FALSE(summary.log_gps_best.has_value());
}

TEST(Update, NoFixEmptyScanGivesUniformWeights) {
  const WallMap map = build_wall_map(two_rows().survey());
  auto ps = with_weights({0.7, 0.2, 0.1});
  update(ps, SemanticScan{}, std::nullopt, map, FilterConfig{});
  for (const auto& p : ps) EXPECT_NEAR(p.weight, 1.0 / 3.0, 1e-15);
}

TEST(Update, AlphaSharedAndGpsIgnoredWhenDisabled) {
  const WallMap map = build_wall_map(two_rows().survey());
  SemanticScan scan;
  for (int i = 0; i < 4; ++i) scan.observations.push_back({SemanticClass::trunk, 1.25, std::numbers::pi / 2});
  auto ps = with_weights({0.5, 0.5});
  const GpsFix fix{{0, 0}, 1.0};
  FilterConfig c;
  const auto s = update(ps, scan, fix, map, c);
  EXPECT_NEAR(s.alpha, 0.5, 1e-12);
  ASSERT_TRUE(s.log_gps_best.has_value());
  c.use_gps = false;
  const auto s2 = update(ps, scan, fix, map, c);
  EXPECT_EQ(s2.alpha, 0.0);
  EXPECT_FALSE(s2.log_gps_best.has_value());
}

TEST(Update, WeightsAlwaysNormalised) {
  const VineyardWorld w = generate_vineyard(WorldSpec{});
  const WallMap map = build_wall_map(w.survey());
  FilterConfig c;
  c.init = InitMode::uniform;
  Rng rng(4);
  auto ps = initialize(c, w.bounds, std::nullopt, rng);
  for (int trial = 0; trial < 20; ++trial) {
    SemanticScan scan;
    for (int i = 0; i < 20; ++i) {
      scan.observations.push_back({static_cast<SemanticClass>(i % 3), uniform(rng, 0.3, 5.0),
                                   uniform(rng, -3.1, 3.1)});
    }
    update(ps, scan, GpsFix{{uniform(rng, 0, 40), uniform(rng, 0, 20)}, 1.7}, map, c);
    double sum = 0.0;
    for (const auto& p : ps) {
      EXPECT_GE(p.weight, 0.0);
      EXPECT_LE(p.weight, 1.0);
      sum += p.weight;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Update, ClasslessEqualsSemanticWithErasedClasses) {
  WorldSpec spec;
  spec.rows = 3;
  spec.row_length = 12;
  spec.pole_every = 100;
  spec.pole_offset = 99;
  const VineyardWorld w = generate_vineyard(spec);
  const WallMap map = build_wall_map(w.survey());
  FilterConfig sem;
  sem.init = InitMode::uniform;
  sem.likelihood.class_weights = {0.8, 0.8, 0.8};
  sem.likelihood.classless_weight = 0.8;
  FilterConfig cl = sem;
  cl.mode = ObservationModel::classless;
  Rng rng(9);
  std::vector<Particle> base;
  for (int i = 0; i < 200; ++i) {
    base.push_back({{uniform(rng, -1, 13), uniform(rng, -1, 6), uniform(rng, -3, 3)}, 0, 1.0 / 200});
  }
  SemanticScan scan;
  for (int i = 0; i < 24; ++i) {
    scan.observations.push_back({SemanticClass::trunk, uniform(rng, 0.3, 5), uniform(rng, -3, 3)});
  }
  auto a = base, b = base;
  const GpsFix fix{{6, 2.5}, 1.5};
  // The blend weight depends on the semantic count, which classless mode
  // defines over all observations; all observations here carry a class.
  update(a, scan, fix, map, sem);
  update(b, scan, fix, map, cl);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i].weight, b[i].weight, 1e-12);
}

TEST(Ess, Examples) {
  EXPECT_NEAR(effective_sample_size(std::vector<double>(100, 0.01)), 100.0, 1e-9);
  std::vector<double> one(50, 0.0);
  one[7] = 1.0;
  EXPECT_DOUBLE_EQ(effective_sample_size(one), 1.0);
  EXPECT_DOUBLE_EQ(effective_sample_size(std::vector<double>{0.5, 0.5, 0.0, 0.0}), 2.0);
}

TEST(AdaptCount, Examples) {
  const FilterConfig c;
  EXPECT_EQ(adapt_count(400, 400, c), 80);
  EXPECT_EQ(adapt_count(0.0, 400, c), 500);
  EXPECT_EQ(adapt_count(200, 400, c), 290);
  for (double ess = 0.0; ess <= 300; ess += 0.5) {
    const int n = adapt_count(ess, 300, c);
    EXPECT_GE(n, c.n_min);
    EXPECT_LE(n, c.n_max);
  }
}

TEST(Resample, UniformWeightsDoNotTrigger) {
  Rng rng(1);
  auto ps = with_weights(std::vector<double>(100, 0.01));
  FilterConfig c;
  EXPECT_FALSE(resample(ps, c, rng));
  EXPECT_EQ(ps.size(), 100u);
}

TEST(Resample, DominantParticleConcentrates) {
  Rng rng(1);
  std::vector<double> w(100, 0.001);
  w[3] = 1.0 - 99 * 0.001;
  auto ps = with_weights(w);
  FilterConfig c;
  ASSERT_TRUE(resample(ps, c, rng));
  EXPECT_GE(ps.size(), 80u);
  EXPECT_LE(ps.size(), 500u);
  std::size_t copies = 0;
  for (const auto& p : ps) {
    if (p.pose.x == 3.0) ++copies;
    EXPECT_DOUBLE_EQ(p.weight, 1.0 / static_cast<double>(ps.size()));
  }
  EXPECT_GT(static_cast<double>(copies), 0.85 * static_cast<double>(ps.size()));
}

TEST(Resample, ExpectedCopiesProportionalToWeight) {
  const std::vector<double> w{0.6, 0.15, 0.1, 0.1, 0.05};
  const auto ps = with_weights(w);
  constexpr int kTrials = 1000;
  constexpr int kCount = 40;
  std::vector<double> mean(w.size(), 0.0);
  Rng rng(12);
  for (int t = 0; t < kTrials; ++t) {
    for (const auto& p : systematic_resample(ps, kCount, rng)) mean[static_cast<std::size_t>(p.pose.x)] += 1;
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    mean[i] /= kTrials;
    const double sigma = std::sqrt(kCount * w[i] * (1 - w[i]) / kTrials);
    EXPECT_NEAR(mean[i], kCount * w[i], 3 * sigma) << "particle " << i;
  }
}

TEST(Resample, Deterministic) {
  std::vector<double> w(50);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(i + 1) / 1275.0;
  const auto ps = with_weights(w);
  Rng a(5), b(5);
  const auto ra = systematic_resample(ps, 60, a);
  const auto rb = systematic_resample(ps, 60, b);
  for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_EQ(ra[i].pose, rb[i].pose);
}

TEST(Estimate, IdenticalParticles) {
  std::vector<Particle> ps(10, Particle{{1.5, -2.0, 0.7}, 0, 0.1});
  const auto e = estimate(ps);
  EXPECT_NEAR(e.pose.x, 1.5, 1e-12);
  EXPECT_NEAR(e.pose.y, -2.0, 1e-12);
  EXPECT_NEAR(e.pose.theta, 0.7, 1e-12);
  for (const double v : e.position_covariance) EXPECT_NEAR(v, 0.0, 1e-24);
  EXPECT_NEAR(e.ess, 10.0, 1e-9);
}

TEST(Estimate, WeightedMeanAndCircularHeading) {
  std::vector<Particle> ps{{{0, 0, std::numbers::pi / 2}, 0, 0.75}, {{4, 0, -std::numbers::pi / 2}, 0, 0.25}};
  const auto e = estimate(ps);
  EXPECT_NEAR(e.pose.x, 1.0, 1e-12);
  EXPECT_NEAR(e.pose.y, 0.0, 1e-12);
  EXPECT_NEAR(e.pose.theta, std::numbers::pi / 2, 1e-12);
  EXPECT_NEAR(e.position_covariance[0], 0.75 * 1 + 0.25 * 9, 1e-12);

  std::vector<Particle> wrap{{{0, 0, 3.1}, 0, 0.5}, {{0, 0, -3.1}, 0, 0.5}};
  EXPECT_NEAR(std::abs(estimate(wrap).pose.theta), std::numbers::pi, 1e-12);

  std::vector<Particle> cancel{{{0, 0, std::numbers::pi / 2}, 0, 0.5}, {{0, 0, -std::numbers::pi / 2}, 0, 0.5}};
  EXPECT_NEAR(estimate(cancel).pose.theta, 0.0, 1e-12);
}

TEST(Estimate, CovarianceSymmetricPsd) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<Particle> ps;
    for (int i = 0; i < 30; ++i) ps.push_back({{uniform(rng, -5, 5), uniform(rng, -5, 5), 0}, 0, uniform(rng, 0, 1)});
    const auto e = estimate(ps);
    const auto& c = e.position_covariance;
    EXPECT_EQ(c[1], c[2]);
    EXPECT_GE(c[0], 0.0);
    EXPECT_GE(c[3], 0.0);
    EXPECT_GE(c[0] * c[3] - c[1] * c[2], -1e-12);
  }
}

TEST(Step, NoiselessClosedLoopTracksGroundTruth) {
  const VineyardWorld w = two_rows();
  const WallMap map = build_wall_map(w.survey());
  const Trajectory gt = plan_serpentine(w, TrajectorySpec{});
  FilterConfig c = known_pose_config(gt.samples.front().pose, 50);
  c.use_gps = false;
  Rng rng(1);
  FilterState state{initialize(c, w.bounds, std::nullopt, rng), {}, {}};
  Rng sense(2);
  ScanSpec scan_spec;
  scan_spec.noise_sigma = 0.0;
  for (std::size_t k = 1; k < gt.size(); ++k) {
    const auto delta = odometry_between(gt.samples[k - 1].pose, gt.samples[k].pose);
    const RangeScan rs = sample_range_scan(map, gt.samples[k].pose, scan_spec, sense);
    const SemanticScan scan = fuse_semantic_scan(rs, {}, 0.5);
    const auto est = step(state, gt.samples[k].t, delta, scan, std::nullopt, map, c, rng);
    ASSERT_LE(distance(est.pose.position(), gt.samples[k].pose.position()), 1e-6) << "step " << k;
  }
  EXPECT_EQ(state.estimates.size(), gt.size() - 1);
  EXPECT_EQ(state.diagnostics.size(), gt.size() - 1);
}

TEST(Step, GpsOnlyUpdatesPullTowardFix) {
  const VineyardWorld w = two_rows();
  const WallMap map = build_wall_map(w.survey());
  FilterConfig c;
  c.init = InitMode::uniform;
  c.motion_noise = {0, 0, 0, 0, 0.01, 0.05};
  Rng rng(6);
  FilterState state{initialize(c, w.bounds, std::nullopt, rng), {}, {}};
  const GpsFix fix{{6.0, 1.0}, 1.0};
  PoseEstimate est;
  for (int k = 0; k < 30; ++k) est = step(state, k, {}, SemanticScan{}, fix, map, c, rng);
  EXPECT_LT(distance(est.pose.position(), fix.position), fix.sigma);
  EXPECT_NEAR(state.diagnostics.back().alpha, 0.95, 1e-12);
}

TEST(Step, ParticleCountStaysWithinLimits) {
  const VineyardWorld w = generate_vineyard(WorldSpec{});
  const WallMap map = build_wall_map(w.survey());
  FilterConfig c;
  c.motion_noise = {0.05, 0.01, 0.05, 0.01, 0.002, 0.005};
  const Trajectory gt = plan_serpentine(w, TrajectorySpec{});
  Rng rng(3);
  FilterState state{initialize(c, w.bounds, GpsFix{gt.samples[0].pose.position(), 1.7}, rng), {}, {}};
  for (std::size_t k = 1; k < 200; ++k) {
    SemanticScan scan;
    for (int i = 0; i < 8; ++i) {
      const double b = -3 + 0.75 * i;
      const auto hit = map.raycast(gt.samples[k].pose.position(), gt.samples[k].pose.theta + b, 5);
      if (hit) scan.observations.push_back({hit->cls, hit->range, b});
    }
    step(state, gt.samples[k].t, odometry_between(gt.samples[k - 1].pose, gt.samples[k].pose), scan,
         GpsFix{gt.samples[k].pose.position(), 1.7}, map, c, rng);
    ASSERT_GE(state.particles.size(), 80u);
    ASSERT_LE(state.particles.size(), 500u);
    const auto& d = state.diagnostics.back();
    EXPECT_GT(d.ess, 0.0);
    EXPECT_LE(d.ess, 500.0 + 1e-9);
  }
}

TEST(RunFilter, ReplayIsBitIdentical) {
  const VineyardWorld w = two_rows();
  const WallMap map = build_wall_map(w.survey());
  const Trajectory gt = plan_serpentine(w, TrajectorySpec{});
  SensorSpec spec;
  spec.motion_noise = {0.05, 0.01, 0.05, 0.01, 0.002, 0.005};
  const SensorLog log = simulate_sensors(w, gt, spec, 8);
  FilterConfig c;
  c.motion_noise = spec.motion_noise;
  const auto a = run_filter(log, map, w.bounds, c, ReplayOptions{});
  const auto b = run_filter(log, map, w.bounds, c, ReplayOptions{});
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.estimate.size(), log.records.size());
}

TEST(FilterConfig, Validation) {
  FilterConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_min = 600;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = FilterConfig{};
  c.resample_threshold = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

}  // namespace
}  // namespace semloc
