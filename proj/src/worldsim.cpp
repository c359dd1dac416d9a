#include "semloc/worldsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include "semloc/errors.hpp"

namespace semloc {
namespace {

// Independent random streams, so e.g. a change of beam count leaves the GPS
// sequence of a seed untouched.
enum Stream : std::uint64_t {
  kWorldStream = 1,
  kOdometryStream = 2,
  kGpsStream = 3,
  kDetectionStream = 4,
  kScanStream = 5,
};

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

double row_lateral(const LandmarkRow& row) {
  double sum = 0.0;
  for (const auto& lm : row.landmarks) sum += lm.position.y;
  return sum / static_cast<double>(row.landmarks.size());
}

struct PathPiece {
  Pose2D start;
  double length = 0.0;
  double curvature = 0.0;

  Pose2D at(double s) const {
    if (curvature == 0.0) {
      return {start.x + s * std::cos(start.theta), start.y + s * std::sin(start.theta),
              normalize_angle(start.theta)};
    }
    const double th = start.theta + curvature * s;
    return {start.x + (std::sin(th) - std::sin(start.theta)) / curvature,
            start.y - (std::cos(th) - std::cos(start.theta)) / curvature, normalize_angle(th)};
  }
};

}  // namespace

void VineyardWorld::validate() const {
  require(rows.size() >= 2, "world needs at least 2 rows");
  require(row_spacing > 0.0, "row spacing must be positive");
  require(headland_depth >= 0.0, "headland depth must be non-negative");
  std::vector<int> ids;
  for (const auto& row : rows) {
    ids.push_back(row.row_id);
    require(row.landmarks.size() >= 2, "row " + std::to_string(row.row_id) + " has < 2 landmarks");
    for (std::size_t i = 0; i < row.landmarks.size(); ++i) {
      const auto& lm = row.landmarks[i];
      require(lm.cls != SemanticClass::background, "survey landmark with background class");
      require(bounds.contains(lm.position), "landmark outside world bounds");
      if (i > 0) {
        require(lm.position.x > row.landmarks[i - 1].position.x,
                "row " + std::to_string(row.row_id) + " is not strictly ordered along x");
      }
    }
  }
  std::sort(ids.begin(), ids.end());
  require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), "duplicate row id");
}

std::vector<SurveyEntry> VineyardWorld::survey() const {
  std::vector<SurveyEntry> out;
  out.reserve(landmark_count());
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.landmarks.size(); ++i) {
      out.push_back({row.row_id, static_cast<int>(i), row.landmarks[i]});
    }
  }
  return out;
}

std::size_t VineyardWorld::landmark_count() const {
  std::size_t n = 0;
  for (const auto& row : rows) n += row.landmarks.size();
  return n;
}

VineyardWorld generate_vineyard(const WorldSpec& spec) {
  require(spec.rows >= 2, "world spec needs at least 2 rows");
  require(spec.row_length > 0.0, "row length must be positive");
  require(spec.pitch > 0.0, "landmark pitch must be positive");
  require(spec.row_spacing > 0.0, "row spacing must be positive");
  require(spec.headland_depth >= 0.0, "headland depth must be non-negative");
  require(spec.pole_every >= 1, "pole_every must be >= 1");
  require(spec.pole_offset >= 0 && spec.pole_offset < spec.pole_every,
          "pole_offset must lie in [0, pole_every)");
  require(spec.jitter >= 0.0 && spec.jitter < spec.pitch / 4.0,
          "jitter must lie in [0, pitch/4)");

  const int per_row = static_cast<int>(std::floor(spec.row_length / spec.pitch + 1e-9)) + 1;
  require(per_row >= 2, "row length must fit at least 2 landmarks");

  Rng rng(derive_seed(spec.seed, kWorldStream));
  VineyardWorld world;
  world.row_spacing = spec.row_spacing;
  world.headland_depth = spec.headland_depth;
  for (int r = 0; r < spec.rows; ++r) {
    LandmarkRow row{r, {}};
    for (int i = 0; i < per_row; ++i) {
      double dx = 0.0, dy = 0.0;
      if (spec.jitter > 0.0) {
        dx = uniform(rng, -spec.jitter, spec.jitter);
        dy = uniform(rng, -spec.jitter, spec.jitter);
      }
      const auto cls = (i % spec.pole_every == spec.pole_offset) ? SemanticClass::pole
                                                                 : SemanticClass::trunk;
      row.landmarks.push_back({{i * spec.pitch + dx, r * spec.row_spacing + dy}, cls});
    }
    world.rows.push_back(std::move(row));
  }

  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  double lo_y = lo_x, hi_y = -lo_x;
  for (const auto& row : world.rows) {
    for (const auto& lm : row.landmarks) {
      lo_x = std::min(lo_x, lm.position.x);
      hi_x = std::max(hi_x, lm.position.x);
      lo_y = std::min(lo_y, lm.position.y);
      hi_y = std::max(hi_y, lm.position.y);
    }
  }
  world.bounds = {lo_x - spec.headland_depth, lo_y - spec.row_spacing, hi_x + spec.headland_depth,
                  hi_y + spec.row_spacing};
  world.validate();
  return world;
}

VineyardWorld world_from_survey(std::span<const SurveyEntry> survey, double headland_depth) {
  std::map<int, std::vector<SurveyEntry>> grouped;
  for (const auto& e : survey) grouped[e.row_id].push_back(e);
  VineyardWorld world;
  world.headland_depth = headland_depth;
  for (auto& [id, entries] : grouped) {
    std::sort(entries.begin(), entries.end(), [](const SurveyEntry& a, const SurveyEntry& b) {
      return a.landmark.position.x < b.landmark.position.x;
    });
    LandmarkRow row{id, {}};
    for (const auto& e : entries) row.landmarks.push_back(e.landmark);
    world.rows.push_back(std::move(row));
  }
  require(world.rows.size() >= 2, "survey needs at least 2 rows");
  for (const auto& row : world.rows) {
    require(row.landmarks.size() >= 2, "row " + std::to_string(row.row_id) + " has < 2 landmarks");
  }
  std::vector<double> lateral;
  for (const auto& row : world.rows) lateral.push_back(row_lateral(row));
  std::sort(lateral.begin(), lateral.end());
  std::vector<double> gaps;
  for (std::size_t i = 1; i < lateral.size(); ++i) gaps.push_back(lateral[i] - lateral[i - 1]);
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2),
                   gaps.end());
  world.row_spacing = gaps[gaps.size() / 2];

  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  double lo_y = lo_x, hi_y = -lo_x;
  for (const auto& row : world.rows) {
    for (const auto& lm : row.landmarks) {
      lo_x = std::min(lo_x, lm.position.x);
      hi_x = std::max(hi_x, lm.position.x);
      lo_y = std::min(lo_y, lm.position.y);
      hi_y = std::max(hi_y, lm.position.y);
    }
  }
  world.bounds = {lo_x - headland_depth, lo_y - world.row_spacing, hi_x + headland_depth,
                  hi_y + world.row_spacing};
  world.validate();
  return world;
}

std::vector<double> corridor_centres(const VineyardWorld& world, bool outer_passes) {
  std::vector<double> lateral;
  for (const auto& row : world.rows) lateral.push_back(row_lateral(row));
  std::sort(lateral.begin(), lateral.end());
  std::vector<double> centres;
  if (outer_passes) centres.push_back(lateral.front() - world.row_spacing / 2.0);
  for (std::size_t i = 0; i + 1 < lateral.size(); ++i) {
    centres.push_back(0.5 * (lateral[i] + lateral[i + 1]));
  }
  if (outer_passes) centres.push_back(lateral.back() + world.row_spacing / 2.0);
  return centres;
}

Trajectory plan_serpentine(const VineyardWorld& world, const TrajectorySpec& spec) {
  world.validate();
  require(spec.speed > 0.0, "speed must be positive");
  require(spec.sample_period > 0.0, "sample period must be positive");
  require(spec.exit_margin >= 0.0, "exit margin must be non-negative");

  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  for (const auto& row : world.rows) {
    lo_x = std::min(lo_x, row.landmarks.front().position.x);
    hi_x = std::max(hi_x, row.landmarks.back().position.x);
  }
  const double west = lo_x - spec.exit_margin;
  const double east = hi_x + spec.exit_margin;
  const auto centres = corridor_centres(world, spec.outer_passes);

  std::vector<PathPiece> pieces;
  for (std::size_t k = 0; k < centres.size(); ++k) {
    const bool eastbound = k % 2 == 0;
    const Pose2D start{eastbound ? west : east, centres[k], eastbound ? 0.0 : std::numbers::pi};
    pieces.push_back({start, east - west, 0.0});
    if (k + 1 < centres.size()) {
      const double dy = centres[k + 1] - centres[k];
      const double radius = std::abs(dy) / 2.0;
      const double heading_x = eastbound ? 1.0 : -1.0;
      const double turn = heading_x * dy > 0.0 ? 1.0 : -1.0;  // sign of cross(heading, dy)
      const Pose2D arc_start{eastbound ? east : west, centres[k], start.theta};
      pieces.push_back({arc_start, std::numbers::pi * radius, turn / radius});
    }
  }

  double total = 0.0;
  for (const auto& p : pieces) total += p.length;
  const double ds = spec.speed * spec.sample_period;
  const auto n = static_cast<std::size_t>(std::floor(total / ds + 1e-9)) + 1;

  auto pose_at = [&](double s) {
    for (const auto& p : pieces) {
      if (s <= p.length) return p.at(s);
      s -= p.length;
    }
    return pieces.back().at(pieces.back().length);
  };

  Trajectory traj;
  traj.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) * ds;
    Pose2D pose;
    if (spec.reversed) {
      pose = pose_at(std::max(0.0, total - s));
      pose.theta = normalize_angle(pose.theta + std::numbers::pi);
    } else {
      pose = pose_at(s);
    }
    traj.samples.push_back({static_cast<double>(k) * spec.sample_period, pose});
  }
  return traj;
}

void MotionNoise::validate() const {
  require(rot_per_rot >= 0.0 && rot_per_trans >= 0.0 && trans_per_trans >= 0.0 &&
              trans_per_rot >= 0.0 && rot_base >= 0.0 && trans_base >= 0.0,
          "motion noise parameters must be non-negative");
}

OdometryDelta odometry_between(const Pose2D& prev, const Pose2D& curr) {
  const double dx = curr.x - prev.x;
  const double dy = curr.y - prev.y;
  const double trans = std::hypot(dx, dy);
  const double rot1 = trans < 1e-12 ? 0.0 : normalize_angle(std::atan2(dy, dx) - prev.theta);
  const double rot2 = normalize_angle(curr.theta - prev.theta - rot1);
  return {rot1, trans, rot2};
}

OdometryDelta perturb_odometry(const OdometryDelta& delta, const MotionNoise& noise, Rng& rng) {
  const double r1 = std::abs(delta.d_rotation1);
  const double r2 = std::abs(delta.d_rotation2);
  const double tr = std::abs(delta.d_translation);
  const double s_rot1 = noise.rot_base + noise.rot_per_rot * r1 + noise.rot_per_trans * tr;
  const double s_trans = noise.trans_base + noise.trans_per_trans * tr + noise.trans_per_rot * (r1 + r2);
  const double s_rot2 = noise.rot_base + noise.rot_per_rot * r2 + noise.rot_per_trans * tr;
  OdometryDelta out = delta;
  out.d_rotation1 = normalize_angle(delta.d_rotation1 + gaussian(rng, s_rot1));
  out.d_translation = delta.d_translation + gaussian(rng, s_trans);
  out.d_rotation2 = normalize_angle(delta.d_rotation2 + gaussian(rng, s_rot2));
  return out;
}

OdometryDelta sample_odometry(const Pose2D& prev, const Pose2D& curr, const MotionNoise& noise,
                              Rng& rng) {
  noise.validate();
  return perturb_odometry(odometry_between(prev, curr), noise, rng);
}

Pose2D apply_odometry(const Pose2D& pose, const OdometryDelta& delta) {
  const double heading = pose.theta + delta.d_rotation1;
  return {pose.x + delta.d_translation * std::cos(heading),
          pose.y + delta.d_translation * std::sin(heading),
          normalize_angle(heading + delta.d_rotation2)};
}

double cep_to_sigma(double cep) {
  require(cep > 0.0, "CEP must be positive");
  return cep / std::sqrt(2.0 * std::numbers::ln2);
}

GpsFix sample_gps(const Pose2D& pose, double cep, Rng& rng) {
  const double sigma = cep_to_sigma(cep);
  const double ex = gaussian(rng, sigma);
  const double ey = gaussian(rng, sigma);
  return {{pose.x + ex, pose.y + ey}, sigma};
}

double DetectorModel::recall(SemanticClass cls) const {
  switch (cls) {
    case SemanticClass::pole:
      return recall_pole;
    case SemanticClass::trunk:
      return recall_trunk;
    case SemanticClass::background:
      return 0.0;
  }
  return 0.0;
}

void DetectorModel::validate() const {
  require(recall_pole >= 0.0 && recall_pole <= 1.0 && recall_trunk >= 0.0 && recall_trunk <= 1.0,
          "detector recall must lie in [0, 1]");
  require(range_limit > 0.0, "detector range limit must be positive");
  require(field_of_view > 0.0 && field_of_view <= 2.0 * std::numbers::pi,
          "detector field of view must lie in (0, 2pi]");
  require(range_noise_sigma >= 0.0, "detector range noise must be non-negative");
  require(false_positive_rate >= 0.0, "false-positive rate must be non-negative");
}

BevLandmark world_to_bev(const Pose2D& pose, Vec2 point, SemanticClass cls) {
  const Vec2 d = point - pose.position();
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const double forward = d.x * c + d.y * s;
  const double left = -d.x * s + d.y * c;
  return {left, forward, cls};
}

std::vector<std::size_t> visible_landmarks(const WallMap& walls, const Pose2D& pose,
                                           const DetectorModel& model) {
  std::vector<std::size_t> out;
  const auto& landmarks = walls.landmarks();
  const double half_fov = model.field_of_view / 2.0;
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    const auto& lm = landmarks[i].landmark;
    const double dist = distance(lm.position, pose.position());
    if (!(dist > 0.0) || dist > model.range_limit) continue;
    const BevLandmark bev = world_to_bev(pose, lm.position, lm.cls);
    if (!(bev.z_bev > 0.0)) continue;  // forward-facing camera
    const double bearing = std::atan2(bev.x_bev, bev.z_bev);
    if (std::abs(bearing) > half_fov) continue;
    const auto hit = walls.raycast(pose.position(), pose.theta + bearing, dist);
    if (hit && hit->range < dist - 1e-6) continue;  // occluded
    out.push_back(i);
  }
  return out;
}

std::vector<BevLandmark> sample_detections(const WallMap& walls, const Pose2D& pose,
                                           const DetectorModel& model, Rng& rng) {
  model.validate();
  std::vector<BevLandmark> out;
  const auto& landmarks = walls.landmarks();
  for (const std::size_t i : visible_landmarks(walls, pose, model)) {
    const auto& lm = landmarks[i].landmark;
    if (!std::bernoulli_distribution(model.recall(lm.cls))(rng)) continue;
    const BevLandmark truth = world_to_bev(pose, lm.position, lm.cls);
    const double range = std::hypot(truth.x_bev, truth.z_bev);
    const double noisy = range + gaussian(rng, model.range_noise_sigma);
    if (!(noisy > 0.0)) continue;
    const double scale = noisy / range;
    out.push_back({truth.x_bev * scale, truth.z_bev * scale, lm.cls});
  }
  if (model.false_positive_rate > 0.0) {
    const int n_false = std::poisson_distribution<int>(model.false_positive_rate)(rng);
    const double half_fov = std::min(model.field_of_view / 2.0, std::numbers::pi / 2.0);
    for (int k = 0; k < n_false; ++k) {
      const double r = model.range_limit * std::sqrt(uniform(rng, 0.0, 1.0));
      const double b = uniform(rng, -half_fov, half_fov);
      const auto cls = std::bernoulli_distribution(0.5)(rng) ? SemanticClass::pole
                                                             : SemanticClass::trunk;
      out.push_back({r * std::sin(b), r * std::cos(b), cls});
    }
  }
  return out;
}

double ScanSpec::angle_increment() const {
  if (angle_span >= 2.0 * std::numbers::pi - 1e-12 || beams == 1) {
    return angle_span / static_cast<double>(beams);
  }
  return angle_span / static_cast<double>(beams - 1);
}

void ScanSpec::validate() const {
  require(beams >= 1, "scan needs at least one beam");
  require(angle_span > 0.0 && angle_span <= 2.0 * std::numbers::pi + 1e-12,
          "scan span must lie in (0, 2pi]");
  require(max_range > 0.0, "scan max range must be positive");
  require(noise_sigma >= 0.0, "scan noise must be non-negative");
}

RangeScan sample_range_scan(const WallMap& walls, const Pose2D& pose, const ScanSpec& spec,
                            Rng& rng) {
  spec.validate();
  RangeScan scan;
  scan.angle_min = spec.angle_min;
  scan.angle_increment = spec.angle_increment();
  scan.max_range = spec.max_range;
  scan.ranges.resize(static_cast<std::size_t>(spec.beams));
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const auto hit = walls.raycast(pose.position(), pose.theta + scan.beam_angle(i), spec.max_range);
    double r = spec.max_range;
    if (hit) {
      r = hit->range + gaussian(rng, spec.noise_sigma);
      if (!(r < spec.max_range)) r = spec.max_range;
      r = std::max(r, 1e-3);
    }
    scan.ranges[i] = r;
  }
  return scan;
}

SensorLog simulate_sensors(const VineyardWorld& world, const Trajectory& ground_truth,
                           const SensorSpec& spec, std::uint64_t seed) {
  require(!ground_truth.empty(), "cannot simulate sensors along an empty trajectory");
  require(spec.gps_every >= 0, "gps_every must be >= 0");
  spec.detector.validate();
  spec.scan.validate();
  spec.motion_noise.validate();
  if (spec.gps_every > 0) cep_to_sigma(spec.gps_cep);

  const auto survey = world.survey();
  const WallMap walls = build_wall_map(survey);
  Rng odo_rng(derive_seed(seed, kOdometryStream));
  Rng gps_rng(derive_seed(seed, kGpsStream));
  Rng det_rng(derive_seed(seed, kDetectionStream));
  Rng scan_rng(derive_seed(seed, kScanStream));

  SensorLog log;
  log.seed = seed;
  log.start_pose = ground_truth.samples.front().pose;
  log.records.reserve(ground_truth.size());
  for (std::size_t k = 0; k < ground_truth.size(); ++k) {
    const auto& sample = ground_truth.samples[k];
    SensorRecord rec;
    rec.t = sample.t;
    if (k > 0) {
      rec.odometry = sample_odometry(ground_truth.samples[k - 1].pose, sample.pose,
                                     spec.motion_noise, odo_rng);
    }
    if (spec.gps_every > 0 && k % static_cast<std::size_t>(spec.gps_every) == 0) {
      rec.gps = sample_gps(sample.pose, spec.gps_cep, gps_rng);
    }
    rec.detections = sample_detections(walls, sample.pose, spec.detector, det_rng);
    rec.scan = sample_range_scan(walls, sample.pose, spec.scan, scan_rng);
    log.records.push_back(std::move(rec));
  }
  return log;
}

}  // namespace semloc
