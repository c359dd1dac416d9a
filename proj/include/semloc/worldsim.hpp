#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semloc/projection.hpp"
#include "semloc/random.hpp"
#include "semloc/semmap.hpp"
#include "semloc/types.hpp"

namespace semloc {

struct LandmarkRow {
  int row_id = 0;
  std::vector<SurveyLandmark> landmarks;  // ordered along the row
  friend bool operator==(const LandmarkRow&, const LandmarkRow&) = default;
};

struct Bounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool contains(Vec2 p) const { return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y; }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct VineyardWorld {
  std::vector<LandmarkRow> rows;
  double row_spacing = 0.0;
  double headland_depth = 0.0;
  Bounds bounds;

  /// Throws InvalidArgument if any world invariant is broken.
  void validate() const;
  /// Flattened survey, row by row, for map building and file output.
  std::vector<SurveyEntry> survey() const;
  std::size_t landmark_count() const;
  friend bool operator==(const VineyardWorld&, const VineyardWorld&) = default;
};

/// Rows run along +x and are stacked along +y starting at the origin.
/// Landmark i of a row is a pole when i % pole_every == pole_offset.
struct WorldSpec {
  int rows = 10;
  double row_length = 40.0;
  double pitch = 2.0;
  double row_spacing = 2.5;
  double headland_depth = 4.0;
  int pole_every = 5;
  int pole_offset = 0;
  /// Half-width of the uniform placement error applied to both coordinates.
  double jitter = 0.0;
  std::uint64_t seed = 0;
};

/// Throws InvalidArgument on non-positive dimensions or fewer than 2 rows.
VineyardWorld generate_vineyard(const WorldSpec& spec);

/// Rebuilds a world from survey entries (e.g. a loaded world file). Row
/// spacing is the median gap between adjacent row centre lines.
VineyardWorld world_from_survey(std::span<const SurveyEntry> survey, double headland_depth);

struct TrajectorySpec {
  double speed = 0.5;           // m/s
  double sample_period = 0.1;   // s
  double exit_margin = 1.0;     // straight run past the row ends before turning
  bool outer_passes = false;    // also drive outside the first and last rows
  bool reversed = false;        // traverse the same path end to start
};

/// Lateral centre lines of the driven corridors in visiting order (before
/// any reversal).
std::vector<double> corridor_centres(const VineyardWorld& world, bool outer_passes);

/// Serpentine through every corridor with semicircular headland turns of
/// radius row_spacing / 2, sampled at a constant period.
Trajectory plan_serpentine(const VineyardWorld& world, const TrajectorySpec& spec);

struct OdometryDelta {
  double d_rotation1 = 0.0;
  double d_translation = 0.0;
  double d_rotation2 = 0.0;
  friend bool operator==(const OdometryDelta&, const OdometryDelta&) = default;
};

/// Standard deviations affine in motion magnitude:
///   sigma_rot   = rot_base + rot_per_rot * |rot| + rot_per_trans * |trans|
///   sigma_trans = trans_base + trans_per_trans * |trans| + trans_per_rot * (|rot1| + |rot2|)
struct MotionNoise {
  double rot_per_rot = 0.0;
  double rot_per_trans = 0.0;
  double trans_per_trans = 0.0;
  double trans_per_rot = 0.0;
  double rot_base = 0.0;
  double trans_base = 0.0;

  void validate() const;
};

/// Exact rotate-translate-rotate decomposition of prev -> curr.
OdometryDelta odometry_between(const Pose2D& prev, const Pose2D& curr);
OdometryDelta sample_odometry(const Pose2D& prev, const Pose2D& curr, const MotionNoise& noise,
                              Rng& rng);
/// Perturbs a delta with noise scaled by the delta's own magnitudes.
OdometryDelta perturb_odometry(const OdometryDelta& delta, const MotionNoise& noise, Rng& rng);
Pose2D apply_odometry(const Pose2D& pose, const OdometryDelta& delta);

struct GpsFix {
  Vec2 position;
  double sigma = 0.0;  // isotropic standard deviation of the generator
  friend bool operator==(const GpsFix&, const GpsFix&) = default;
};

/// sigma = cep / sqrt(2 ln 2): the CEP is the median of a Rayleigh(sigma).
double cep_to_sigma(double cep);
GpsFix sample_gps(const Pose2D& pose, double cep, Rng& rng);

struct DetectorModel {
  double recall_pole = 0.573;
  double recall_trunk = 0.691;
  double range_limit = 5.0;
  double field_of_view = 1.5184364492350666;  // 87 degrees
  double range_noise_sigma = 0.05;
  double false_positive_rate = 0.2;  // Poisson mean per frame

  double recall(SemanticClass cls) const;
  void validate() const;
};

/// BEV position of a world point as seen from `pose`.
BevLandmark world_to_bev(const Pose2D& pose, Vec2 point, SemanticClass cls);

/// True landmarks that are in range, inside the field of view and not
/// occluded by a strictly nearer wall segment, as (landmark index) list.
std::vector<std::size_t> visible_landmarks(const WallMap& walls, const Pose2D& pose,
                                           const DetectorModel& model);

std::vector<BevLandmark> sample_detections(const WallMap& walls, const Pose2D& pose,
                                           const DetectorModel& model, Rng& rng);

struct ScanSpec {
  int beams = 72;
  double angle_min = -3.141592653589793;
  double angle_span = 6.283185307179586;
  double max_range = 5.0;
  double noise_sigma = 0.02;

  double angle_increment() const;
  void validate() const;
};

/// First-hit ranges against the world's walls with Gaussian noise; beams
/// without a return (or whose noisy range reaches max_range) report the
/// max_range sentinel.
RangeScan sample_range_scan(const WallMap& walls, const Pose2D& pose, const ScanSpec& spec,
                            Rng& rng);

struct SensorSpec {
  DetectorModel detector;
  ScanSpec scan;
  MotionNoise motion_noise;
  double gps_cep = 2.0;
  int gps_every = 1;  // a fix every N records starting at record 0; 0 disables GPS
};

struct SensorRecord {
  double t = 0.0;
  OdometryDelta odometry;  // motion since the previous record (zero for record 0)
  std::optional<GpsFix> gps;
  std::vector<BevLandmark> detections;
  RangeScan scan;
  friend bool operator==(const SensorRecord&, const SensorRecord&) = default;
};

struct SensorLog {
  std::uint64_t seed = 0;
  std::string key;  // cache key of the inputs that produced the log
  Pose2D start_pose;
  std::vector<SensorRecord> records;
  friend bool operator==(const SensorLog&, const SensorLog&) = default;
};

/// Simulates every sensor stream along a ground-truth trajectory.
/// Deterministic in (world, trajectory, spec, seed).
SensorLog simulate_sensors(const VineyardWorld& world, const Trajectory& ground_truth,
                           const SensorSpec& spec, std::uint64_t seed);

}  // namespace semloc
