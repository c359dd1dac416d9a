#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace semloc {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend Vec2 operator*(double s, Vec2 a) { return {a.x * s, a.y * s}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Semantic label of an observation or map feature. Map features are only
/// ever pole or trunk; background exists on the observation side.
enum class SemanticClass : std::uint8_t { pole, trunk, background };

std::string_view to_string(SemanticClass cls);
/// Throws ParseError on an unknown label.
SemanticClass class_from_string(std::string_view text);

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * std::numbers::pi);
  if (wrapped <= -std::numbers::pi) wrapped += 2.0 * std::numbers::pi;
  return wrapped;
}

/// Planar pose in the world frame; theta is counter-clockwise from +x.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

struct TimedPose {
  double t = 0.0;
  Pose2D pose;
  friend bool operator==(const TimedPose&, const TimedPose&) = default;
};

/// Time-ordered pose sequence, used for ground truth and estimates alike.
struct Trajectory {
  std::vector<TimedPose> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  /// Throws InvalidArgument unless timestamps strictly increase.
  void validate() const;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

}  // namespace semloc
