#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "semloc/types.hpp"

namespace semloc {

// Robot frame: x forward, y left. BEV frame: x_bev left, z_bev forward.

struct BevLandmark {
  double x_bev = 0.0;
  double z_bev = 0.0;
  SemanticClass cls = SemanticClass::trunk;
  friend bool operator==(const BevLandmark&, const BevLandmark&) = default;
};

struct Observation {
  SemanticClass cls = SemanticClass::background;
  double range = 0.0;
  double bearing = 0.0;  // robot-relative, (-pi, pi]
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct SemanticScan {
  std::vector<Observation> observations;
  std::size_t size() const { return observations.size(); }
  bool empty() const { return observations.empty(); }
};

/// Planar range scan. Beam i points at angle_min + i * angle_increment
/// (robot frame); a range equal to max_range is the no-return sentinel.
struct RangeScan {
  double angle_min = 0.0;
  double angle_increment = 0.0;
  double max_range = 0.0;
  std::vector<double> ranges;

  double beam_angle(std::size_t i) const {
    return normalize_angle(angle_min + static_cast<double>(i) * angle_increment);
  }
  bool is_sentinel(std::size_t i) const { return !(ranges[i] < max_range); }
  friend bool operator==(const RangeScan&, const RangeScan&) = default;
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
};

/// Pixel coordinate; u indexes image rows, v indexes columns.
struct Pixel {
  int u = 0;
  int v = 0;
  friend bool operator==(Pixel, Pixel) = default;
};

/// Row-major depth image in metres; 0 marks an invalid reading.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float at(Pixel p) const {
    return data[static_cast<std::size_t>(p.u) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(p.v)];
  }
};

struct DepthMaskPair {
  const DepthImage* depth = nullptr;
  std::vector<Pixel> mask;
  SemanticClass cls = SemanticClass::trunk;
};

struct CameraPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Minimum positive depth over the mask. Throws NoValidDepth when no masked
/// pixel carries a positive depth, InvalidArgument for an empty mask or a
/// pixel outside the image.
double landmark_range(const DepthMaskPair& pair);

/// Pixel of the minimum positive depth (first in mask order on ties).
Pixel landmark_range_pixel(const DepthMaskPair& pair);

/// Pinhole back-projection with v paired to (cx, fx) and u to (cy, fy).
CameraPoint pixel_to_camera(double u, double v, double depth, const CameraIntrinsics& k);
inline CameraPoint pixel_to_camera(Pixel p, double depth, const CameraIntrinsics& k) {
  return pixel_to_camera(p.u, p.v, depth, k);
}

/// Exact inverse of pixel_to_camera; returns (u, v) as real coordinates.
std::pair<double, double> camera_to_pixel(const CameraPoint& point, const CameraIntrinsics& k);

/// (x_bev, z_bev) = (-x, z); height is discarded.
BevLandmark camera_to_bev(const CameraPoint& point, SemanticClass cls);

/// Full camera path for one detection: minimum-depth range, back-projection
/// of the pixel holding it, then BEV conversion.
BevLandmark project_detection(const DepthMaskPair& pair, const CameraIntrinsics& k);

/// Labels each non-sentinel scan point with the class of the nearest
/// landmark disk (radius r_sem) containing it, pole winning exact ties;
/// points outside all disks become background.
SemanticScan fuse_semantic_scan(const RangeScan& scan, std::span<const BevLandmark> landmarks,
                                double r_sem);

/// Camera-only observations: one per landmark, no background.
SemanticScan detections_to_scan(std::span<const BevLandmark> landmarks);

/// Drops observations beyond max_range.
SemanticScan clip_to_range(SemanticScan scan, double max_range);

// Test fixtures: a flat float32 little-endian depth file (row-major) and a
// text mask file with one `u,v` pair per line.
DepthImage read_depth_f32le(const std::filesystem::path& path, int width, int height);
void write_depth_f32le(const std::filesystem::path& path, const DepthImage& image);
std::vector<Pixel> read_mask_file(const std::filesystem::path& path);
void write_mask_file(const std::filesystem::path& path, std::span<const Pixel> mask);

}  // namespace semloc
