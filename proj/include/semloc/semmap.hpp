#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semloc/types.hpp"

namespace semloc {

/// A georeferenced stable landmark. `cls` is pole or trunk, never background.
struct SurveyLandmark {
  Vec2 position;
  SemanticClass cls = SemanticClass::trunk;
  friend bool operator==(const SurveyLandmark&, const SurveyLandmark&) = default;
};

/// One line of a world/map file: a landmark tagged with its row.
struct SurveyEntry {
  int row_id = 0;
  int along_index = 0;
  SurveyLandmark landmark;
  friend bool operator==(const SurveyEntry&, const SurveyEntry&) = default;
};

struct WallSegment {
  Vec2 a;
  Vec2 b;
  SemanticClass cls = SemanticClass::trunk;
  int row_id = 0;
  friend bool operator==(const WallSegment&, const WallSegment&) = default;
};

struct RaycastHit {
  double range = 0.0;
  SemanticClass cls = SemanticClass::trunk;
  friend bool operator==(const RaycastHit&, const RaycastHit&) = default;
};

/// Hit(range, class) or Miss (nullopt).
using RaycastResult = std::optional<RaycastHit>;

/// Hits whose ranges differ by less than this are treated as the same
/// intersection (shared segment endpoints); pole wins such ties.
inline constexpr double kRaycastTieTolerance = 1e-9;

/// Class of a wall joining two landmarks: trunk only between two trunks.
SemanticClass segment_class(SemanticClass a, SemanticClass b);

/// Class-labelled semantic walls plus a uniform-grid index for ray casting.
/// Immutable once built; all queries are const and thread-safe.
class WallMap {
 public:
  WallMap() = default;

  const std::vector<WallSegment>& segments() const { return segments_; }
  /// Survey entries, grouped by row and ordered along each row.
  const std::vector<SurveyEntry>& landmarks() const { return landmarks_; }

  RaycastResult raycast(Vec2 origin, double bearing, double max_range) const;
  std::vector<RaycastResult> raycast_batch(Vec2 origin, std::span<const double> bearings,
                                           double max_range) const;
  void raycast_batch(Vec2 origin, std::span<const double> bearings, double max_range,
                     std::span<RaycastResult> out) const;

  // Grid introspection, mainly for tests.
  double cell_size() const { return cell_size_; }
  int grid_width() const { return nx_; }
  int grid_height() const { return ny_; }
  /// Segment indices stored in a cell; empty span for out-of-range cells.
  std::span<const std::uint32_t> cell(int ix, int iy) const;

  friend WallMap build_wall_map(std::span<const SurveyEntry> survey);

 private:
  void build_index();

  std::vector<WallSegment> segments_;
  std::vector<SurveyEntry> landmarks_;

  Vec2 grid_min_;
  double cell_size_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::uint32_t> cell_start_;  // CSR offsets, size nx*ny+1
  std::vector<std::uint32_t> cell_items_;
};

/// Groups the survey by row, orders each row along its principal axis and
/// joins consecutive landmarks into class-labelled wall segments.
/// Throws RowTooSmall for rows with fewer than two landmarks and
/// InvalidArgument for coincident landmarks within a row.
WallMap build_wall_map(std::span<const SurveyEntry> survey);

}  // namespace semloc
