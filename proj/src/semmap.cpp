#include "semloc/semmap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "semloc/errors.hpp"

namespace semloc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Slack on the segment parameter so a ray through a shared endpoint cannot
// slip between both segments through rounding.
constexpr double kParamSlack = 1e-12;
// Segments are registered in every cell their padded bounding box touches.
constexpr double kCellPad = 1e-6;
constexpr int kMaxCellsPerAxis = 2048;

double intersect(Vec2 origin, Vec2 dir, const WallSegment& seg, double max_range) {
  const Vec2 edge = seg.b - seg.a;
  const double denom = cross(dir, edge);
  if (std::abs(denom) <= 1e-15 * norm(edge)) return kInf;  // parallel or collinear
  const Vec2 w = seg.a - origin;
  const double t = cross(w, edge) / denom;
  const double u = cross(w, dir) / denom;
  if (u < -kParamSlack || u > 1.0 + kParamSlack) return kInf;
  if (!(t > 0.0) || t > max_range) return kInf;
  return t;
}

Vec2 principal_axis(const std::vector<SurveyEntry>& row) {
  Vec2 mean;
  for (const auto& e : row) mean = mean + e.landmark.position;
  mean = mean * (1.0 / static_cast<double>(row.size()));
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& e : row) {
    const Vec2 d = e.landmark.position - mean;
    sxx += d.x * d.x;
    syy += d.y * d.y;
    sxy += d.x * d.y;
  }
  const double phi = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Vec2 axis{std::cos(phi), std::sin(phi)};
  if (axis.x < 0.0 || (axis.x == 0.0 && axis.y < 0.0)) axis = axis * -1.0;
  return axis;
}

bool lex_less(const SurveyEntry& a, const SurveyEntry& b) {
  const auto& pa = a.landmark.position;
  const auto& pb = b.landmark.position;
  if (pa.x != pb.x) return pa.x < pb.x;
  if (pa.y != pb.y) return pa.y < pb.y;
  return a.landmark.cls < b.landmark.cls;
}

}  // namespace

SemanticClass segment_class(SemanticClass a, SemanticClass b) {
  return (a == SemanticClass::trunk && b == SemanticClass::trunk) ? SemanticClass::trunk
                                                                  : SemanticClass::pole;
}

WallMap build_wall_map(std::span<const SurveyEntry> survey) {
  std::map<int, std::vector<SurveyEntry>> rows;
  for (const auto& entry : survey) {
    if (entry.landmark.cls == SemanticClass::background) {
      throw InvalidArgument("survey landmark in row " + std::to_string(entry.row_id) +
                            " has class background");
    }
    rows[entry.row_id].push_back(entry);
  }

  WallMap map;
  for (auto& [row_id, row] : rows) {
    if (row.size() < 2) throw RowTooSmall(row_id);
    // Canonical order first so the axis estimate is independent of input order.
    std::sort(row.begin(), row.end(), lex_less);
    const Vec2 axis = principal_axis(row);
    std::stable_sort(row.begin(), row.end(), [&](const SurveyEntry& a, const SurveyEntry& b) {
      return dot(a.landmark.position, axis) < dot(b.landmark.position, axis);
    });
    for (std::size_t i = 0; i < row.size(); ++i) {
      row[i].along_index = static_cast<int>(i);
      if (i > 0 && row[i].landmark.position == row[i - 1].landmark.position) {
        throw InvalidArgument("row " + std::to_string(row_id) + " has coincident landmarks");
      }
    }
    for (std::size_t i = 0; i + 1 < row.size(); ++i) {
      const auto& a = row[i].landmark;
      const auto& b = row[i + 1].landmark;
      map.segments_.push_back({a.position, b.position, segment_class(a.cls, b.cls), row_id});
    }
    map.landmarks_.insert(map.landmarks_.end(), row.begin(), row.end());
  }
  map.build_index();
  return map;
}

void WallMap::build_index() {
  nx_ = ny_ = 0;
  cell_start_.clear();
  cell_items_.clear();
  if (segments_.empty()) return;

  Vec2 lo{kInf, kInf};
  Vec2 hi{-kInf, -kInf};
  std::vector<double> lengths;
  lengths.reserve(segments_.size());
  for (const auto& s : segments_) {
    lo = {std::min({lo.x, s.a.x, s.b.x}), std::min({lo.y, s.a.y, s.b.y})};
    hi = {std::max({hi.x, s.a.x, s.b.x}), std::max({hi.y, s.a.y, s.b.y})};
    lengths.push_back(distance(s.a, s.b));
  }
  auto mid = lengths.begin() + static_cast<std::ptrdiff_t>(lengths.size() / 2);
  std::nth_element(lengths.begin(), mid, lengths.end());
  double cs = std::max(*mid, 1e-3);

  const double pad = 2.0 * kCellPad;
  lo = {lo.x - pad, lo.y - pad};
  hi = {hi.x + pad, hi.y + pad};
  const double extent = std::max(hi.x - lo.x, hi.y - lo.y);
  cs = std::max(cs, extent / kMaxCellsPerAxis);

  grid_min_ = lo;
  cell_size_ = cs;
  nx_ = std::max(1, static_cast<int>(std::ceil((hi.x - lo.x) / cs)));
  ny_ = std::max(1, static_cast<int>(std::ceil((hi.y - lo.y) / cs)));

  auto cell_range = [&](const WallSegment& s) {
    auto to_cell = [&](double v, double origin, int n) {
      return std::clamp(static_cast<int>(std::floor((v - origin) / cs)), 0, n - 1);
    };
    const int x0 = to_cell(std::min(s.a.x, s.b.x) - kCellPad, lo.x, nx_);
    const int x1 = to_cell(std::max(s.a.x, s.b.x) + kCellPad, lo.x, nx_);
    const int y0 = to_cell(std::min(s.a.y, s.b.y) - kCellPad, lo.y, ny_);
    const int y1 = to_cell(std::max(s.a.y, s.b.y) + kCellPad, lo.y, ny_);
    return std::array<int, 4>{x0, x1, y0, y1};
  };

  const std::size_t n_cells = static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
  std::vector<std::uint32_t> counts(n_cells, 0);
  for (const auto& s : segments_) {
    const auto [x0, x1, y0, y1] = cell_range(s);
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix) ++counts[static_cast<std::size_t>(iy) * nx_ + ix];
  }
  cell_start_.assign(n_cells + 1, 0);
  for (std::size_t c = 0; c < n_cells; ++c) cell_start_[c + 1] = cell_start_[c] + counts[c];
  cell_items_.resize(cell_start_.back());
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::uint32_t i = 0; i < segments_.size(); ++i) {
    const auto [x0, x1, y0, y1] = cell_range(segments_[i]);
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix)
        cell_items_[fill[static_cast<std::size_t>(iy) * nx_ + ix]++] = i;
  }
}

std::span<const std::uint32_t> WallMap::cell(int ix, int iy) const {
  if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return {};
  const std::size_t c = static_cast<std::size_t>(iy) * nx_ + ix;
  return {cell_items_.data() + cell_start_[c], cell_start_[c + 1] - cell_start_[c]};
}

RaycastResult WallMap::raycast(Vec2 origin, double bearing, double max_range) const {
  if (nx_ == 0 || !(max_range > 0.0)) return std::nullopt;
  const Vec2 dir{std::cos(bearing), std::sin(bearing)};
  const double cs = cell_size_;
  const Vec2 grid_max{grid_min_.x + nx_ * cs, grid_min_.y + ny_ * cs};

  // Clip the ray to the grid box.
  double t_enter = 0.0;
  double t_leave = max_range;
  const double o[2] = {origin.x, origin.y};
  const double d[2] = {dir.x, dir.y};
  const double lo[2] = {grid_min_.x, grid_min_.y};
  const double hi[2] = {grid_max.x, grid_max.y};
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (o[k] < lo[k] || o[k] > hi[k]) return std::nullopt;
      continue;
    }
    double ta = (lo[k] - o[k]) / d[k];
    double tb = (hi[k] - o[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t_enter = std::max(t_enter, ta);
    t_leave = std::min(t_leave, tb);
  }
  if (t_enter > t_leave) return std::nullopt;

  const Vec2 entry = origin + dir * t_enter;
  int ix = std::clamp(static_cast<int>(std::floor((entry.x - grid_min_.x) / cs)), 0, nx_ - 1);
  int iy = std::clamp(static_cast<int>(std::floor((entry.y - grid_min_.y) / cs)), 0, ny_ - 1);
  const int step_x = dir.x > 0.0 ? 1 : -1;
  const int step_y = dir.y > 0.0 ? 1 : -1;
  auto boundary_t = [&](int i, int step, double g0, double oc, double dc) {
    if (dc == 0.0) return kInf;
    const double edge = g0 + (step > 0 ? i + 1 : i) * cs;
    return (edge - oc) / dc;
  };
  double t_next_x = boundary_t(ix, step_x, grid_min_.x, origin.x, dir.x);
  double t_next_y = boundary_t(iy, step_y, grid_min_.y, origin.y, dir.y);
  const double dt_x = dir.x == 0.0 ? kInf : cs / std::abs(dir.x);
  const double dt_y = dir.y == 0.0 ? kInf : cs / std::abs(dir.y);

  double best_pole = kInf;
  double best_trunk = kInf;
  while (true) {
    for (const std::uint32_t idx : cell(ix, iy)) {
      const WallSegment& seg = segments_[idx];
      const double t = intersect(origin, dir, seg, max_range);
      if (seg.cls == SemanticClass::pole) {
        best_pole = std::min(best_pole, t);
      } else {
        best_trunk = std::min(best_trunk, t);
      }
    }
    const double best = std::min(best_pole, best_trunk);
    const double t_exit = std::min(t_next_x, t_next_y);
    if (t_exit > t_leave || best + kRaycastTieTolerance < t_exit) break;
    if (t_next_x < t_next_y) {
      ix += step_x;
      t_next_x += dt_x;
    } else {
      iy += step_y;
      t_next_y += dt_y;
    }
    if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) break;
  }

  const double best = std::min(best_pole, best_trunk);
  if (best == kInf) return std::nullopt;
  const SemanticClass cls =
      best_pole <= best + kRaycastTieTolerance ? SemanticClass::pole : SemanticClass::trunk;
  return RaycastHit{best, cls};
}

void WallMap::raycast_batch(Vec2 origin, std::span<const double> bearings, double max_range,
                            std::span<RaycastResult> out) const {
  if (out.size() != bearings.size()) {
    throw InvalidArgument("raycast_batch: output size does not match bearing count");
  }
  for (std::size_t i = 0; i < bearings.size(); ++i) out[i] = raycast(origin, bearings[i], max_range);
}

std::vector<RaycastResult> WallMap::raycast_batch(Vec2 origin, std::span<const double> bearings,
                                                  double max_range) const {
  std::vector<RaycastResult> out(bearings.size());
  raycast_batch(origin, bearings, max_range, out);
  return out;
}

}  // namespace semloc
