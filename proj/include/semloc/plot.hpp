#pragma once

#include <string>
#include <utility>
#include <vector>

#include "semloc/types.hpp"
#include "semloc/worldsim.hpp"

namespace semloc {

struct NamedTrajectory {
  std::string name;
  const Trajectory* trajectory = nullptr;
};

/// Top-down SVG of the landmarks (poles dark, trunks green) with ground truth
/// and estimates overlaid as polylines.
std::string overlay_svg(const VineyardWorld& world, const Trajectory& ground_truth,
                        const std::vector<NamedTrajectory>& estimates, const std::string& title);

/// Grid heatmap with numeric cell labels; the highlighted cell is outlined.
std::string heatmap_svg(const std::vector<double>& row_values, const std::vector<double>& col_values,
                        const std::vector<std::vector<double>>& cells, const std::string& title,
                        const std::string& row_label, const std::string& col_label,
                        std::pair<std::size_t, std::size_t> highlight);

}  // namespace semloc
