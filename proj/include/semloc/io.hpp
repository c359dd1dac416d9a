#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semloc/semmap.hpp"
#include "semloc/types.hpp"
#include "semloc/worldsim.hpp"

namespace semloc {

// Text formats. Every floating-point value is written in shortest
// round-trip form, so write -> read reproduces values bit for bit.
// Layouts are documented in docs/formats.md.

inline constexpr std::string_view kWorldHeader = "# semloc-world v1";
inline constexpr std::string_view kTrajectoryHeader = "# semloc-traj v1";
inline constexpr std::string_view kSegmentsHeader = "# semloc-segments v1";
inline constexpr std::string_view kSensorLogHeader = "# semloc-log v1";

std::string format_double(double value);
double parse_double(std::string_view text);  // throws ParseError

/// Warning sink; defaults to stderr. Pass an empty function to restore it.
void set_warning_sink(std::function<void(std::string_view)> sink);
void warn(std::string_view message);

void write_world(std::ostream& out, const VineyardWorld& world);
VineyardWorld read_world(std::istream& in);
void write_world_file(const std::filesystem::path& path, const VineyardWorld& world);
VineyardWorld read_world_file(const std::filesystem::path& path);

/// Landmark lines only (world or map file); metadata comments are skipped.
std::vector<SurveyEntry> read_survey(std::istream& in);
std::vector<SurveyEntry> read_survey_file(const std::filesystem::path& path);

void write_segments(std::ostream& out, const WallMap& map);
void write_segments_file(const std::filesystem::path& path, const WallMap& map);

void write_trajectory(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory(std::istream& in);
void write_trajectory_file(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_file(const std::filesystem::path& path);

/// Sensor log: one length-prefixed record per line.
std::string encode_record(const SensorRecord& record);
SensorRecord decode_record(std::string_view payload, std::size_t index);
void write_sensor_log(std::ostream& out, const SensorLog& log);
/// A truncated final record ends the log with a warning; a malformed
/// complete record throws ParseError carrying the record index.
SensorLog read_sensor_log(std::istream& in);
void write_sensor_log_file(const std::filesystem::path& path, const SensorLog& log);
SensorLog read_sensor_log_file(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace semloc
