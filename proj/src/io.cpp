#include "semloc/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <system_error>

#include "semloc/errors.hpp"

namespace semloc {
namespace {

std::mutex g_warn_mutex;
std::function<void(std::string_view)> g_warn_sink;

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename Int>
Int parse_int(std::string_view text) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("invalid integer '" + std::string(text) + "'");
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

void expect_header(std::istream& in, std::string_view header) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != header) {
    throw ParseError(1, "expected header '" + std::string(header) + "'");
  }
}

// Runs `fn` with the line number, re-tagging bare ParseErrors with it.
template <typename Fn>
void with_line(std::size_t line_no, Fn&& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    if (e.index() != 0) throw;
    throw ParseError(line_no, e.what());
  }
}

std::string pose_fields(const Pose2D& p) {
  return format_double(p.x) + "," + format_double(p.y) + "," + format_double(p.theta);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("failed to format number");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  if (text == "nan") return std::nan("");
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("invalid number '" + std::string(text) + "'");
  }
  return value;
}

void set_warning_sink(std::function<void(std::string_view)> sink) {
  std::lock_guard lock(g_warn_mutex);
  g_warn_sink = std::move(sink);
}

void warn(std::string_view message) {
  std::lock_guard lock(g_warn_mutex);
  if (g_warn_sink) {
    g_warn_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------- world / map

void write_world(std::ostream& out, const VineyardWorld& world) {
  out << kWorldHeader << '\n';
  out << "# row_spacing=" << format_double(world.row_spacing) << '\n';
  out << "# headland_depth=" << format_double(world.headland_depth) << '\n';
  out << "# bounds=" << format_double(world.bounds.min_x) << ',' << format_double(world.bounds.min_y)
      << ',' << format_double(world.bounds.max_x) << ',' << format_double(world.bounds.max_y) << '\n';
  for (const auto& row : world.rows) {
    for (std::size_t i = 0; i < row.landmarks.size(); ++i) {
      const auto& lm = row.landmarks[i];
      out << row.row_id << ',' << i << ',' << format_double(lm.position.x) << ','
          << format_double(lm.position.y) << ',' << to_string(lm.cls) << '\n';
    }
  }
}

std::vector<SurveyEntry> read_survey(std::istream& in) {
  expect_header(in, kWorldHeader);
  std::vector<SurveyEntry> entries;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    with_line(line_no, [&] {
      const auto f = split(text, ',');
      if (f.size() != 5) throw ParseError("expected row_id,along_index,x,y,class");
      SurveyEntry e;
      e.row_id = parse_int<int>(f[0]);
      e.along_index = parse_int<int>(f[1]);
      e.landmark.position = {parse_double(f[2]), parse_double(f[3])};
      e.landmark.cls = class_from_string(f[4]);
      if (e.landmark.cls == SemanticClass::background) {
        throw ParseError("survey landmark cannot be background");
      }
      entries.push_back(e);
    });
  }
  return entries;
}

VineyardWorld read_world(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  double row_spacing = 0.0, headland = 4.0;
  std::optional<Bounds> bounds;
  {
    std::istringstream meta(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(meta, line)) {
      ++line_no;
      const auto t = trim(line);
      if (t.rfind("# ", 0) != 0) continue;
      const auto body = t.substr(2);
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = body.substr(0, eq);
      const auto value = body.substr(eq + 1);
      with_line(line_no, [&] {
        if (key == "row_spacing") row_spacing = parse_double(value);
        if (key == "headland_depth") headland = parse_double(value);
        if (key == "bounds") {
          const auto f = split(value, ',');
          if (f.size() != 4) throw ParseError("bounds needs 4 values");
          bounds = Bounds{parse_double(f[0]), parse_double(f[1]), parse_double(f[2]),
                          parse_double(f[3])};
        }
      });
    }
  }
  std::istringstream body(text);
  const auto entries = read_survey(body);
  VineyardWorld world = world_from_survey(entries, headland);
  if (row_spacing > 0.0) world.row_spacing = row_spacing;
  if (bounds) world.bounds = *bounds;
  world.validate();
  return world;
}

void write_world_file(const std::filesystem::path& path, const VineyardWorld& world) {
  std::ostringstream out;
  write_world(out, world);
  write_file_atomic(path, out.str());
}

VineyardWorld read_world_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_world(in);
}

std::vector<SurveyEntry> read_survey_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_survey(in);
}

void write_segments(std::ostream& out, const WallMap& map) {
  out << kSegmentsHeader << '\n';
  for (const auto& s : map.segments()) {
    out << s.row_id << ',' << format_double(s.a.x) << ',' << format_double(s.a.y) << ','
        << format_double(s.b.x) << ',' << format_double(s.b.y) << ',' << to_string(s.cls) << '\n';
  }
}

void write_segments_file(const std::filesystem::path& path, const WallMap& map) {
  std::ostringstream out;
  write_segments(out, map);
  write_file_atomic(path, out.str());
}

// ----------------------------------------------------------------- trajectory

void write_trajectory(std::ostream& out, const Trajectory& traj) {
  out << kTrajectoryHeader << '\n';
  for (const auto& s : traj.samples) {
    out << format_double(s.t) << ',' << pose_fields(s.pose) << '\n';
  }
}

Trajectory read_trajectory(std::istream& in) {
  expect_header(in, kTrajectoryHeader);
  Trajectory traj;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    with_line(line_no, [&] {
      const auto f = split(text, ',');
      if (f.size() != 4) throw ParseError("expected t,x,y,theta");
      const double theta = parse_double(f[3]);
      if (!(theta > -std::numbers::pi - 1e-12 && theta <= std::numbers::pi + 1e-12)) {
        throw ParseError("theta outside (-pi, pi]");
      }
      traj.samples.push_back({parse_double(f[0]), {parse_double(f[1]), parse_double(f[2]), theta}});
    });
  }
  try {
    traj.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  return traj;
}

void write_trajectory_file(const std::filesystem::path& path, const Trajectory& traj) {
  std::ostringstream out;
  write_trajectory(out, traj);
  write_file_atomic(path, out.str());
}

Trajectory read_trajectory_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_trajectory(in);
}

// ----------------------------------------------------------------- sensor log

std::string encode_record(const SensorRecord& r) {
  std::string s;
  s += "t=" + format_double(r.t);
  s += ";odo=" + format_double(r.odometry.d_rotation1) + "," +
       format_double(r.odometry.d_translation) + "," + format_double(r.odometry.d_rotation2);
  s += ";gps=";
  if (r.gps) {
    s += format_double(r.gps->position.x) + "," + format_double(r.gps->position.y) + "," +
         format_double(r.gps->sigma);
  } else {
    s += "-";
  }
  s += ";det=" + std::to_string(r.detections.size());
  for (const auto& d : r.detections) {
    s += ":" + format_double(d.x_bev) + "," + format_double(d.z_bev) + "," +
         std::string(to_string(d.cls));
  }
  s += ";scan=" + format_double(r.scan.angle_min) + "," + format_double(r.scan.angle_increment) +
       "," + format_double(r.scan.max_range) + "," + std::to_string(r.scan.ranges.size());
  for (std::size_t i = 0; i < r.scan.ranges.size(); ++i) {
    s += (i == 0 ? ":" : ",") + format_double(r.scan.ranges[i]);
  }
  return s;
}

SensorRecord decode_record(std::string_view payload, std::size_t index) {
  try {
    const auto fields = split(payload, ';');
    if (fields.size() != 5) throw ParseError("expected 5 ';'-separated fields");
    auto value_of = [&](std::size_t i, std::string_view key) {
      const auto f = fields[i];
      if (f.substr(0, key.size()) != key || f.size() <= key.size() || f[key.size()] != '=') {
        throw ParseError("expected field '" + std::string(key) + "'");
      }
      return f.substr(key.size() + 1);
    };

    SensorRecord r;
    r.t = parse_double(value_of(0, "t"));

    const auto odo = split(value_of(1, "odo"), ',');
    if (odo.size() != 3) throw ParseError("odo needs 3 values");
    r.odometry = {parse_double(odo[0]), parse_double(odo[1]), parse_double(odo[2])};

    const auto gps = value_of(2, "gps");
    if (gps != "-") {
      const auto g = split(gps, ',');
      if (g.size() != 3) throw ParseError("gps needs 3 values");
      r.gps = GpsFix{{parse_double(g[0]), parse_double(g[1])}, parse_double(g[2])};
    }

    const auto det = split(value_of(3, "det"), ':');
    const auto n_det = parse_int<std::size_t>(det[0]);
    if (det.size() != n_det + 1) throw ParseError("detection count mismatch");
    for (std::size_t i = 1; i < det.size(); ++i) {
      const auto d = split(det[i], ',');
      if (d.size() != 3) throw ParseError("detection needs x,z,class");
      r.detections.push_back({parse_double(d[0]), parse_double(d[1]), class_from_string(d[2])});
    }

    const auto scan_parts = split(value_of(4, "scan"), ':');
    if (scan_parts.size() > 2) throw ParseError("malformed scan field");
    const auto head = split(scan_parts[0], ',');
    if (head.size() != 4) throw ParseError("scan header needs 4 values");
    r.scan.angle_min = parse_double(head[0]);
    r.scan.angle_increment = parse_double(head[1]);
    r.scan.max_range = parse_double(head[2]);
    const auto n_beams = parse_int<std::size_t>(head[3]);
    if (n_beams > 0) {
      if (scan_parts.size() != 2) throw ParseError("scan ranges missing");
      const auto ranges = split(scan_parts[1], ',');
      if (ranges.size() != n_beams) throw ParseError("scan beam count mismatch");
      r.scan.ranges.reserve(n_beams);
      for (const auto v : ranges) r.scan.ranges.push_back(parse_double(v));
    } else if (scan_parts.size() != 1) {
      throw ParseError("unexpected scan ranges");
    }
    return r;
  } catch (const ParseError& e) {
    throw ParseError(index, e.what());
  }
}

void write_sensor_log(std::ostream& out, const SensorLog& log) {
  out << kSensorLogHeader << '\n';
  out << "# seed=" << log.seed << '\n';
  out << "# key=" << log.key << '\n';
  out << "# start_pose=" << pose_fields(log.start_pose) << '\n';
  for (const auto& r : log.records) {
    const std::string payload = encode_record(r);
    out << payload.size() << ' ' << payload << '\n';
  }
}

SensorLog read_sensor_log(std::istream& in) {
  expect_header(in, kSensorLogHeader);
  SensorLog log;
  std::string line;
  bool seen_start = false;
  while (in.peek() == '#') {
    std::getline(in, line);
    const auto t = trim(line);
    const auto eq = t.find('=');
    if (eq == std::string_view::npos || t.size() < 2) continue;
    const auto key = t.substr(2, eq - 2);
    const auto value = t.substr(eq + 1);
    if (key == "seed") log.seed = parse_int<std::uint64_t>(value);
    if (key == "key") log.key = std::string(value);
    if (key == "start_pose") {
      const auto f = split(value, ',');
      if (f.size() != 3) throw ParseError("start_pose needs 3 values");
      log.start_pose = {parse_double(f[0]), parse_double(f[1]), parse_double(f[2])};
      seen_start = true;
    }
  }
  if (!seen_start) throw ParseError("sensor log lacks a start_pose header");

  std::size_t index = 0;
  while (in.peek() != std::char_traits<char>::eof()) {
    std::size_t length = 0;
    if (!(in >> length) || in.get() != ' ') {
      if (in.eof()) {
        warn("sensor log truncated inside the length prefix of record " + std::to_string(index) +
             "; stopping at the last complete record");
        break;
      }
      throw ParseError(index, "malformed length prefix");
    }
    std::string payload(length, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(length));
    const bool complete = static_cast<std::size_t>(in.gcount()) == length && in.get() == '\n';
    if (!complete) {
      warn("sensor log truncated in record " + std::to_string(index) +
           "; stopping at the last complete record");
      break;
    }
    log.records.push_back(decode_record(payload, index));
    ++index;
  }
  return log;
}

void write_sensor_log_file(const std::filesystem::path& path, const SensorLog& log) {
  std::ostringstream out;
  write_sensor_log(out, log);
  write_file_atomic(path, out.str());
}

SensorLog read_sensor_log_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_sensor_log(in);
}

}  // namespace semloc
