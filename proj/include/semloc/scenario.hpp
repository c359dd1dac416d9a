#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semloc/filter.hpp"
#include "semloc/worldsim.hpp"

namespace semloc {

inline constexpr std::string_view kScenarioSchema = "semloc-scenario v1";

enum class Method { spf, spf_nogps, classless, gps_only, poles_only, trunks_only };

std::string_view to_string(Method method);
/// Throws InvalidArgument on an unknown name.
Method method_from_string(std::string_view name);
std::vector<Method> all_methods();

/// How a sensor record becomes a semantic scan.
enum class ObservationSource {
  fused,   // range scan labelled by detection disks
  camera,  // one observation per detection
};

struct SweepSpec {
  std::vector<double> lambda_hit{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> lambda_miss{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<std::uint64_t> seeds;  // empty: the first five scenario seeds
  Method method = Method::spf;
};

struct Scenario {
  std::string name = "default";
  WorldSpec world;
  TrajectorySpec trajectory;
  SensorSpec sensors;
  ObservationSource observation = ObservationSource::fused;
  double fusion_radius = 0.5;  // m
  FilterConfig filter;                       // shared base
  std::map<Method, FilterConfig> per_method; // resolved per method
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds;
  double max_dt = 0.05;  // association window, s
  SweepSpec sweep;
  int workers = 1;
  std::filesystem::path output = "out";

  /// Resolved filter configuration for one method.
  const FilterConfig& filter_for(Method method) const;
};

/// Parses and validates a scenario document. Throws ConfigError naming the
/// offending field path, or "line N" for a syntax error.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Resolved configuration as a pretty-printed JSON document.
std::string scenario_to_json(const Scenario& scenario);

/// Hex digest of everything a sensor log depends on (world, trajectory,
/// sensors, seed).
std::string sensor_cache_key(const Scenario& scenario, std::uint64_t seed);

/// Parses "1,2,5-8" style seed lists.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

}  // namespace semloc
