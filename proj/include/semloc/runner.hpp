#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semloc/eval.hpp"
#include "semloc/filter.hpp"
#include "semloc/scenario.hpp"
#include "semloc/semmap.hpp"
#include "semloc/worldsim.hpp"

namespace semloc {

/// Which detection classes a method keeps; nullopt keeps both.
std::optional<SemanticClass> class_filter(Method method);

/// World, ground truth and the wall maps every method needs.
struct PreparedWorld {
  VineyardWorld world;
  Trajectory ground_truth;
  WallMap full_map;
  WallMap poles_map;
  WallMap trunks_map;

  const WallMap& map_for(Method method) const;
};

PreparedWorld prepare_world(const Scenario& scenario);

/// Survey restricted to one class (or unchanged for nullopt).
std::vector<SurveyEntry> filter_survey(std::span<const SurveyEntry> survey,
                                       std::optional<SemanticClass> keep);

/// Semantic scan built from one record.
SemanticScan observe(const SensorRecord& record, ObservationSource source, double fusion_radius,
                     double max_range, std::optional<SemanticClass> keep);

struct FilterRun {
  Trajectory estimate;
  std::vector<StepDiagnostics> diagnostics;
};

struct ReplayOptions {
  ObservationSource source = ObservationSource::fused;
  double fusion_radius = 0.5;
  std::optional<SemanticClass> keep;
};

/// Runs the particle filter over a whole log. The filter RNG derives from
/// the log seed only, so the same (log, map, config) reproduces bit for bit.
FilterRun run_filter(const SensorLog& log, const WallMap& map, const Bounds& bounds,
                     const FilterConfig& config, const ReplayOptions& options);

/// Raw fix sequence; heading follows the displacement to the next fix.
Trajectory gps_trajectory(const SensorLog& log);

/// Simulated log for one seed, reused from `cache_dir` when a file with the
/// matching key exists. Pass an empty path to skip caching.
SensorLog sensor_log_for(const Scenario& scenario, const PreparedWorld& prepared,
                         std::uint64_t seed, const std::filesystem::path& cache_dir);

struct RunResult {
  Method method = Method::spf;
  std::uint64_t seed = 0;
  Trajectory estimate;
  std::vector<StepDiagnostics> diagnostics;
  MetricReport report;
  std::optional<std::string> error;
};

/// One (method, seed) run against the prepared world and a log.
RunResult run_method(const Scenario& scenario, const PreparedWorld& prepared, Method method,
                     const FilterConfig& config, const SensorLog& log);

struct RunSummary {
  std::vector<RunResult> results;  // method-major, then seed order
  std::vector<MetricRow> rows;     // per run, then aggregates per method
  std::size_t failures = 0;
};

enum class MetricsFormat { csv, json_lines };

struct RunOptions {
  std::filesystem::path out;
  int workers = 1;
  MetricsFormat format = MetricsFormat::csv;
  bool write_plots = true;
};

/// Every (method, seed) pair of the scenario, evaluated and aggregated.
/// Writes metrics and per-run outputs; errors.json only when a run fails.
RunSummary run_scenario(const Scenario& scenario, const RunOptions& options);

struct SweepResult {
  std::vector<double> lambda_hit;
  std::vector<double> lambda_miss;
  std::vector<std::vector<double>> ape;  // [hit index][miss index], mean over seeds
  std::vector<std::vector<double>> rpe;
  std::size_t best_hit = 0;
  std::size_t best_miss = 0;
  std::size_t failures = 0;
};

/// Evaluates the lambda_hit x lambda_miss grid and writes the sweep_* files
/// plus heatmaps.
SweepResult run_sweep(const Scenario& scenario, const RunOptions& options);

void write_diagnostics(std::ostream& out, const std::vector<StepDiagnostics>& diagnostics);

/// Square grid matrix as CSV: first row holds column labels.
void write_matrix_csv(std::ostream& out, const std::vector<double>& rows,
                      const std::vector<double>& cols, const std::vector<std::vector<double>>& m);
struct MatrixCsv {
  std::vector<double> rows;
  std::vector<double> cols;
  std::vector<std::vector<double>> values;
};
MatrixCsv read_matrix_csv(std::istream& in);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions inside
/// fn are the caller's responsibility.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace semloc
