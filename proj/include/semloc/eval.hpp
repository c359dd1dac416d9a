#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "semloc/types.hpp"
#include "semloc/worldsim.hpp"

namespace semloc {

using IndexPair = std::pair<std::size_t, std::size_t>;  // (estimate index, ground-truth index)

/// Greedy nearest-in-time matching within max_dt, injective on both sides.
/// Candidate pairs are taken in order of |dt| (ties by estimate index, then
/// ground-truth index). Result is sorted by estimate index.
/// Throws EmptyAssociation when nothing matches.
std::vector<IndexPair> associate(const Trajectory& est, const Trajectory& gt, double max_dt);

struct ErrorStats {
  double mean = 0.0;
  double std = 0.0;  // population
};

ErrorStats ape(const Trajectory& est, const Trajectory& gt, const std::vector<IndexPair>& pairs);
std::vector<double> ape_errors(const Trajectory& est, const Trajectory& gt,
                               const std::vector<IndexPair>& pairs);

/// Translational relative error over pair index steps of `delta`.
ErrorStats rpe(const Trajectory& est, const Trajectory& gt, const std::vector<IndexPair>& pairs,
               std::size_t delta = 1);
std::vector<double> rpe_errors(const Trajectory& est, const Trajectory& gt,
                               const std::vector<IndexPair>& pairs, std::size_t delta = 1);

/// Region id of a point: corridor index k (number of row lines below the
/// point) inside the along-row extent, kHeadlandRegion outside it.
inline constexpr int kHeadlandRegion = -1;
int region_of(const VineyardWorld& world, Vec2 p);

double row_accuracy(const Trajectory& est, const Trajectory& gt,
                    const std::vector<IndexPair>& pairs, const VineyardWorld& world);

struct MetricReport {
  double ape_mean = 0.0;
  double ape_std = 0.0;
  double rpe_mean = 0.0;
  double rpe_std = 0.0;
  double row_acc = 0.0;
  std::vector<double> per_step;  // APE per associated pair
};

MetricReport evaluate(const Trajectory& est, const Trajectory& gt, const VineyardWorld& world,
                      double max_dt);

struct FieldSummary {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct AggregateSummary {
  std::size_t count = 0;
  FieldSummary ape_mean, ape_std, rpe_mean, rpe_std, row_acc;
};

AggregateSummary aggregate(const std::vector<MetricReport>& reports);

/// One line of metrics.csv. `seed` is a number for per-run rows and one of
/// mean/std/min/max for aggregate rows.
struct MetricRow {
  std::string method;
  std::string seed;
  double ape_mean = 0.0;
  double ape_std = 0.0;
  double rpe_mean = 0.0;
  double rpe_std = 0.0;
  double row_acc = 0.0;
};

inline constexpr const char* kMetricsCsvHeader = "method,seed,ape_mean,ape_std,rpe_mean,rpe_std,row_acc";

MetricRow to_row(const std::string& method, const std::string& seed, const MetricReport& r);
/// Four rows (mean, std, min, max) for one method.
std::vector<MetricRow> aggregate_rows(const std::string& method, const AggregateSummary& s);

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows);
void write_metrics_jsonl(std::ostream& out, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(std::istream& in);

}  // namespace semloc
