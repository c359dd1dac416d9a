#include "semloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <tuple>

#include <json.hpp>

#include "semloc/errors.hpp"
#include "semloc/io.hpp"

namespace semloc {
namespace {

ErrorStats stats_of(const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("no errors to summarise");
  double sum = 0.0;
  for (const double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (const double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

FieldSummary summarise(const std::vector<double>& values) {
  const auto s = stats_of(values);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {s.mean, s.std, *lo, *hi};
}

void check_pairs(const Trajectory& est, const Trajectory& gt, const std::vector<IndexPair>& pairs) {
  if (pairs.empty()) throw InvalidArgument("metrics need at least one associated pair");
  for (const auto& [i, j] : pairs) {
    if (i >= est.size() || j >= gt.size()) throw InvalidArgument("pair index out of range");
  }
}

}  // namespace

std::vector<IndexPair> associate(const Trajectory& est, const Trajectory& gt, double max_dt) {
  if (est.empty() || gt.empty()) throw InvalidArgument("associate needs non-empty trajectories");
  if (!(max_dt >= 0.0)) throw InvalidArgument("max_dt must be non-negative");

  struct Candidate {
    double dt;
    std::size_t i, j;
  };
  std::vector<Candidate> candidates;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est.samples[i].t;
    while (lo < gt.size() && gt.samples[lo].t < t - max_dt) ++lo;
    for (std::size_t j = lo; j < gt.size() && gt.samples[j].t <= t + max_dt; ++j) {
      candidates.push_back({std::abs(gt.samples[j].t - t), i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.dt, a.i, a.j) < std::tie(b.dt, b.i, b.j);
  });

  std::vector<bool> est_used(est.size(), false), gt_used(gt.size(), false);
  std::vector<IndexPair> pairs;
  for (const auto& c : candidates) {
    if (est_used[c.i] || gt_used[c.j]) continue;
    est_used[c.i] = gt_used[c.j] = true;
    pairs.emplace_back(c.i, c.j);
  }
  if (pairs.empty()) throw EmptyAssociation();
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::vector<double> ape_errors(const Trajectory& est, const Trajectory& gt,
                               const std::vector<IndexPair>& pairs) {
  check_pairs(est, gt, pairs);
  std::vector<double> errors;
  errors.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    errors.push_back(distance(est.samples[i].pose.position(), gt.samples[j].pose.position()));
  }
  return errors;
}

ErrorStats ape(const Trajectory& est, const Trajectory& gt, const std::vector<IndexPair>& pairs) {
  return stats_of(ape_errors(est, gt, pairs));
}

std::vector<double> rpe_errors(const Trajectory& est, const Trajectory& gt,
                               const std::vector<IndexPair>& pairs, std::size_t delta) {
  check_pairs(est, gt, pairs);
  if (delta == 0) throw InvalidArgument("rpe delta must be positive");
  if (pairs.size() <= delta) throw InvalidArgument("rpe needs more pairs than delta");
  std::vector<double> errors;
  errors.reserve(pairs.size() - delta);
  for (std::size_t k = 0; k + delta < pairs.size(); ++k) {
    const auto& [i0, j0] = pairs[k];
    const auto& [i1, j1] = pairs[k + delta];
    const Vec2 d_est = est.samples[i1].pose.position() - est.samples[i0].pose.position();
    const Vec2 d_gt = gt.samples[j1].pose.position() - gt.samples[j0].pose.position();
    errors.push_back(norm(d_est - d_gt));
  }
  return errors;
}

ErrorStats rpe(const Trajectory& est, const Trajectory& gt, const std::vector<IndexPair>& pairs,
               std::size_t delta) {
  return stats_of(rpe_errors(est, gt, pairs, delta));
}

int region_of(const VineyardWorld& world, Vec2 p) {
  if (world.rows.empty()) throw InvalidArgument("world has no rows");
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -min_x;
  std::vector<double> lines;
  lines.reserve(world.rows.size());
  for (const auto& row : world.rows) {
    double sum_y = 0.0;
    for (const auto& lm : row.landmarks) {
      sum_y += lm.position.y;
      min_x = std::min(min_x, lm.position.x);
      max_x = std::max(max_x, lm.position.x);
    }
    lines.push_back(sum_y / static_cast<double>(row.landmarks.size()));
  }
  if (p.x < min_x || p.x > max_x) return kHeadlandRegion;
  return static_cast<int>(std::count_if(lines.begin(), lines.end(), [&](double y) { return y < p.y; }));
}

double row_accuracy(const Trajectory& est, const Trajectory& gt,
                    const std::vector<IndexPair>& pairs, const VineyardWorld& world) {
  check_pairs(est, gt, pairs);
  std::size_t same = 0;
  for (const auto& [i, j] : pairs) {
    if (region_of(world, est.samples[i].pose.position()) ==
        region_of(world, gt.samples[j].pose.position())) {
      ++same;
    }
  }
  return static_cast<double>(same) / static_cast<double>(pairs.size());
}

MetricReport evaluate(const Trajectory& est, const Trajectory& gt, const VineyardWorld& world,
                      double max_dt) {
  const auto pairs = associate(est, gt, max_dt);
  MetricReport report;
  report.per_step = ape_errors(est, gt, pairs);
  const auto a = stats_of(report.per_step);
  report.ape_mean = a.mean;
  report.ape_std = a.std;
  if (pairs.size() > 1) {
    const auto r = rpe(est, gt, pairs, 1);
    report.rpe_mean = r.mean;
    report.rpe_std = r.std;
  }
  report.row_acc = row_accuracy(est, gt, pairs, world);
  return report;
}

AggregateSummary aggregate(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw InvalidArgument("aggregate needs at least one report");
  auto field = [&](double MetricReport::*member) {
    std::vector<double> v;
    v.reserve(reports.size());
    for (const auto& r : reports) v.push_back(r.*member);
    return summarise(v);
  };
  AggregateSummary s;
  s.count = reports.size();
  s.ape_mean = field(&MetricReport::ape_mean);
  s.ape_std = field(&MetricReport::ape_std);
  s.rpe_mean = field(&MetricReport::rpe_mean);
  s.rpe_std = field(&MetricReport::rpe_std);
  s.row_acc = field(&MetricReport::row_acc);
  return s;
}

MetricRow to_row(const std::string& method, const std::string& seed, const MetricReport& r) {
  return {method, seed, r.ape_mean, r.ape_std, r.rpe_mean, r.rpe_std, r.row_acc};
}

std::vector<MetricRow> aggregate_rows(const std::string& method, const AggregateSummary& s) {
  auto pick = [&](const char* label, double FieldSummary::*m) {
    return MetricRow{method, label, s.ape_mean.*m, s.ape_std.*m, s.rpe_mean.*m, s.rpe_std.*m,
                     s.row_acc.*m};
  };
  return {pick("mean", &FieldSummary::mean), pick("std", &FieldSummary::std),
          pick("min", &FieldSummary::min), pick("max", &FieldSummary::max)};
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.method << ',' << r.seed << ',' << format_double(r.ape_mean) << ','
        << format_double(r.ape_std) << ',' << format_double(r.rpe_mean) << ','
        << format_double(r.rpe_std) << ',' << format_double(r.row_acc) << '\n';
  }
}

void write_metrics_jsonl(std::ostream& out, const std::vector<MetricRow>& rows) {
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["seed"] = r.seed;
    j["ape_mean"] = r.ape_mean;
    j["ape_std"] = r.ape_std;
    j["rpe_mean"] = r.rpe_mean;
    j["rpe_std"] = r.rpe_std;
    j["row_acc"] = r.row_acc;
    out << j.dump() << '\n';
  }
}

std::vector<MetricRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader) {
    throw ParseError(1, "expected metrics header");
  }
  std::vector<MetricRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      f.push_back(line.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (f.size() != 7) throw ParseError(line_no, "expected 7 fields");
    try {
      rows.push_back({f[0], f[1], parse_double(f[2]), parse_double(f[3]), parse_double(f[4]),
                      parse_double(f[5]), parse_double(f[6])});
    } catch (const ParseError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return rows;
}

}  // namespace semloc
