#include "semloc/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "semloc/errors.hpp"
#include "semloc/io.hpp"
#include "semloc/plot.hpp"

namespace semloc {
namespace {

constexpr std::uint64_t kFilterStream = 16;

std::string seed_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::string to_text(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

std::string optional_double(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

std::optional<SemanticClass> class_filter(Method method) {
  switch (method) {
    case Method::poles_only:
      return SemanticClass::pole;
    case Method::trunks_only:
      return SemanticClass::trunk;
    default:
      return std::nullopt;
  }
}

const WallMap& PreparedWorld::map_for(Method method) const {
  switch (method) {
    case Method::poles_only:
      return poles_map;
    case Method::trunks_only:
      return trunks_map;
    default:
      return full_map;
  }
}

std::vector<SurveyEntry> filter_survey(std::span<const SurveyEntry> survey,
                                       std::optional<SemanticClass> keep) {
  std::vector<SurveyEntry> out;
  for (const auto& e : survey) {
    if (!keep || e.landmark.cls == *keep) out.push_back(e);
  }
  return out;
}

PreparedWorld prepare_world(const Scenario& scenario) {
  PreparedWorld p;
  p.world = generate_vineyard(scenario.world);
  p.ground_truth = plan_serpentine(p.world, scenario.trajectory);
  const auto survey = p.world.survey();
  p.full_map = build_wall_map(survey);
  p.poles_map = build_wall_map(filter_survey(survey, SemanticClass::pole));
  p.trunks_map = build_wall_map(filter_survey(survey, SemanticClass::trunk));
  return p;
}

SemanticScan observe(const SensorRecord& record, ObservationSource source, double fusion_radius,
                     double max_range, std::optional<SemanticClass> keep) {
  std::vector<BevLandmark> detections;
  detections.reserve(record.detections.size());
  for (const auto& d : record.detections) {
    if (!keep || d.cls == *keep) detections.push_back(d);
  }
  SemanticScan scan = source == ObservationSource::fused
                          ? fuse_semantic_scan(record.scan, detections, fusion_radius)
                          : detections_to_scan(detections);
  return clip_to_range(std::move(scan), max_range);
}

FilterRun run_filter(const SensorLog& log, const WallMap& map, const Bounds& bounds,
                     const FilterConfig& config, const ReplayOptions& options) {
  if (log.records.empty()) throw InvalidArgument("sensor log has no records");
  Rng rng(derive_seed(log.seed, kFilterStream));
  FilterState state;
  const auto& first = log.records.front();
  state.particles = initialize(config, bounds, config.use_gps || config.init == InitMode::gps_prior
                                                   ? first.gps
                                                   : std::nullopt,
                               rng);
  state.estimates.samples.reserve(log.records.size());
  state.diagnostics.reserve(log.records.size());
  for (const auto& rec : log.records) {
    const auto scan = observe(rec, options.source, options.fusion_radius,
                              config.likelihood.max_range, options.keep);
    step(state, rec.t, rec.odometry, scan, rec.gps, map, config, rng);
  }
  return {std::move(state.estimates), std::move(state.diagnostics)};
}

Trajectory gps_trajectory(const SensorLog& log) {
  Trajectory t;
  for (const auto& rec : log.records) {
    if (rec.gps) t.samples.push_back({rec.t, {rec.gps->position.x, rec.gps->position.y, 0.0}});
  }
  for (std::size_t i = 0; i + 1 < t.samples.size(); ++i) {
    const Vec2 d = t.samples[i + 1].pose.position() - t.samples[i].pose.position();
    t.samples[i].pose.theta = std::atan2(d.y, d.x);
  }
  if (t.samples.size() > 1) t.samples.back().pose.theta = t.samples[t.samples.size() - 2].pose.theta;
  if (t.empty()) throw InvalidArgument("sensor log carries no GPS fixes");
  return t;
}

SensorLog sensor_log_for(const Scenario& scenario, const PreparedWorld& prepared,
                         std::uint64_t seed, const std::filesystem::path& cache_dir) {
  const std::string key = sensor_cache_key(scenario, seed);
  const auto path = cache_dir / (seed_name(seed) + ".log");
  if (!cache_dir.empty() && std::filesystem::exists(path)) {
    try {
      SensorLog cached = read_sensor_log_file(path);
      if (cached.key == key && cached.seed == seed &&
          cached.records.size() == prepared.ground_truth.size()) {
        return cached;
      }
    } catch (const Error&) {
      warn("discarding unreadable cached log " + path.string());
    }
  }
  SensorLog log = simulate_sensors(prepared.world, prepared.ground_truth, scenario.sensors, seed);
  log.key = key;
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    write_sensor_log_file(path, log);
  }
  return log;
}

RunResult run_method(const Scenario& scenario, const PreparedWorld& prepared, Method method,
                     const FilterConfig& config, const SensorLog& log) {
  RunResult r;
  r.method = method;
  r.seed = log.seed;
  try {
    if (method == Method::gps_only) {
      r.estimate = gps_trajectory(log);
    } else {
      ReplayOptions options{scenario.observation, scenario.fusion_radius, class_filter(method)};
      auto run = run_filter(log, prepared.map_for(method), prepared.world.bounds, config, options);
      r.estimate = std::move(run.estimate);
      r.diagnostics = std::move(run.diagnostics);
    }
    r.report = evaluate(r.estimate, prepared.ground_truth, prepared.world, scenario.max_dt);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

void write_diagnostics(std::ostream& out, const std::vector<StepDiagnostics>& diagnostics) {
  out << "t,ess,n_particles,alpha,n_sem,log_obs_best,log_gps_best\n";
  for (const auto& d : diagnostics) {
    out << format_double(d.t) << ',' << format_double(d.ess) << ',' << d.n_particles << ','
        << format_double(d.alpha) << ',' << d.n_sem << ',' << format_double(d.log_obs_best) << ','
        << optional_double(d.log_gps_best) << '\n';
  }
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

namespace {

// Simulates (or loads) one log per seed; failures are kept per seed.
struct LogSet {
  std::vector<std::optional<SensorLog>> logs;
  std::vector<std::string> errors;
};

LogSet prepare_logs(const Scenario& scenario, const PreparedWorld& prepared,
                    const std::vector<std::uint64_t>& seeds, const std::filesystem::path& cache,
                    int workers) {
  LogSet set;
  set.logs.resize(seeds.size());
  set.errors.resize(seeds.size());
  parallel_for(seeds.size(), workers, [&](std::size_t i) {
    try {
      set.logs[i] = sensor_log_for(scenario, prepared, seeds[i], cache);
    } catch (const std::exception& e) {
      set.errors[i] = std::string("sensor simulation failed: ") + e.what();
    }
  });
  return set;
}

void write_error_manifest(const std::filesystem::path& path, const std::vector<RunResult>& results) {
  nlohmann::ordered_json failed = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    if (!r.error) continue;
    failed.push_back({{"method", std::string(to_string(r.method))}, {"seed", r.seed}, {"error", *r.error}});
  }
  nlohmann::ordered_json doc;
  doc["failed_runs"] = failed;
  write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace

RunSummary run_scenario(const Scenario& scenario, const RunOptions& options) {
  namespace fs = std::filesystem;
  const PreparedWorld prepared = prepare_world(scenario);
  fs::create_directories(options.out);
  write_file_atomic(options.out / "config.json", scenario_to_json(scenario));
  write_file_atomic(options.out / "world.txt", to_text([&](std::ostream& o) { write_world(o, prepared.world); }));
  write_file_atomic(options.out / "segments.txt",
                    to_text([&](std::ostream& o) { write_segments(o, prepared.full_map); }));
  write_file_atomic(options.out / "ground_truth.traj",
                    to_text([&](std::ostream& o) { write_trajectory(o, prepared.ground_truth); }));

  const auto& seeds = scenario.seeds;
  const auto logs = prepare_logs(scenario, prepared, seeds, options.out / "logs", options.workers);

  RunSummary summary;
  const std::size_t n_seeds = seeds.size();
  summary.results.resize(scenario.methods.size() * n_seeds);
  parallel_for(summary.results.size(), options.workers, [&](std::size_t k) {
    const Method method = scenario.methods[k / n_seeds];
    const std::size_t si = k % n_seeds;
    RunResult& r = summary.results[k];
    if (!logs.logs[si]) {
      r.method = method;
      r.seed = seeds[si];
      r.error = logs.errors[si];
      return;
    }
    r = run_method(scenario, prepared, method, scenario.filter_for(method), *logs.logs[si]);
    if (r.error) return;
    const fs::path dir = options.out / "runs" / std::string(to_string(method));
    try {
      fs::create_directories(dir);
      write_file_atomic(dir / (seed_name(r.seed) + ".traj"),
                        to_text([&](std::ostream& o) { write_trajectory(o, r.estimate); }));
      if (method != Method::gps_only) {
        write_file_atomic(dir / (seed_name(r.seed) + ".diag.csv"),
                          to_text([&](std::ostream& o) { write_diagnostics(o, r.diagnostics); }));
      }
    } catch (const std::exception& e) {
      r.error = std::string("writing outputs failed: ") + e.what();
    }
  });

  for (std::size_t mi = 0; mi < scenario.methods.size(); ++mi) {
    const std::string name(to_string(scenario.methods[mi]));
    std::vector<MetricReport> reports;
    for (std::size_t si = 0; si < n_seeds; ++si) {
      const auto& r = summary.results[mi * n_seeds + si];
      if (r.error) continue;
      summary.rows.push_back(to_row(name, std::to_string(r.seed), r.report));
      reports.push_back(r.report);
    }
    if (!reports.empty()) {
      for (auto& row : aggregate_rows(name, aggregate(reports))) summary.rows.push_back(std::move(row));
    }
  }
  for (const auto& r : summary.results) summary.failures += r.error ? 1 : 0;

  if (options.format == MetricsFormat::csv) {
    write_file_atomic(options.out / "metrics.csv",
                      to_text([&](std::ostream& o) { write_metrics_csv(o, summary.rows); }));
  } else {
    write_file_atomic(options.out / "metrics.jsonl",
                      to_text([&](std::ostream& o) { write_metrics_jsonl(o, summary.rows); }));
  }

  if (options.write_plots) {
    fs::create_directories(options.out / "plots");
    for (std::size_t si = 0; si < n_seeds; ++si) {
      std::vector<NamedTrajectory> named;
      for (std::size_t mi = 0; mi < scenario.methods.size(); ++mi) {
        const auto& r = summary.results[mi * n_seeds + si];
        if (r.error) continue;
        std::string label(to_string(r.method));
        if (r.method == Method::classless) label += " (geometric surrogate)";
        named.push_back({label, &r.estimate});
      }
      write_file_atomic(options.out / "plots" / ("overlay_" + seed_name(seeds[si]) + ".svg"),
                        overlay_svg(prepared.world, prepared.ground_truth, named,
                                    scenario.name + " " + seed_name(seeds[si])));
    }
  }

  const fs::path manifest = options.out / "errors.json";
  if (summary.failures > 0) {
    write_error_manifest(manifest, summary.results);
  } else if (fs::exists(manifest)) {
    fs::remove(manifest);
  }
  return summary;
}

void write_matrix_csv(std::ostream& out, const std::vector<double>& rows,
                      const std::vector<double>& cols, const std::vector<std::vector<double>>& m) {
  out << "lambda_hit\\lambda_miss";
  for (const double c : cols) out << ',' << format_double(c);
  out << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << format_double(rows[i]);
    for (const double v : m[i]) out << ',' << format_double(v);
    out << '\n';
  }
}

MatrixCsv read_matrix_csv(std::istream& in) {
  MatrixCsv m;
  std::string line;
  auto fields = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    return f;
  };
  if (!std::getline(in, line)) throw ParseError(1, "empty matrix file");
  const auto head = fields(line);
  for (std::size_t j = 1; j < head.size(); ++j) m.cols.push_back(parse_double(head[j]));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = fields(line);
    if (f.size() != m.cols.size() + 1) throw ParseError(line_no, "wrong number of cells");
    m.rows.push_back(parse_double(f[0]));
    std::vector<double> row;
    for (std::size_t j = 1; j < f.size(); ++j) row.push_back(parse_double(f[j]));
    m.values.push_back(std::move(row));
  }
  return m;
}

SweepResult run_sweep(const Scenario& scenario, const RunOptions& options) {
  namespace fs = std::filesystem;
  const PreparedWorld prepared = prepare_world(scenario);
  fs::create_directories(options.out);
  write_file_atomic(options.out / "config.json", scenario_to_json(scenario));

  const auto& sw = scenario.sweep;
  const auto& seeds = sw.seeds;
  const auto logs = prepare_logs(scenario, prepared, seeds, options.out / "logs", options.workers);

  SweepResult result;
  result.lambda_hit = sw.lambda_hit;
  result.lambda_miss = sw.lambda_miss;
  const std::size_t nh = sw.lambda_hit.size();
  const std::size_t nm = sw.lambda_miss.size();
  const std::size_t ns = seeds.size();
  std::vector<RunResult> runs(nh * nm * ns);
  parallel_for(runs.size(), options.workers, [&](std::size_t k) {
    const std::size_t cell = k / ns;
    const std::size_t si = k % ns;
    if (!logs.logs[si]) {
      runs[k].method = sw.method;
      runs[k].seed = seeds[si];
      runs[k].error = logs.errors[si];
      return;
    }
    FilterConfig config = scenario.filter_for(sw.method);
    config.likelihood.lambda_hit = sw.lambda_hit[cell / nm];
    config.likelihood.lambda_miss = sw.lambda_miss[cell % nm];
    runs[k] = run_method(scenario, prepared, sw.method, config, *logs.logs[si]);
  });

  const double nan = std::numeric_limits<double>::quiet_NaN();
  result.ape.assign(nh, std::vector<double>(nm, nan));
  result.rpe.assign(nh, std::vector<double>(nm, nan));
  std::ostringstream per_run;
  per_run << "lambda_hit,lambda_miss,seed,ape_mean,ape_std,rpe_mean,rpe_std,row_acc\n";
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nh; ++i) {
    for (std::size_t j = 0; j < nm; ++j) {
      double ape_sum = 0.0, rpe_sum = 0.0;
      bool ok = true;
      for (std::size_t si = 0; si < ns; ++si) {
        const auto& r = runs[(i * nm + j) * ns + si];
        if (r.error) {
          ok = false;
          ++result.failures;
          continue;
        }
        ape_sum += r.report.ape_mean;
        rpe_sum += r.report.rpe_mean;
        per_run << format_double(sw.lambda_hit[i]) << ',' << format_double(sw.lambda_miss[j]) << ','
                << r.seed << ',' << format_double(r.report.ape_mean) << ','
                << format_double(r.report.ape_std) << ',' << format_double(r.report.rpe_mean) << ','
                << format_double(r.report.rpe_std) << ',' << format_double(r.report.row_acc) << '\n';
      }
      if (!ok) continue;
      result.ape[i][j] = ape_sum / static_cast<double>(ns);
      result.rpe[i][j] = rpe_sum / static_cast<double>(ns);
      if (result.ape[i][j] < best) {
        best = result.ape[i][j];
        result.best_hit = i;
        result.best_miss = j;
      }
    }
  }

  write_file_atomic(options.out / "sweep_ape.csv", to_text([&](std::ostream& o) {
                      write_matrix_csv(o, sw.lambda_hit, sw.lambda_miss, result.ape);
                    }));
  write_file_atomic(options.out / "sweep_rpe.csv", to_text([&](std::ostream& o) {
                      write_matrix_csv(o, sw.lambda_hit, sw.lambda_miss, result.rpe);
                    }));
  write_file_atomic(options.out / "sweep_runs.csv", per_run.str());
  if (std::isfinite(best)) {
    write_file_atomic(options.out / "sweep_best.txt",
                      "lambda_hit=" + format_double(sw.lambda_hit[result.best_hit]) +
                          "\nlambda_miss=" + format_double(sw.lambda_miss[result.best_miss]) +
                          "\nape_mean=" + format_double(best) + "\n");
  }
  if (options.write_plots) {
    fs::create_directories(options.out / "plots");
    const std::pair<std::size_t, std::size_t> cell{result.best_hit, result.best_miss};
    write_file_atomic(options.out / "plots" / "sweep_ape.svg",
                      heatmap_svg(sw.lambda_hit, sw.lambda_miss, result.ape, "Mean APE [m]",
                                  "lambda_hit", "lambda_miss", cell));
    write_file_atomic(options.out / "plots" / "sweep_rpe.svg",
                      heatmap_svg(sw.lambda_hit, sw.lambda_miss, result.rpe, "Mean RPE [m]",
                                  "lambda_hit", "lambda_miss", cell));
  }
  if (result.failures > 0) write_error_manifest(options.out / "errors.json", runs);
  return result;
}

}  // namespace semloc
