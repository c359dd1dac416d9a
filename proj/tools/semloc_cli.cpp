// semloc command-line front end.
//
//   semloc gen-world --scenario s.json --out dir
//   semloc simulate  --scenario s.json --seed 3 --out dir
//   semloc localize  --scenario s.json --seed 3 --method spf --out dir
//   semloc eval      --est a.traj --gt b.traj [--world world.txt] --out dir
//   semloc run       --scenario s.json [--seeds 1-20] [--workers 4] [--format json-lines]
//   semloc sweep     --scenario s.json [--seeds 1-5]
//   semloc replay    --log seed_3.log --map world.txt --scenario s.json --method spf --out dir
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure
// (details in <out>/errors.json).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "semloc/errors.hpp"
#include "semloc/eval.hpp"
#include "semloc/io.hpp"
#include "semloc/runner.hpp"
#include "semloc/scenario.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Failure after the configuration was accepted.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out;
  std::string method;
  int workers = 0;
  std::string format = "csv";
  bool print_config = false;
};

semloc::Scenario load(const Common& c) {
  if (c.scenario.empty()) throw semloc::ConfigError("--scenario", "a scenario file is required");
  semloc::Scenario s = semloc::load_scenario(c.scenario);
  try {
    if (!c.seeds.empty()) s.seeds = semloc::parse_seed_list(c.seeds);
    if (c.seed) s.seeds = {*c.seed};
    if (c.seed || !c.seeds.empty()) s.sweep.seeds = s.seeds;
  } catch (const semloc::InvalidArgument& e) {
    throw semloc::ConfigError("--seeds", e.what());
  }
  if (!c.out.empty()) s.output = c.out;
  if (c.workers > 0) s.workers = c.workers;
  if (!c.method.empty()) {
    try {
      s.methods = {semloc::method_from_string(c.method)};
    } catch (const semloc::InvalidArgument& e) {
      throw semloc::ConfigError("--method", e.what());
    }
  }
  if (c.print_config) std::cout << semloc::scenario_to_json(s);
  return s;
}

semloc::RunOptions options_for(const semloc::Scenario& s, const Common& c) {
  semloc::RunOptions o;
  o.out = s.output;
  o.workers = s.workers;
  o.format = c.format == "json-lines" ? semloc::MetricsFormat::json_lines : semloc::MetricsFormat::csv;
  return o;
}

std::uint64_t single_seed(const semloc::Scenario& s) {
  if (s.seeds.size() != 1) throw semloc::ConfigError("--seed", "exactly one seed is required");
  return s.seeds.front();
}

void write_manifest(const fs::path& out, const std::string& command, const std::string& error) {
  nlohmann::ordered_json doc;
  doc["failed_runs"] = nlohmann::ordered_json::array({{{"command", command}, {"error", error}}});
  fs::create_directories(out);
  semloc::write_file_atomic(out / "errors.json", doc.dump(2) + "\n");
}

int cmd_gen_world(const Common& c) {
  const auto s = load(c);
  const auto prepared = semloc::prepare_world(s);
  fs::create_directories(s.output);
  semloc::write_world_file(s.output / "world.txt", prepared.world);
  semloc::write_segments_file(s.output / "segments.txt", prepared.full_map);
  semloc::write_trajectory_file(s.output / "ground_truth.traj", prepared.ground_truth);
  std::cout << "world: " << prepared.world.landmark_count() << " landmarks in "
            << prepared.world.rows.size() << " rows, " << prepared.full_map.segments().size()
            << " wall segments, " << prepared.ground_truth.size() << " trajectory samples\n";
  return 0;
}

int cmd_simulate(const Common& c) {
  const auto s = load(c);
  const auto seed = single_seed(s);
  const auto prepared = semloc::prepare_world(s);
  const auto log = semloc::sensor_log_for(s, prepared, seed, s.output / "logs");
  semloc::write_trajectory_file(s.output / "ground_truth.traj", prepared.ground_truth);
  std::cout << "sensor log: " << log.records.size() << " records, key " << log.key << "\n";
  return 0;
}

void print_rows(const std::vector<semloc::MetricRow>& rows, const std::string& format) {
  if (format == "json-lines") {
    semloc::write_metrics_jsonl(std::cout, rows);
  } else {
    semloc::write_metrics_csv(std::cout, rows);
  }
}

int cmd_localize(const Common& c) {
  const auto s = load(c);
  const auto seed = single_seed(s);
  if (s.methods.size() != 1) throw semloc::ConfigError("--method", "exactly one method is required");
  const auto method = s.methods.front();
  const auto prepared = semloc::prepare_world(s);
  const auto log = semloc::sensor_log_for(s, prepared, seed, s.output / "logs");
  const auto r = semloc::run_method(s, prepared, method, s.filter_for(method), log);
  if (r.error) throw RuntimeFailure(*r.error);
  const std::string stem = std::string(semloc::to_string(method)) + "_seed_" + std::to_string(seed);
  semloc::write_trajectory_file(s.output / (stem + ".traj"), r.estimate);
  if (!r.diagnostics.empty()) {
    std::ostringstream diag;
    semloc::write_diagnostics(diag, r.diagnostics);
    semloc::write_file_atomic(s.output / (stem + ".diag.csv"), diag.str());
  }
  print_rows({semloc::to_row(std::string(semloc::to_string(method)), std::to_string(seed), r.report)},
             c.format);
  return 0;
}

int cmd_run(const Common& c) {
  const auto s = load(c);
  const auto opts = options_for(s, c);
  const auto summary = semloc::run_scenario(s, opts);
  std::vector<semloc::MetricRow> means;
  for (const auto& row : summary.rows) {
    if (row.seed == "mean") means.push_back(row);
  }
  print_rows(means, c.format);
  std::cout << "classless is a geometric surrogate over the wall map, not a grid-map AMCL port\n";
  std::cout << summary.results.size() - summary.failures << "/" << summary.results.size()
            << " runs succeeded; outputs in " << opts.out.string() << "\n";
  if (summary.failures > 0) {
    std::cerr << "error: " << summary.failures << " run(s) failed, see "
              << (opts.out / "errors.json").string() << "\n";
    return kExitRuntime;
  }
  return 0;
}

int cmd_sweep(const Common& c) {
  const auto s = load(c);
  const auto opts = options_for(s, c);
  const auto result = semloc::run_sweep(s, opts);
  const double best = result.ape[result.best_hit][result.best_miss];
  std::cout << "argmin lambda_hit=" << semloc::format_double(result.lambda_hit[result.best_hit])
            << " lambda_miss=" << semloc::format_double(result.lambda_miss[result.best_miss])
            << " mean APE=" << semloc::format_double(best) << "\n";
  if (result.failures > 0) {
    std::cerr << "error: " << result.failures << " run(s) failed, see "
              << (opts.out / "errors.json").string() << "\n";
    return kExitRuntime;
  }
  return 0;
}

int cmd_replay(const Common& c, const std::string& log_path, const std::string& map_path) {
  const auto s = load(c);
  if (s.methods.size() != 1) throw semloc::ConfigError("--method", "exactly one method is required");
  const auto method = s.methods.front();
  if (method == semloc::Method::gps_only) throw semloc::ConfigError("--method", "replay needs a filter method");
  semloc::SensorLog log;
  semloc::VineyardWorld world;
  try {
    log = semloc::read_sensor_log_file(log_path);
    world = semloc::read_world_file(map_path);
  } catch (const semloc::ParseError& e) {
    throw RuntimeFailure(std::string("schema mismatch: ") + e.what());
  }
  const auto survey = semloc::filter_survey(world.survey(), semloc::class_filter(method));
  const auto map = semloc::build_wall_map(survey);
  const semloc::ReplayOptions options{s.observation, s.fusion_radius, semloc::class_filter(method)};
  const auto run = semloc::run_filter(log, map, world.bounds, s.filter_for(method), options);
  const std::string stem = std::string(semloc::to_string(method)) + "_seed_" + std::to_string(log.seed);
  fs::create_directories(s.output);
  semloc::write_trajectory_file(s.output / (stem + ".traj"), run.estimate);
  std::ostringstream diag;
  semloc::write_diagnostics(diag, run.diagnostics);
  semloc::write_file_atomic(s.output / (stem + ".diag.csv"), diag.str());
  std::cout << "replayed " << log.records.size() << " records into "
            << (s.output / (stem + ".traj")).string() << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& est_path, const std::string& gt_path,
             const std::string& world_path, double max_dt) {
  const auto est = semloc::read_trajectory_file(est_path);
  const auto gt = semloc::read_trajectory_file(gt_path);
  const auto pairs = semloc::associate(est, gt, max_dt);
  semloc::MetricReport report;
  const auto a = semloc::ape(est, gt, pairs);
  report.ape_mean = a.mean;
  report.ape_std = a.std;
  if (pairs.size() > 1) {
    const auto r = semloc::rpe(est, gt, pairs);
    report.rpe_mean = r.mean;
    report.rpe_std = r.std;
  }
  report.row_acc = std::numeric_limits<double>::quiet_NaN();
  if (!world_path.empty()) {
    report.row_acc = semloc::row_accuracy(est, gt, pairs, semloc::read_world_file(world_path));
  }
  const std::vector<semloc::MetricRow> rows{
      semloc::to_row(c.method.empty() ? "est" : c.method, c.seed ? std::to_string(*c.seed) : "0", report)};
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ostringstream text;
    if (c.format == "json-lines") {
      semloc::write_metrics_jsonl(text, rows);
      semloc::write_file_atomic(fs::path(c.out) / "metrics.jsonl", text.str());
    } else {
      semloc::write_metrics_csv(text, rows);
      semloc::write_file_atomic(fs::path(c.out) / "metrics.csv", text.str());
    }
  }
  print_rows(rows, c.format);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic particle-filter localisation in synthetic vineyards"};
  app.require_subcommand(1);

  Common common;
  std::string log_path, map_path, est_path, gt_path, world_path;
  double max_dt = 0.05;

  auto add_common = [&](CLI::App* sub, bool scenario_required) {
    auto* opt = sub->add_option("--scenario", common.scenario, "Scenario file")->check(CLI::ExistingFile);
    if (scenario_required) opt->required();
    sub->add_option("--out", common.out, "Output directory (overrides the scenario)");
    sub->add_option("--workers", common.workers, "Parallel runs")->check(CLI::PositiveNumber);
    sub->add_option("--format", common.format, "Metrics format")
        ->check(CLI::IsMember({"csv", "json-lines"}));
    sub->add_flag("--print-config", common.print_config, "Print the resolved scenario");
  };

  auto* gen = app.add_subcommand("gen-world", "Write world, wall segments and ground truth");
  add_common(gen, true);

  auto* sim = app.add_subcommand("simulate", "Simulate (or reuse) the sensor log of one seed");
  add_common(sim, true);
  sim->add_option("--seed", common.seed, "Seed")->required();

  auto* loc = app.add_subcommand("localize", "Run one method on one seed");
  add_common(loc, true);
  loc->add_option("--seed", common.seed, "Seed")->required();
  loc->add_option("--method", common.method, "Method")->required();

  auto* ev = app.add_subcommand("eval", "APE, RPE and row accuracy of a trajectory file");
  add_common(ev, false);
  ev->add_option("--est", est_path, "Estimated trajectory")->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", gt_path, "Ground-truth trajectory")->required()->check(CLI::ExistingFile);
  ev->add_option("--world", world_path, "World file for row accuracy")->check(CLI::ExistingFile);
  ev->add_option("--max-dt", max_dt, "Association window [s]");
  ev->add_option("--method", common.method, "Method label for the output row");
  ev->add_option("--seed", common.seed, "Seed label for the output row");

  auto* run = app.add_subcommand("run", "Every method on every seed, with metrics and plots");
  add_common(run, true);
  run->add_option("--seeds", common.seeds, "Seed list, e.g. 1-20 or 1,4,9");
  run->add_option("--seed", common.seed, "Single seed");
  run->add_option("--method", common.method, "Restrict to one method");

  auto* sweep = app.add_subcommand("sweep", "lambda_hit x lambda_miss grid");
  add_common(sweep, true);
  sweep->add_option("--seeds", common.seeds, "Seed list");

  auto* replay = app.add_subcommand("replay", "Filter a stored sensor log");
  add_common(replay, true);
  replay->add_option("--log", log_path, "Sensor log")->required()->check(CLI::ExistingFile);
  replay->add_option("--map", map_path, "World or map file")->required()->check(CLI::ExistingFile);
  replay->add_option("--method", common.method, "Method")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "gen-world") return cmd_gen_world(common);
    if (command == "simulate") return cmd_simulate(common);
    if (command == "localize") return cmd_localize(common);
    if (command == "eval") return cmd_eval(common, est_path, gt_path, world_path, max_dt);
    if (command == "run") return cmd_run(common);
    if (command == "sweep") return cmd_sweep(common);
    if (command == "replay") return cmd_replay(common, log_path, map_path);
  } catch (const semloc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    const fs::path out = common.out.empty() ? fs::path("out") : fs::path(common.out);
    try {
      write_manifest(out, command, e.what());
      std::cerr << "details in " << (out / "errors.json").string() << "\n";
    } catch (const std::exception&) {
    }
    return kExitRuntime;
  }
  return kExitConfig;
}
