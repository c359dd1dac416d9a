// Acceptance harness: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   semloc_acceptance --scenario scenarios/default.json --work DIR [--only 1,2,5] [--workers N]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "semloc/errors.hpp"
#include "semloc/eval.hpp"
#include "semloc/filter.hpp"
#include "semloc/io.hpp"
#include "semloc/likelihood.hpp"
#include "semloc/random.hpp"
#include "semloc/runner.hpp"
#include "semloc/scenario.hpp"
#include "semloc/semmap.hpp"
#include "semloc/worldsim.hpp"

namespace fs = std::filesystem;
using namespace semloc;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Context {
  Scenario scenario;
  fs::path work;
  int workers = 1;
  // Shared forward run of the default scenario (criteria 5, 6, 7, 10).
  std::optional<RunSummary> forward;
  double forward_seconds = 0.0;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunOptions options(const Context& ctx, const fs::path& out) {
  RunOptions o;
  o.out = out;
  o.workers = ctx.workers;
  return o;
}

const RunSummary& forward_run(Context& ctx) {
  if (!ctx.forward) {
    fs::remove_all(ctx.work / "forward");
    const auto t0 = Clock::now();
    ctx.forward = run_scenario(ctx.scenario, options(ctx, ctx.work / "forward"));
    ctx.forward_seconds = seconds_since(t0);
  }
  return *ctx.forward;
}

// Per-seed reports of one method, in seed order.
std::vector<MetricReport> reports_of(const RunSummary& s, Method m) {
  std::vector<MetricReport> out;
  for (const auto& r : s.results) {
    if (r.method == m) out.push_back(r.report);
  }
  return out;
}

double mean_ape(const std::vector<MetricReport>& rs) {
  double sum = 0.0;
  for (const auto& r : rs) sum += r.ape_mean;
  return sum / static_cast<double>(rs.size());
}

double win_rate(const std::vector<MetricReport>& a, const std::vector<MetricReport>& b,
                const std::function<bool(const MetricReport&, const MetricReport&)>& wins) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += wins(a[i], b[i]) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(a.size());
}

Verdict raycast_oracle(Context&) {
  const auto t0 = Clock::now();
  Rng rng(20240611);
  std::size_t cases = 0, mismatches = 0;
  std::string first_mismatch;
  for (int world_index = 0; world_index < 40; ++world_index) {
    WorldSpec spec;
    spec.rows = 2 + static_cast<int>(rng() % 9);
    spec.row_length = 2.0 * static_cast<double>(4 + rng() % 17);  // up to 21 landmarks per row
    spec.pitch = 2.0;
    spec.row_spacing = uniform(rng, 1.5, 3.0);
    spec.pole_every = 2 + static_cast<int>(rng() % 5);
    spec.jitter = uniform(rng, 0.0, 0.3);
    spec.seed = rng();
    const VineyardWorld world = generate_vineyard(spec);
    const WallMap map = build_wall_map(world.survey());
    const auto& lm = map.landmarks();
    for (int k = 0; k < 300; ++k, ++cases) {
      const Vec2 origin{uniform(rng, world.bounds.min_x - 2.0, world.bounds.max_x + 2.0),
                        uniform(rng, world.bounds.min_y - 2.0, world.bounds.max_y + 2.0)};
      double bearing = uniform(rng, -std::numbers::pi, std::numbers::pi);
      if (k % 10 == 0) {
        // Aim at a landmark so shared segment endpoints are exercised.
        const Vec2 target = lm[rng() % lm.size()].landmark.position;
        bearing = std::atan2(target.y - origin.y, target.x - origin.x);
      }
      const double max_range = uniform(rng, 0.5, 12.0);
      const auto got = map.raycast(origin, bearing, max_range);
      const auto want = oracle::brute_raycast(map.segments(), origin, bearing, max_range);
      bool ok = got.has_value() == want.has_value();
      if (ok && got) {
        ok = std::fabs(got->range - static_cast<double>(want->range)) <= 1e-9 && got->cls == want->cls;
      }
      if (!ok) {
        ++mismatches;
        if (first_mismatch.empty()) {
          std::ostringstream s;
          s << "world " << world_index << " origin (" << origin.x << ", " << origin.y << ") bearing "
            << bearing;
          first_mismatch = s.str();
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  Verdict v;
  v.pass = cases >= 10000 && mismatches == 0 && elapsed < 10.0;
  v.detail = std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches, " +
             fmt(elapsed, 3) + " s" + (first_mismatch.empty() ? "" : "; first: " + first_mismatch);
  return v;
}

Verdict likelihood_examples(Context&) {
  std::vector<std::string> failed;
  std::size_t checked = 0;
  auto near = [&](const std::string& name, double got, double want) {
    ++checked;
    if (!(std::fabs(got - want) <= 1e-12)) failed.push_back(name + "=" + fmt(got, 17));
  };

  // Pole wall along x = 3, trunk wall along y = 3.
  const std::vector<SurveyEntry> survey{{0, 0, {{3, -5}, SemanticClass::pole}},
                                        {0, 1, {{3, 5}, SemanticClass::pole}},
                                        {1, 0, {{-5, 3}, SemanticClass::trunk}},
                                        {1, 1, {{5, 3}, SemanticClass::trunk}}};
  const WallMap map = build_wall_map(survey);
  const Pose2D origin{0, 0, 0};
  LikelihoodParams p;

  near("correct hit", observation_loglik({SemanticClass::pole, 3.0, 0.0}, origin, map, p), 0.0);
  near("miss", observation_loglik({SemanticClass::pole, 3.0, std::numbers::pi}, origin, map, p), -32.0);
  near("incorrect hit", observation_loglik({SemanticClass::trunk, 3.0, 0.0}, origin, map, p), -32.0);
  near("background hit", observation_loglik({SemanticClass::background, 3.0, 0.0}, origin, map, p), 0.0);

  LikelihoodParams half = p;
  half.class_weights.trunk = 0.5;
  SemanticScan scan;
  scan.observations = {{SemanticClass::pole, 1.0, 0.0}, {SemanticClass::trunk, 1.0, std::numbers::pi / 2}};
  near("weighted mean", semantic_loglik(scan, origin, map, half).log_obs, -6.0);
  near("empty scan", semantic_loglik(SemanticScan{}, origin, map, p).log_obs, 0.0);

  const GpsFix fix{{0, 0}, 1.0};
  near("gps at fix", gps_loglik({0, 0, 0}, fix, 1.5), 0.0);
  near("gps at sigma", gps_loglik({0, 1.5, 0}, fix, 1.5), -0.5);
  near("gps at 2 sigma", gps_loglik({3.0, 0, 0}, fix, 1.5), -2.0);

  near("alpha n=0", blend_alpha(0, 4, 0.05, 0.95), 0.95);
  near("alpha n=4", blend_alpha(4, 4, 0.05, 0.95), 0.5);
  near("alpha n=1000", blend_alpha(1000, 4, 0.05, 0.95), 0.05);

  near("combined", combined_loglik(-6.0, -2.0, 0.5), -4.0);
  near("combined ceil", combined_loglik(-100.0, 0.0, 0.95), -5.0);
  near("combined no fix", combined_loglik(-7.25, std::nullopt, 0.5), -7.25);

  const std::vector<double> two{0.0, std::log(3.0)};
  const auto w = normalize_weights(two);
  near("softmax[0]", w[0], 0.25);
  near("softmax[1]", w[1], 0.75);
  const std::vector<double> equal(4, -3.0);
  for (const double x : normalize_weights(equal)) near("uniform", x, 0.25);

  Verdict v;
  v.pass = failed.empty();
  std::ostringstream s;
  s << checked << " examples at 1e-12";
  for (const auto& f : failed) s << "; failed " << f;
  v.detail = s.str();
  return v;
}

Verdict softmax_properties(Context&) {
  Rng rng(99);
  std::size_t bad_sum = 0, bad_shift = 0, bad_argmax = 0, bad_oracle = 0;
  const std::size_t vectors = 1000;
  for (std::size_t k = 0; k < vectors; ++k) {
    const std::size_t n = 1 + rng() % 600;
    const double scale = std::pow(10.0, uniform(rng, -2.0, 3.0));
    std::vector<double> ll(n);
    for (auto& x : ll) x = uniform(rng, -scale, scale);
    const auto w = normalize_weights(ll);
    double sum = 0.0;
    for (const double x : w) sum += x;
    if (std::fabs(sum - 1.0) > 1e-9) ++bad_sum;

    const double c = uniform(rng, -1000.0, 1000.0);
    std::vector<double> shifted(ll);
    for (auto& x : shifted) x += c;
    const auto ws = normalize_weights(shifted);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::fabs(ws[i] - w[i]) > 1e-9) {
        ++bad_shift;
        break;
      }
    }
    const auto arg_ll = std::max_element(ll.begin(), ll.end()) - ll.begin();
    const auto arg_w = std::max_element(w.begin(), w.end()) - w.begin();
    if (arg_ll != arg_w) ++bad_argmax;

    const auto ref = oracle::softmax(ll);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::fabs(w[i] - static_cast<double>(ref[i])) > 1e-12) {
        ++bad_oracle;
        break;
      }
    }
  }
  Verdict v;
  v.pass = bad_sum + bad_shift + bad_argmax + bad_oracle == 0;
  v.detail = std::to_string(vectors) + " vectors; violations: sum " + std::to_string(bad_sum) + ", shift " +
             std::to_string(bad_shift) + ", argmax " + std::to_string(bad_argmax) + ", oracle " +
             std::to_string(bad_oracle);
  return v;
}

Verdict cep_calibration(Context&) {
  Rng rng(derive_seed(4, 1));
  const Pose2D pose{12.0, -3.0, 0.4};
  std::vector<double> radial(100000);
  for (auto& r : radial) r = distance(sample_gps(pose, 2.0, rng).position, pose.position());
  std::nth_element(radial.begin(), radial.begin() + radial.size() / 2, radial.end());
  const double median = radial[radial.size() / 2];
  Verdict v;
  v.pass = std::fabs(median - 2.0) <= 0.05 * 2.0;
  v.detail = "median radial error " + fmt(median) + " m over 1e5 samples (target 2.0 m +/- 5%)";
  return v;
}

Verdict method_ordering(Context& ctx) {
  const auto& run = forward_run(ctx);
  const auto spf = reports_of(run, Method::spf);
  const auto classless = reports_of(run, Method::classless);
  const auto gps = reports_of(run, Method::gps_only);
  const auto lower = [](const MetricReport& a, const MetricReport& b) { return a.ape_mean < b.ape_mean; };
  const double win_c = win_rate(spf, classless, lower);
  const double win_g = win_rate(spf, gps, lower);
  const double m_spf = mean_ape(spf), m_c = mean_ape(classless), m_g = mean_ape(gps);
  Verdict v;
  v.pass = run.failures == 0 && m_spf < m_c && m_spf < m_g && win_c >= 0.8 && win_g >= 0.8 &&
           ctx.forward_seconds < 600.0;
  v.detail = "mean APE spf " + fmt(m_spf) + " classless " + fmt(m_c) + " gps_only " + fmt(m_g) +
             "; per-seed wins vs classless " + fmt(100 * win_c, 3) + "%, vs gps_only " + fmt(100 * win_g, 3) +
             "%; " + std::to_string(run.results.size()) + " runs in " + fmt(ctx.forward_seconds, 4) + " s";
  return v;
}

Verdict ablation_trends(Context& ctx) {
  const auto& run = forward_run(ctx);
  const double m_spf = mean_ape(reports_of(run, Method::spf));
  const double m_nogps = mean_ape(reports_of(run, Method::spf_nogps));
  const double m_poles = mean_ape(reports_of(run, Method::poles_only));
  const double m_trunks = mean_ape(reports_of(run, Method::trunks_only));

  Scenario reversed = ctx.scenario;
  reversed.trajectory.reversed = true;
  reversed.methods = {Method::spf};
  fs::remove_all(ctx.work / "reversed");
  RunOptions o = options(ctx, ctx.work / "reversed");
  o.write_plots = false;
  const RunSummary rev = run_scenario(reversed, o);
  const double m_rev = mean_ape(reports_of(rev, Method::spf));

  const bool a = m_nogps >= 2.0 * m_spf;
  const bool b = m_poles < m_trunks;
  const bool c = rev.failures == 0 && std::fabs(m_rev - m_spf) <= 0.5 * m_spf;
  Verdict v;
  v.pass = a && b && c;
  v.detail = std::string("(a) ") + (a ? "ok" : "FAIL") + " spf_nogps/spf = " + fmt(m_nogps / m_spf, 3) +
             "; (b) " + (b ? "ok" : "FAIL") + " poles_only " + fmt(m_poles) + " < trunks_only " +
             fmt(m_trunks) + "; (c) " + (c ? "ok" : "FAIL") + " reversed spf " + fmt(m_rev) + " vs forward " +
             fmt(m_spf) + " (" + fmt(100.0 * (m_rev - m_spf) / m_spf, 3) + "%)";
  return v;
}

Verdict row_accuracy_trend(Context& ctx) {
  const auto& run = forward_run(ctx);
  const auto spf = reports_of(run, Method::spf);
  const auto classless = reports_of(run, Method::classless);
  const double win = win_rate(spf, classless,
                              [](const MetricReport& a, const MetricReport& b) { return a.row_acc > b.row_acc; });
  double acc_spf = 0.0, acc_c = 0.0;
  for (std::size_t i = 0; i < spf.size(); ++i) {
    acc_spf += spf[i].row_acc / static_cast<double>(spf.size());
    acc_c += classless[i].row_acc / static_cast<double>(spf.size());
  }
  Verdict v;
  v.pass = win >= 0.8;
  v.detail = "spf row accuracy above classless on " + fmt(100 * win, 3) + "% of seeds; mean row accuracy spf " +
             fmt(acc_spf, 3) + " classless " + fmt(acc_c, 3);
  return v;
}

Verdict sweep_sanity(Context& ctx) {
  Scenario s = ctx.scenario;
  s.sweep.lambda_hit = {1.0, 3.0, 5.0};
  s.sweep.lambda_miss = {1.0, 3.0, 5.0};
  s.sweep.seeds = {1, 2, 3, 4, 5};
  const fs::path out = ctx.work / "sweep";
  fs::remove_all(out);
  const SweepResult r = run_sweep(s, options(ctx, out));
  std::ifstream in(out / "sweep_ape.csv");
  const MatrixCsv m = read_matrix_csv(in);
  bool shape = m.values.size() == 3;
  for (const auto& row : m.values) shape = shape && row.size() == 3;
  bool minimal = shape;
  bool consistent = shape;
  std::size_t bi = 0, bj = 0;
  if (shape) {
    const double best = m.values[r.best_hit][r.best_miss];
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        minimal = minimal && best <= m.values[i][j];
        consistent = consistent && m.values[i][j] == r.ape[i][j];
        if (m.values[i][j] < m.values[bi][bj]) bi = i, bj = j;
      }
    }
  }
  const bool same_argmin = bi == r.best_hit && bj == r.best_miss;
  const std::string best_txt = slurp(out / "sweep_best.txt");
  const bool reported = best_txt.find("lambda_hit=" + format_double(r.lambda_hit[r.best_hit])) != std::string::npos &&
                        best_txt.find("lambda_miss=" + format_double(r.lambda_miss[r.best_miss])) != std::string::npos;
  Verdict v;
  v.pass = r.failures == 0 && minimal && consistent && same_argmin && reported;
  std::ostringstream s_out;
  s_out << "3x3 grid, 5 seeds; argmin (lambda_hit " << r.lambda_hit[r.best_hit] << ", lambda_miss "
        << r.lambda_miss[r.best_miss] << ") APE " << (shape ? fmt(m.values[r.best_hit][r.best_miss]) : "?")
        << "; minimal " << minimal << ", csv consistent " << consistent << ", recomputed argmin agrees "
        << same_argmin << ", best file agrees " << reported;
  v.detail = s_out.str();
  return v;
}

Verdict metric_oracle(Context&) {
  Rng rng(7);
  std::size_t trials = 0, bad = 0;
  for (int k = 0; k < 500; ++k, ++trials) {
    const std::size_t n = 3 + rng() % 200;
    Trajectory gt, est;
    Pose2D g{0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      g.x += gaussian(rng, 0.3);
      g.y += gaussian(rng, 0.3);
      g.theta = normalize_angle(g.theta + gaussian(rng, 0.2));
      const double t = 0.5 * static_cast<double>(i);
      gt.samples.push_back({t, g});
      est.samples.push_back({t, {g.x + gaussian(rng, 1.0), g.y + gaussian(rng, 1.0), g.theta}});
    }
    const auto pairs = associate(est, gt, 0.05);
    if (pairs != oracle::pair_by_time(est, gt)) {
      ++bad;
      continue;
    }
    const auto a = ape(est, gt, pairs);
    const auto ra = oracle::brute_ape(est, gt, pairs);
    const auto r = rpe(est, gt, pairs);
    const auto rr = oracle::brute_rpe(est, gt, pairs, 1);
    const auto close = [](double x, long double y) { return std::fabs(x - static_cast<double>(y)) <= 1e-12; };
    if (!close(a.mean, ra.mean) || !close(a.std, ra.std) || !close(r.mean, rr.mean) || !close(r.std, rr.std)) ++bad;
  }

  // Constant dyadic offsets keep every coordinate difference exact.
  Trajectory gt;
  for (int i = 0; i < 64; ++i) gt.samples.push_back({0.25 * i, {0.125 * i, 0.5 * (i % 3), 0.0}});
  Trajectory est = gt;
  for (auto& s : est.samples) s.pose.y += (s.t < 8 ? 0.0625 : -0.03125);
  Trajectory moved = est;
  for (auto& s : moved.samples) {
    s.pose.x += 16.0;
    s.pose.y -= 8.0;
  }
  const auto pairs = associate(est, gt, 0.0);
  const bool exact = rpe_errors(est, gt, pairs) == rpe_errors(moved, gt, pairs);

  Verdict v;
  v.pass = bad == 0 && exact;
  v.detail = std::to_string(trials) + " random pairs, " + std::to_string(bad) + " disagreements at 1e-12; " +
             "offset invariance " + (exact ? "exact" : "VIOLATED");
  return v;
}

Verdict determinism(Context& ctx) {
  const auto& first = forward_run(ctx);
  (void)first;
  const fs::path a = ctx.work / "forward";
  const fs::path b = ctx.work / "determinism";
  fs::remove_all(b);
  run_scenario(ctx.scenario, options(ctx, b));
  std::size_t compared = 0, differing = 0;
  std::string first_diff;
  auto compare = [&](const fs::path& rel) {
    ++compared;
    if (slurp(a / rel) != slurp(b / rel) || !fs::exists(b / rel)) {
      ++differing;
      if (first_diff.empty()) first_diff = rel.string();
    }
  };
  compare("metrics.csv");
  for (const auto& e : fs::recursive_directory_iterator(a / "runs")) {
    if (e.is_regular_file() && e.path().extension() == ".traj") compare(fs::relative(e.path(), a));
  }
  Verdict v;
  v.pass = differing == 0 && compared > 1;
  v.detail = std::to_string(compared) + " files compared byte for byte (fresh sensor logs), " +
             std::to_string(differing) + " differ" + (first_diff.empty() ? "" : ", first " + first_diff);
  return v;
}

Verdict noiseless_closed_loop(Context&) {
  Scenario s = parse_scenario(R"({"schema": "semloc-scenario v1", "world": {"rows": 2, "row_length": 20.0}})");
  s.sensors.motion_noise = {};
  s.sensors.scan.noise_sigma = 0.0;
  s.sensors.detector.range_noise_sigma = 0.0;
  s.sensors.detector.false_positive_rate = 0.0;
  s.sensors.gps_every = 0;
  const PreparedWorld prepared = prepare_world(s);
  const SensorLog log = simulate_sensors(prepared.world, prepared.ground_truth, s.sensors, 5);

  FilterConfig c = s.filter;
  c.init = InitMode::known_pose;
  c.init_pose = log.start_pose;
  c.init_position_sigma = 0.0;
  c.init_heading_sigma = 0.0;
  c.use_gps = false;
  c.motion_noise = {};
  const FilterRun run = run_filter(log, prepared.full_map, prepared.world.bounds, c, ReplayOptions{});
  const auto pairs = associate(run.estimate, prepared.ground_truth, 1e-9);
  double worst = 0.0;
  for (const auto& [i, j] : pairs) {
    worst = std::max(worst, distance(run.estimate.samples[i].pose.position(),
                                     prepared.ground_truth.samples[j].pose.position()));
  }
  Verdict v;
  v.pass = pairs.size() == run.estimate.size() && worst <= 1e-6;
  v.detail = std::to_string(pairs.size()) + " steps on a 2-row world, max position error " + fmt(worst, 3) + " m";
  return v;
}

struct Criterion {
  int id;
  const char* name;
  Verdict (*check)(Context&);
};

const std::vector<Criterion> kCriteria{
    {1, "raycast oracle equivalence", raycast_oracle},
    {2, "likelihood examples", likelihood_examples},
    {3, "softmax invariants", softmax_properties},
    {4, "CEP calibration", cep_calibration},
    {5, "method ordering (APE)", method_ordering},
    {6, "ablation trends", ablation_trends},
    {7, "row accuracy", row_accuracy_trend},
    {8, "sweep self-consistency", sweep_sanity},
    {9, "metric oracle", metric_oracle},
    {10, "determinism", determinism},
    {11, "noiseless closed loop", noiseless_closed_loop},
};

}  // namespace

int main(int argc, char** argv) {
  fs::path scenario_path = "scenarios/default.json";
  fs::path work = fs::temp_directory_path() / "semloc_acceptance";
  std::set<int> only;
  int workers = 1;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (i + 1 >= argc) {
      std::cerr << "missing value for " << arg << "\n";
      return 2;
    }
    const std::string value = argv[++i];
    if (arg == "--scenario") {
      scenario_path = value;
    } else if (arg == "--work") {
      work = value;
    } else if (arg == "--workers") {
      workers = std::stoi(value);
    } else if (arg == "--only") {
      for (const auto id : parse_seed_list(value)) only.insert(static_cast<int>(id));
    } else {
      std::cerr << "unknown argument " << arg << "\n";
      return 2;
    }
  }

  Context ctx;
  try {
    ctx.scenario = load_scenario(scenario_path);
  } catch (const std::exception& e) {
    std::cerr << "cannot load scenario: " << e.what() << "\n";
    return 2;
  }
  ctx.work = work;
  ctx.workers = workers;
  fs::create_directories(work);

  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = c.check(ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << "criterion " << c.id << " [" << c.name << "]: " << (v.pass ? "PASS" : "FAIL") << " ("
              << v.detail << "; " << fmt(seconds_since(t0), 4) << " s)" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criterion/criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
