#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "semloc/errors.hpp"
#include "semloc/eval.hpp"
#include "semloc/io.hpp"
#include "semloc/likelihood.hpp"
#include "semloc/projection.hpp"
#include "semloc/runner.hpp"
#include "semloc/scenario.hpp"
#include "semloc/semmap.hpp"
#include "semloc/worldsim.hpp"

namespace py = pybind11;
using namespace semloc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Trajectories cross the boundary as (N, 4) arrays of t, x, y, theta.
Array to_array(const Trajectory& t) {
  Array out({static_cast<py::ssize_t>(t.size()), py::ssize_t{4}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& s = t.samples[i];
    v(i, 0) = s.t;
    v(i, 1) = s.pose.x;
    v(i, 2) = s.pose.y;
    v(i, 3) = s.pose.theta;
  }
  return out;
}

Trajectory from_array(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 4) throw InvalidArgument("trajectory array must have shape (N, 4)");
  const auto v = a.unchecked<2>();
  Trajectory t;
  t.samples.reserve(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) t.samples.push_back({v(i, 0), {v(i, 1), v(i, 2), v(i, 3)}});
  t.validate();
  return t;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["ape_mean"] = r.ape_mean;
  d["ape_std"] = r.ape_std;
  d["rpe_mean"] = r.rpe_mean;
  d["rpe_std"] = r.rpe_std;
  d["row_acc"] = r.row_acc;
  return d;
}

py::list rows_list(const std::vector<MetricRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["method"] = r.method;
    d["seed"] = r.seed;
    d["ape_mean"] = r.ape_mean;
    d["ape_std"] = r.ape_std;
    d["rpe_mean"] = r.rpe_mean;
    d["rpe_std"] = r.rpe_std;
    d["row_acc"] = r.row_acc;
    out.append(d);
  }
  return out;
}

py::object hit_object(const RaycastResult& hit) {
  if (!hit) return py::none();
  return py::make_tuple(hit->range, std::string(to_string(hit->cls)));
}

MetricsFormat format_from(const std::string& name) {
  if (name == "csv") return MetricsFormat::csv;
  if (name == "json-lines") return MetricsFormat::json_lines;
  throw ConfigError("format", "expected csv or json-lines");
}

}  // namespace

PYBIND11_MODULE(_semloc, m) {
  m.doc() = "Semantic particle-filter localisation in synthetic vineyards";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());

  py::class_<WorldSpec>(m, "WorldSpec")
      .def(py::init<>())
      .def_readwrite("rows", &WorldSpec::rows)
      .def_readwrite("row_length", &WorldSpec::row_length)
      .def_readwrite("pitch", &WorldSpec::pitch)
      .def_readwrite("row_spacing", &WorldSpec::row_spacing)
      .def_readwrite("headland_depth", &WorldSpec::headland_depth)
      .def_readwrite("pole_every", &WorldSpec::pole_every)
      .def_readwrite("pole_offset", &WorldSpec::pole_offset)
      .def_readwrite("jitter", &WorldSpec::jitter)
      .def_readwrite("seed", &WorldSpec::seed);

  py::class_<VineyardWorld>(m, "World")
      .def_property_readonly("row_count", [](const VineyardWorld& w) { return w.rows.size(); })
      .def_property_readonly("landmark_count", &VineyardWorld::landmark_count)
      .def_readonly("row_spacing", &VineyardWorld::row_spacing)
      .def_property_readonly("bounds",
                             [](const VineyardWorld& w) {
                               return py::make_tuple(w.bounds.min_x, w.bounds.min_y, w.bounds.max_x,
                                                     w.bounds.max_y);
                             })
      .def(
          "landmarks",
          [](const VineyardWorld& w) {
            py::list out;
            for (const auto& e : w.survey()) {
              out.append(py::make_tuple(e.row_id, e.landmark.position.x, e.landmark.position.y,
                                        std::string(to_string(e.landmark.cls))));
            }
            return out;
          },
          "List of (row_id, x, y, class) tuples.")
      .def("save", [](const VineyardWorld& w, const std::filesystem::path& p) { write_world_file(p, w); });

  m.def("generate_world", &generate_vineyard, py::arg("spec") = WorldSpec{});
  m.def("load_world", &read_world_file, py::arg("path"));

  py::class_<WallMap>(m, "WallMap")
      .def(py::init([](const VineyardWorld& w) { return build_wall_map(w.survey()); }), py::arg("world"))
      .def_property_readonly("segment_count", [](const WallMap& map) { return map.segments().size(); })
      .def(
          "segments",
          [](const WallMap& map) {
            py::list out;
            for (const auto& s : map.segments()) {
              out.append(py::make_tuple(s.row_id, s.a.x, s.a.y, s.b.x, s.b.y, std::string(to_string(s.cls))));
            }
            return out;
          },
          "List of (row_id, ax, ay, bx, by, class) tuples.")
      .def(
          "raycast",
          [](const WallMap& map, double x, double y, double bearing, double max_range) {
            return hit_object(map.raycast({x, y}, bearing, max_range));
          },
          py::arg("x"), py::arg("y"), py::arg("bearing"), py::arg("max_range"),
          "(range, class) of the nearest wall hit, or None.")
      .def(
          "raycast_batch",
          [](const WallMap& map, double x, double y, const Array& bearings, double max_range) {
            const auto b = bearings.unchecked<1>();
            std::vector<double> in(static_cast<std::size_t>(b.shape(0)));
            for (py::ssize_t i = 0; i < b.shape(0); ++i) in[static_cast<std::size_t>(i)] = b(i);
            std::vector<RaycastResult> hits;
            {
              py::gil_scoped_release release;
              hits = map.raycast_batch({x, y}, in, max_range);
            }
            Array ranges(static_cast<py::ssize_t>(hits.size()));
            auto r = ranges.mutable_unchecked<1>();
            py::list classes;
            for (std::size_t i = 0; i < hits.size(); ++i) {
              r(i) = hits[i] ? hits[i]->range : std::numeric_limits<double>::infinity();
              classes.append(hits[i] ? py::object(py::str(std::string(to_string(hits[i]->cls)))) : py::object(py::none()));
            }
            return py::make_tuple(ranges, classes);
          },
          py::arg("x"), py::arg("y"), py::arg("bearings"), py::arg("max_range"),
          "Ranges (inf on a miss) and classes (None on a miss) for many bearings.");

  m.def(
      "pixel_to_camera",
      [](double u, double v, double depth, double fx, double fy, double cx, double cy) {
        CameraIntrinsics k;
        k.fx = fx;
        k.fy = fy;
        k.cx = cx;
        k.cy = cy;
        const auto p = pixel_to_camera(u, v, depth, k);
        return py::make_tuple(p.x, p.y, p.z);
      },
      py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"));

  m.def("cep_to_sigma", &cep_to_sigma, py::arg("cep"));
  m.def(
      "gps_loglik",
      [](double px, double py_, double fx, double fy, double sigma) {
        return gps_loglik({px, py_, 0.0}, GpsFix{{fx, fy}, sigma}, sigma);
      },
      py::arg("x"), py::arg("y"), py::arg("fix_x"), py::arg("fix_y"), py::arg("sigma_gps"));
  m.def("blend_alpha", &blend_alpha, py::arg("n_sem"), py::arg("k_scale") = 4.0, py::arg("floor") = 0.05,
        py::arg("ceil") = 0.95);
  m.def("combined_loglik", &combined_loglik, py::arg("log_obs"), py::arg("log_gps"), py::arg("alpha"));
  m.def(
      "normalize_weights",
      [](const Array& logliks) {
        const auto v = logliks.unchecked<1>();
        std::vector<double> in(static_cast<std::size_t>(v.shape(0)));
        for (py::ssize_t i = 0; i < v.shape(0); ++i) in[static_cast<std::size_t>(i)] = v(i);
        const auto w = normalize_weights(in);
        Array out(static_cast<py::ssize_t>(w.size()));
        std::copy(w.begin(), w.end(), out.mutable_data());
        return out;
      },
      py::arg("logliks"));

  m.def(
      "evaluate",
      [](const Array& est, const Array& gt, const VineyardWorld& world, double max_dt) {
        return report_dict(evaluate(from_array(est), from_array(gt), world, max_dt));
      },
      py::arg("est"), py::arg("gt"), py::arg("world"), py::arg("max_dt") = 0.05,
      "APE, RPE and row accuracy of (N, 4) trajectory arrays.");
  m.def("load_trajectory", [](const std::filesystem::path& p) { return to_array(read_trajectory_file(p)); },
        py::arg("path"));

  py::class_<Scenario>(m, "Scenario")
      .def_readwrite("name", &Scenario::name)
      .def_readwrite("output", &Scenario::output)
      .def_readwrite("workers", &Scenario::workers)
      .def_property(
          "seeds", [](const Scenario& s) { return s.seeds; },
          [](Scenario& s, const std::vector<std::uint64_t>& seeds) {
            if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
            s.seeds = seeds;
          })
      .def_property(
          "methods",
          [](const Scenario& s) {
            std::vector<std::string> out;
            for (const auto m : s.methods) out.emplace_back(to_string(m));
            return out;
          },
          [](Scenario& s, const std::vector<std::string>& names) {
            std::vector<Method> methods;
            for (const auto& n : names) methods.push_back(method_from_string(n));
            s.methods = methods;
          })
      .def("to_json", &scenario_to_json)
      .def("world", [](const Scenario& s) { return prepare_world(s).world; })
      .def("ground_truth", [](const Scenario& s) { return to_array(prepare_world(s).ground_truth); });

  m.def("parse_scenario", &parse_scenario, py::arg("text"));
  m.def("load_scenario", &load_scenario, py::arg("path"));

  m.def(
      "run",
      [](const Scenario& s, const std::filesystem::path& out, int workers, const std::string& format,
         bool plots) {
        RunOptions o;
        o.out = out.empty() ? s.output : out;
        o.workers = workers > 0 ? workers : s.workers;
        o.format = format_from(format);
        o.write_plots = plots;
        RunSummary summary;
        {
          py::gil_scoped_release release;
          summary = run_scenario(s, o);
        }
        return py::make_tuple(rows_list(summary.rows), summary.failures);
      },
      py::arg("scenario"), py::arg("out") = std::filesystem::path{}, py::arg("workers") = 0,
      py::arg("format") = "csv", py::arg("plots") = true,
      "Runs every (method, seed) pair; returns (metric rows, failure count).");

  m.def(
      "sweep",
      [](const Scenario& s, const std::filesystem::path& out, int workers) {
        RunOptions o;
        o.out = out.empty() ? s.output : out;
        o.workers = workers > 0 ? workers : s.workers;
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = run_sweep(s, o);
        }
        py::dict d;
        d["lambda_hit"] = r.lambda_hit;
        d["lambda_miss"] = r.lambda_miss;
        d["ape"] = r.ape;
        d["rpe"] = r.rpe;
        d["best"] = py::make_tuple(r.lambda_hit[r.best_hit], r.lambda_miss[r.best_miss]);
        d["failures"] = r.failures;
        return d;
      },
      py::arg("scenario"), py::arg("out") = std::filesystem::path{}, py::arg("workers") = 0);

  m.def(
      "localize",
      [](const Scenario& s, const std::string& method_name, std::uint64_t seed) {
        const Method method = method_from_string(method_name);
        RunResult r;
        {
          py::gil_scoped_release release;
          const PreparedWorld prepared = prepare_world(s);
          const SensorLog log = sensor_log_for(s, prepared, seed, {});
          r = run_method(s, prepared, method, s.filter_for(method), log);
        }
        if (r.error) throw Error(*r.error);
        return py::make_tuple(to_array(r.estimate), report_dict(r.report));
      },
      py::arg("scenario"), py::arg("method"), py::arg("seed"),
      "One method on one seed without caching; returns (trajectory, metrics).");

  m.def(
      "replay",
      [](const Scenario& s, const std::filesystem::path& log_path, const std::filesystem::path& world_path,
         const std::string& method_name) {
        const Method method = method_from_string(method_name);
        if (method == Method::gps_only) throw InvalidArgument("replay needs a filter method");
        const SensorLog log = read_sensor_log_file(log_path);
        const VineyardWorld world = read_world_file(world_path);
        const auto keep = class_filter(method);
        const WallMap map = build_wall_map(filter_survey(world.survey(), keep));
        const auto run = run_filter(log, map, world.bounds, s.filter_for(method),
                                    ReplayOptions{s.observation, s.fusion_radius, keep});
        return to_array(run.estimate);
      },
      py::arg("scenario"), py::arg("log"), py::arg("world"), py::arg("method"));
}
