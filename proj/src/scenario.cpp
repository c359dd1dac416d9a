#include "semloc/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "semloc/errors.hpp"

namespace semloc {
namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kArtifactVersion = "semloc 0.1.0";

template <typename E>
using EnumTable = std::vector<std::pair<std::string_view, E>>;

const EnumTable<ObservationModel> kModes{{"semantic", ObservationModel::semantic},
                                         {"classless", ObservationModel::classless}};
const EnumTable<InitMode> kInits{{"gps_prior", InitMode::gps_prior},
                                 {"uniform", InitMode::uniform},
                                 {"known_pose", InitMode::known_pose}};
const EnumTable<ObservationSource> kSources{{"fused", ObservationSource::fused},
                                            {"camera", ObservationSource::camera}};

std::string type_name(const json& j) { return j.type_name(); }

// Reads fields that are present and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object, got " + type_name(j_));
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where.empty() ? "<root>" : where, what);
  }

  std::string at(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const json* find(std::string_view key) {
    seen_.insert(std::string(key));
    const auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  void operator()(std::string_view key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(at(key), "expected a number, got " + type_name(*v));
      out = v->get<double>();
    }
  }

  void operator()(std::string_view key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer, got " + type_name(*v));
      out = v->get<int>();
    }
  }

  void operator()(std::string_view key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(at(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void operator()(std::string_view key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(at(key), "expected a boolean, got " + type_name(*v));
      out = v->get<bool>();
    }
  }

  void operator()(std::string_view key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(at(key), "expected a string, got " + type_name(*v));
      out = v->get<std::string>();
    }
  }

  void operator()(std::string_view key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        fail(at(key), "expected a number or null, got " + type_name(*v));
      }
    }
  }

  void operator()(std::string_view key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(at(key), "expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back((*v)[i].get<double>());
      }
    }
  }

  void operator()(std::string_view key, Pose2D& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 3 || !std::all_of(v->begin(), v->end(), [](const json& e) {
            return e.is_number();
          })) {
        fail(at(key), "expected [x, y, theta]");
      }
      out = {(*v)[0].get<double>(), (*v)[1].get<double>(), (*v)[2].get<double>()};
    }
  }

  template <typename E>
  void enumeration(std::string_view key, E& out, const EnumTable<E>& table) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      const auto name = v->get<std::string>();
      for (const auto& [label, value] : table) {
        if (label == name) {
          out = value;
          return;
        }
      }
      fail(at(key), "unknown value '" + name + "'");
    }
  }

  template <typename Fn>
  void object(std::string_view key, Fn&& fn) {
    if (const json* v = find(key)) {
      Reader sub(*v, at(key));
      fn(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) fail(at(item.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  json j = json::object();

  template <typename T>
  void operator()(std::string_view key, const T& value) {
    j[std::string(key)] = value;
  }
  void operator()(std::string_view key, const std::optional<double>& value) {
    j[std::string(key)] = value ? json(*value) : json(nullptr);
  }
  void operator()(std::string_view key, const Pose2D& p) {
    j[std::string(key)] = json::array({p.x, p.y, p.theta});
  }

  template <typename E>
  void enumeration(std::string_view key, const E& value, const EnumTable<E>& table) {
    for (const auto& [label, v] : table) {
      if (v == value) j[std::string(key)] = std::string(label);
    }
  }

  template <typename Fn>
  void object(std::string_view key, Fn&& fn) {
    Writer sub;
    fn(sub);
    j[std::string(key)] = std::move(sub.j);
  }
};

// Field lists shared by the reader and the writer.

template <typename A, typename W>
void visit_world(A& a, W& w) {
  a("rows", w.rows);
  a("row_length", w.row_length);
  a("pitch", w.pitch);
  a("row_spacing", w.row_spacing);
  a("headland_depth", w.headland_depth);
  a("pole_every", w.pole_every);
  a("pole_offset", w.pole_offset);
  a("jitter", w.jitter);
  a("seed", w.seed);
}

template <typename A, typename T>
void visit_trajectory(A& a, T& t) {
  a("speed", t.speed);
  a("sample_period", t.sample_period);
  a("exit_margin", t.exit_margin);
  a("outer_passes", t.outer_passes);
  a("reversed", t.reversed);
}

template <typename A, typename N>
void visit_motion(A& a, N& n) {
  a("rot_per_rot", n.rot_per_rot);
  a("rot_per_trans", n.rot_per_trans);
  a("trans_per_trans", n.trans_per_trans);
  a("trans_per_rot", n.trans_per_rot);
  a("rot_base", n.rot_base);
  a("trans_base", n.trans_base);
}

template <typename A, typename S>
void visit_sensors(A& a, S& s) {
  a.object("detector", [&](auto& d) {
    d("recall_pole", s.detector.recall_pole);
    d("recall_trunk", s.detector.recall_trunk);
    d("range_limit", s.detector.range_limit);
    d("field_of_view", s.detector.field_of_view);
    d("range_noise_sigma", s.detector.range_noise_sigma);
    d("false_positive_rate", s.detector.false_positive_rate);
  });
  a.object("scan", [&](auto& c) {
    c("beams", s.scan.beams);
    c("angle_min", s.scan.angle_min);
    c("angle_span", s.scan.angle_span);
    c("max_range", s.scan.max_range);
    c("noise_sigma", s.scan.noise_sigma);
  });
  a.object("motion_noise", [&](auto& m) { visit_motion(m, s.motion_noise); });
  a("gps_cep", s.gps_cep);
  a("gps_every", s.gps_every);
}

template <typename A, typename F>
void visit_filter(A& a, F& f) {
  a("n_min", f.n_min);
  a("n_max", f.n_max);
  a("resample_threshold", f.resample_threshold);
  a.enumeration("mode", f.mode, kModes);
  a("use_gps", f.use_gps);
  a.enumeration("init", f.init, kInits);
  a("init_count", f.init_count);
  a("init_pose", f.init_pose);
  a("init_position_sigma", f.init_position_sigma);
  a("init_heading_sigma", f.init_heading_sigma);
  a.object("motion_noise", [&](auto& m) { visit_motion(m, f.motion_noise); });
  a.object("likelihood", [&](auto& l) {
    auto& p = f.likelihood;
    l("sigma_obs", p.sigma_obs);
    l("lambda_hit", p.lambda_hit);
    l("lambda_miss", p.lambda_miss);
    l.object("class_weights", [&](auto& c) {
      c("pole", p.class_weights.pole);
      c("trunk", p.class_weights.trunk);
      c("background", p.class_weights.background);
    });
    l("classless_weight", p.classless_weight);
    l("max_range", p.max_range);
    l("alpha_floor", p.alpha_floor);
    l("alpha_ceil", p.alpha_ceil);
    l("k_scale", p.k_scale);
    l("sigma_gps", p.sigma_gps);
  });
}

MotionNoise default_motion_noise() {
  MotionNoise n;
  n.rot_per_rot = 0.05;
  n.rot_per_trans = 0.01;
  n.trans_per_trans = 0.05;
  n.trans_per_rot = 0.01;
  n.rot_base = 0.002;
  n.trans_base = 0.005;
  return n;
}

// Built-in differences between methods before any override is applied.
FilterConfig method_defaults(Method m, const FilterConfig& base) {
  FilterConfig f = base;
  switch (m) {
    case Method::spf_nogps:
      f.use_gps = false;
      break;
    case Method::classless:
      f.mode = ObservationModel::classless;
      f.use_gps = false;
      break;
    default:
      break;
  }
  return f;
}

std::vector<std::uint64_t> read_seeds(const json& v, const std::string& where) {
  std::vector<std::uint64_t> seeds;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_unsigned()) {
        throw ConfigError(where + "[" + std::to_string(i) + "]", "expected a non-negative integer");
      }
      seeds.push_back(v[i].get<std::uint64_t>());
    }
  } else if (v.is_object()) {
    std::uint64_t first = 0, count = 0;
    Reader r(v, where);
    r("first", first);
    r("count", count);
    r.finish();
    for (std::uint64_t i = 0; i < count; ++i) seeds.push_back(first + i);
  } else {
    throw ConfigError(where, "expected an array or {\"first\", \"count\"}");
  }
  return seeds;
}

std::vector<Method> read_methods(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where, "expected an array of method names");
  std::vector<Method> methods;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    if (!v[i].is_string()) throw ConfigError(at, "expected a method name");
    try {
      const Method m = method_from_string(v[i].get<std::string>());
      if (std::find(methods.begin(), methods.end(), m) != methods.end()) {
        throw ConfigError(at, "duplicate method");
      }
      methods.push_back(m);
    } catch (const InvalidArgument& e) {
      throw ConfigError(at, e.what());
    }
  }
  return methods;
}

template <typename Fn>
void check(const std::string& where, Fn&& fn) {
  try {
    fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(where, e.what());
  }
}

void validate(Scenario& s) {
  check("world", [&] { generate_vineyard(s.world); });
  check("trajectory", [&] {
    if (!(s.trajectory.speed > 0.0 && s.trajectory.sample_period > 0.0)) {
      throw InvalidArgument("speed and sample_period must be positive");
    }
  });
  check("sensors.detector", [&] { s.sensors.detector.validate(); });
  check("sensors.scan", [&] { s.sensors.scan.validate(); });
  check("sensors.motion_noise", [&] { s.sensors.motion_noise.validate(); });
  check("sensors", [&] {
    if (s.sensors.gps_every < 0) throw InvalidArgument("gps_every must be >= 0");
    if (s.sensors.gps_every > 0) cep_to_sigma(s.sensors.gps_cep);
  });
  if (!(s.fusion_radius > 0.0)) throw ConfigError("fusion_radius", "must be positive");
  if (!(s.max_dt >= 0.0)) throw ConfigError("max_dt", "must be non-negative");
  if (s.workers < 1) throw ConfigError("workers", "must be >= 1");
  if (s.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (s.methods.empty()) throw ConfigError("methods", "at least one method is required");
  check("filter", [&] { s.filter.validate(); });
  for (const auto& [m, f] : s.per_method) {
    check("method_overrides." + std::string(to_string(m)), [&] { f.validate(); });
  }
  auto grid_ok = [&](const std::vector<double>& values, const char* key) {
    if (values.empty()) throw ConfigError(std::string("sweep.") + key, "grid must not be empty");
    for (const double v : values) {
      if (!(v > 0.0 && v <= s.filter.likelihood.max_range)) {
        throw ConfigError(std::string("sweep.") + key, "grid values must lie in (0, max_range]");
      }
    }
  };
  grid_ok(s.sweep.lambda_hit, "lambda_hit");
  grid_ok(s.sweep.lambda_miss, "lambda_miss");
  if (s.sweep.seeds.empty()) {
    s.sweep.seeds.assign(s.seeds.begin(), s.seeds.begin() + std::min<std::size_t>(5, s.seeds.size()));
  }
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::spf:
      return "spf";
    case Method::spf_nogps:
      return "spf_nogps";
    case Method::classless:
      return "classless";
    case Method::gps_only:
      return "gps_only";
    case Method::poles_only:
      return "poles_only";
    case Method::trunks_only:
      return "trunks_only";
  }
  return "?";
}

Method method_from_string(std::string_view name) {
  for (const Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

std::vector<Method> all_methods() {
  return {Method::spf,      Method::spf_nogps,  Method::classless,
          Method::gps_only, Method::poles_only, Method::trunks_only};
}

const FilterConfig& Scenario::filter_for(Method method) const {
  const auto it = per_method.find(method);
  if (it == per_method.end()) throw InvalidArgument("no filter configuration for method");
  return it->second;
}

Scenario parse_scenario(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError("line " + std::to_string(line), "syntax error");
  }

  Scenario s;
  s.sensors.motion_noise = default_motion_noise();
  s.filter.motion_noise = default_motion_noise();
  s.methods = all_methods();
  for (std::uint64_t i = 1; i <= 20; ++i) s.seeds.push_back(i);

  Reader r(root, "");
  std::string schema;
  r("schema", schema);
  if (schema != kScenarioSchema) {
    throw ConfigError("schema", "expected \"" + std::string(kScenarioSchema) + "\"");
  }
  r("name", s.name);
  r.object("world", [&](Reader& a) { visit_world(a, s.world); });
  r.object("trajectory", [&](Reader& a) { visit_trajectory(a, s.trajectory); });
  r.object("sensors", [&](Reader& a) { visit_sensors(a, s.sensors); });
  r.enumeration("observation", s.observation, kSources);
  r("fusion_radius", s.fusion_radius);
  r.object("filter", [&](Reader& a) { visit_filter(a, s.filter); });
  if (const json* v = r.find("methods")) s.methods = read_methods(*v, "methods");
  if (const json* v = r.find("seeds")) s.seeds = read_seeds(*v, "seeds");
  r("max_dt", s.max_dt);
  r("workers", s.workers);
  std::string output = s.output.string();
  r("output", output);
  s.output = output;

  for (const Method m : all_methods()) s.per_method[m] = method_defaults(m, s.filter);
  r.object("method_overrides", [&](Reader& o) {
    for (const Method m : all_methods()) {
      o.object(to_string(m), [&](Reader& a) { visit_filter(a, s.per_method[m]); });
    }
  });

  r.object("sweep", [&](Reader& a) {
    a("lambda_hit", s.sweep.lambda_hit);
    a("lambda_miss", s.sweep.lambda_miss);
    if (const json* v = a.find("seeds")) s.sweep.seeds = read_seeds(*v, "sweep.seeds");
    std::string method(to_string(s.sweep.method));
    a("method", method);
    try {
      s.sweep.method = method_from_string(method);
    } catch (const InvalidArgument& e) {
      throw ConfigError("sweep.method", e.what());
    }
    if (s.sweep.method == Method::gps_only) throw ConfigError("sweep.method", "needs a filter method");
  });
  r.finish();

  validate(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open scenario file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

std::string scenario_to_json(const Scenario& s) {
  Writer w;
  w("schema", std::string(kScenarioSchema));
  w("name", s.name);
  w.object("world", [&](Writer& a) { visit_world(a, s.world); });
  w.object("trajectory", [&](Writer& a) { visit_trajectory(a, s.trajectory); });
  w.object("sensors", [&](Writer& a) { visit_sensors(a, s.sensors); });
  w.enumeration("observation", s.observation, kSources);
  w("fusion_radius", s.fusion_radius);
  w.object("filter", [&](Writer& a) { visit_filter(a, s.filter); });
  json methods = json::array();
  for (const Method m : s.methods) methods.push_back(std::string(to_string(m)));
  w.j["methods"] = methods;
  w.j["seeds"] = s.seeds;
  w("max_dt", s.max_dt);
  w("workers", s.workers);
  w("output", s.output.string());
  w.object("method_overrides", [&](Writer& o) {
    for (const auto& [m, f] : s.per_method) {
      o.object(to_string(m), [&](Writer& a) { visit_filter(a, f); });
    }
  });
  w.object("sweep", [&](Writer& a) {
    a("lambda_hit", s.sweep.lambda_hit);
    a("lambda_miss", s.sweep.lambda_miss);
    a("seeds", s.sweep.seeds);
    a("method", std::string(to_string(s.sweep.method)));
  });
  return w.j.dump(2) + "\n";
}

std::string sensor_cache_key(const Scenario& s, std::uint64_t seed) {
  Writer w;
  w("artifact", std::string(kArtifactVersion));
  w.object("world", [&](Writer& a) { visit_world(a, s.world); });
  w.object("trajectory", [&](Writer& a) { visit_trajectory(a, s.trajectory); });
  w.object("sensors", [&](Writer& a) { visit_sensors(a, s.sensors); });
  w("seed", seed);
  return fnv1a_hex(w.j.dump());
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  auto parse_u64 = [&](std::string_view part) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size() || part.empty()) {
      throw InvalidArgument("invalid seed '" + std::string(part) + "'");
    }
    return v;
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string_view part =
        text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    const std::size_t dash = part.find('-');
    if (dash == std::string_view::npos) {
      seeds.push_back(parse_u64(part));
    } else {
      const auto lo = parse_u64(part.substr(0, dash));
      const auto hi = parse_u64(part.substr(dash + 1));
      if (hi < lo) throw InvalidArgument("descending seed range '" + std::string(part) + "'");
      for (std::uint64_t v = lo; v <= hi; ++v) seeds.push_back(v);
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (seeds.empty()) throw InvalidArgument("empty seed list");
  return seeds;
}

}  // namespace semloc
