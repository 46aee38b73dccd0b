// Scenario files (JSON, schema version 1), wavefront mesh loading, command
// scripts and trace/report emission.
//
// Human-facing scenario files use meters and degrees; everything past
// build_world() is meters and radians. Scripts, traces and protocol frames use
// meters and radians.
#pragma once

#include "vispath/agents.hpp"
#include "vispath/blackboard.hpp"
#include "vispath/engine.hpp"
#include "vispath/geometry.hpp"
#include "vispath/manikin.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace vispath {

using Json = nlohmann::ordered_json;

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MeshFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Wavefront meshes

struct MeshLoadStats {
  std::size_t faces = 0;
  std::size_t dropped_degenerate = 0;
};

/// Parse the v/f subset of a wavefront file. Polygons are fanned from their
/// first vertex; other statements are ignored.
inline TriMesh parse_obj(std::istream& in, const std::string& source = "<obj>", MeshLoadStats* stats = nullptr) {
  std::vector<Point3> verts;
  std::vector<std::array<int, 3>> tris;
  std::string line;
  std::size_t lineno = 0;
  MeshLoadStats local;
  auto fail = [&](const std::string& what) {
    throw MeshFormatError(source + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    if (kw == "v") {
      double x = 0, y = 0, z = 0;
      if (!(ls >> x >> y >> z)) fail("malformed vertex");
      verts.emplace_back(x, y, z);
    } else if (kw == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        int i = 0;
        try {
          std::size_t used = 0;
          i = std::stoi(head, &used);
          if (used != head.size()) fail("malformed face index '" + tok + "'");
        } catch (const std::logic_error&) {
          fail("malformed face index '" + tok + "'");
        }
        const int n = static_cast<int>(verts.size());
        const int resolved = i > 0 ? i - 1 : n + i;
        if (i == 0 || resolved < 0 || resolved >= n) {
          fail("face index " + std::to_string(i) + " out of range (" + std::to_string(n) + " vertices)");
        }
        idx.push_back(resolved);
      }
      if (idx.size() < 3) fail("face needs at least 3 vertices");
      ++local.faces;
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) tris.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  if (verts.empty() || tris.empty()) throw MeshFormatError(source + ": empty mesh");
  TriMesh mesh(std::move(verts), std::move(tris));
  if (mesh.triangles().empty()) throw MeshFormatError(source + ": empty mesh (all faces degenerate)");
  local.dropped_degenerate = mesh.dropped_degenerate();
  if (stats) *stats = local;
  return mesh;
}

inline TriMesh load_mesh(const std::filesystem::path& path, MeshLoadStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw MeshFormatError("cannot open mesh file " + path.string());
  return parse_obj(in, path.string(), stats);
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline void write_obj(std::ostream& out, const TriMesh& mesh) {
  for (const auto& v : mesh.vertices()) {
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
  }
  for (const auto& t : mesh.triangles()) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

// ---------------------------------------------------------------------------
// Scenario

inline constexpr int kScenarioSchemaVersion = 1;

struct ObstacleRef {
  std::string mesh;
  std::array<double, 3> position_m{0.0, 0.0, 0.0};
  double theta_deg = 0.0;

  bool operator==(const ObstacleRef&) const = default;
};

struct JointRangeDeg {
  double min = 0.0;
  double max = 0.0;
  double neutral = 0.0;

  bool operator==(const JointRangeDeg&) const = default;
};

struct AgentConfig {
  int rate = 1;
  bool active = true;
  double gain = 1.0;

  bool operator==(const AgentConfig&) const = default;
};

/// File-level scenario, in file units. Defaults mirror the engine defaults.
struct Scenario {
  std::vector<ObstacleRef> obstacles;

  double start_x_m = 0.0;
  double start_y_m = 0.0;
  double start_theta_deg = 0.0;
  double joint_alpha_deg = 0.0;
  double joint_beta_deg = 0.0;
  double joint_theta_deg = 0.0;

  double neck_height_m = 1.5;
  double eye_forward_m = 0.0;
  double eye_up_m = 0.1;
  std::string trunk_mesh;  // empty: default box
  std::string head_mesh;

  JointRangeDeg alpha_limits{-60.0, 45.0, 0.0};
  JointRangeDeg beta_limits{-40.0, 40.0, 0.0};
  JointRangeDeg theta_limits{-60.0, 60.0, 0.0};

  std::array<double, 3> final_target{0.0, 0.0, 0.0};
  std::vector<std::array<double, 3>> waypoints;  // visiting order

  std::map<std::string, AgentConfig> agents;

  double delta_pos_m = 0.05;
  double delta_or_deg = 3.0;

  double eps_min_deg = rad_to_deg(0.05);
  double eps_max_deg = rad_to_deg(0.35);
  double delta_eps_deg = rad_to_deg(0.01);
  int facets = 8;

  double tol_pos_m = 0.10;
  double tol_ang_deg = rad_to_deg(0.05);

  double h_pos_m = 0.005;
  double h_ang_deg = rad_to_deg(0.005);

  double tick_rate_hz = 50.0;

  // Directory that relative mesh paths resolve against.
  std::filesystem::path base_dir;

  bool operator==(const Scenario& o) const {
    // base_dir is where the file lives, not part of its content.
    auto tie = [](const Scenario& s) {
      return std::tie(s.obstacles, s.start_x_m, s.start_y_m, s.start_theta_deg, s.joint_alpha_deg, s.joint_beta_deg,
                      s.joint_theta_deg, s.neck_height_m, s.eye_forward_m, s.eye_up_m, s.trunk_mesh, s.head_mesh,
                      s.alpha_limits, s.beta_limits, s.theta_limits, s.final_target, s.waypoints, s.agents,
                      s.delta_pos_m, s.delta_or_deg, s.eps_min_deg, s.eps_max_deg, s.delta_eps_deg, s.facets,
                      s.tol_pos_m, s.tol_ang_deg, s.h_pos_m, s.h_ang_deg, s.tick_rate_hz);
    };
    return tie(*this) == tie(o);
  }
};

inline std::map<std::string, AgentConfig> default_agent_configs() {
  std::map<std::string, AgentConfig> out;
  for (const auto& a : default_agents()) out[a.name] = {a.rate, a.active, a.gain};
  return out;
}

namespace detail {

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {}

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void only(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) throw ScenarioError(where() + " must be an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
        throw ScenarioError("unknown field " + field(it.key()));
      }
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Reader child(const std::string& key) const { return Reader(j_.at(key), field(key)); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ScenarioError(field(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ScenarioError(field(key) + " must be finite");
    return d;
  }

  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ScenarioError(field(key) + " must be an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ScenarioError(field(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ScenarioError(field(key) + " must be a string");
    return v.get<std::string>();
  }

  static std::array<double, 3> point(const Json& v, const std::string& name) {
    if (!v.is_array() || v.size() != 3) throw ScenarioError(name + " must be an array of 3 numbers");
    std::array<double, 3> p{};
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_number()) throw ScenarioError(name + " must be an array of 3 numbers");
      p[i] = v[i].get<double>();
      if (!std::isfinite(p[i])) throw ScenarioError(name + " must be finite");
    }
    return p;
  }

  std::array<double, 3> point(const std::string& key, std::array<double, 3> fallback) const {
    if (!has(key)) return fallback;
    return point(j_.at(key), field(key));
  }

  const Json& json() const { return j_; }
  std::string where() const { return path_.empty() ? "scenario" : path_; }

 private:
  const Json& j_;
  std::string path_;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ScenarioError(msg);
}

inline JointRangeDeg read_range(const Reader& r, const std::string& key, JointRangeDeg d) {
  if (!r.has(key)) return d;
  const Reader c = r.child(key);
  c.only({"min", "max", "neutral"});
  JointRangeDeg out{c.number("min", d.min), c.number("max", d.max), c.number("neutral", d.neutral)};
  require(out.min <= out.neutral && out.neutral <= out.max,
          r.field(key) + " must satisfy min <= neutral <= max");
  return out;
}

}  // namespace detail

/// Validate and fill defaults. Mesh files are checked by load_scenario().
inline Scenario scenario_from_json(const Json& j) {
  using detail::Reader;
  using detail::require;
  Scenario s;
  const Reader root(j, "");
  root.only({"schema_version", "obstacles", "manikin", "targets", "agents", "normalization", "cone", "tolerances",
             "gradient_steps", "tick_rate_hz"});
  const int version = root.integer("schema_version", kScenarioSchemaVersion);
  require(version == kScenarioSchemaVersion, "schema_version " + std::to_string(version) + " is not supported");

  if (root.has("obstacles")) {
    const auto& arr = j.at("obstacles");
    require(arr.is_array(), "obstacles must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Reader o(arr[i], "obstacles[" + std::to_string(i) + "]");
      o.only({"mesh", "position_m", "theta_deg"});
      require(o.has("mesh"), o.field("mesh") + " is required");
      ObstacleRef ref;
      ref.mesh = o.string("mesh", "");
      ref.position_m = o.point("position_m", ref.position_m);
      ref.theta_deg = o.number("theta_deg", 0.0);
      s.obstacles.push_back(ref);
    }
  }

  if (root.has("manikin")) {
    const Reader m = root.child("manikin");
    m.only({"pose", "joints_deg", "body", "joint_limits_deg"});
    if (m.has("pose")) {
      const Reader p = m.child("pose");
      p.only({"x_m", "y_m", "theta_deg"});
      s.start_x_m = p.number("x_m", s.start_x_m);
      s.start_y_m = p.number("y_m", s.start_y_m);
      s.start_theta_deg = p.number("theta_deg", s.start_theta_deg);
    }
    if (m.has("joints_deg")) {
      const Reader q = m.child("joints_deg");
      q.only({"alpha", "beta", "theta"});
      s.joint_alpha_deg = q.number("alpha", 0.0);
      s.joint_beta_deg = q.number("beta", 0.0);
      s.joint_theta_deg = q.number("theta", 0.0);
    }
    if (m.has("body")) {
      const Reader b = m.child("body");
      b.only({"neck_height_m", "eye_forward_m", "eye_up_m", "trunk_mesh", "head_mesh"});
      s.neck_height_m = b.number("neck_height_m", s.neck_height_m);
      s.eye_forward_m = b.number("eye_forward_m", s.eye_forward_m);
      s.eye_up_m = b.number("eye_up_m", s.eye_up_m);
      s.trunk_mesh = b.string("trunk_mesh", "");
      s.head_mesh = b.string("head_mesh", "");
    }
    if (m.has("joint_limits_deg")) {
      const Reader l = m.child("joint_limits_deg");
      l.only({"alpha", "beta", "theta"});
      s.alpha_limits = detail::read_range(l, "alpha", s.alpha_limits);
      s.beta_limits = detail::read_range(l, "beta", s.beta_limits);
      s.theta_limits = detail::read_range(l, "theta", s.theta_limits);
    }
  }

  require(root.has("targets"), "targets is required");
  {
    const Reader t = root.child("targets");
    t.only({"final", "waypoints"});
    require(t.has("final"), "targets.final is required");
    s.final_target = t.point("final", std::array<double, 3>{});
    if (t.has("waypoints")) {
      const auto& arr = t.json().at("waypoints");
      require(arr.is_array(), "targets.waypoints must be an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        s.waypoints.push_back(Reader::point(arr[i], "targets.waypoints[" + std::to_string(i) + "]"));
      }
    }
  }

  s.agents = default_agent_configs();
  if (root.has("agents")) {
    const Reader a = root.child("agents");
    require(a.json().is_object(), "agents must be an object");
    for (auto it = a.json().begin(); it != a.json().end(); ++it) {
      require(s.agents.contains(it.key()), "unknown agent agents." + it.key());
      const Reader e = a.child(it.key());
      e.only({"rate", "active", "gain"});
      auto& cfg = s.agents[it.key()];
      cfg.rate = e.integer("rate", cfg.rate);
      cfg.active = e.boolean("active", cfg.active);
      cfg.gain = e.number("gain", cfg.gain);
      require(cfg.rate >= 1, e.field("rate") + " must be >= 1");
      require(cfg.gain > 0.0, e.field("gain") + " must be > 0");
    }
  }

  if (root.has("normalization")) {
    const Reader n = root.child("normalization");
    n.only({"delta_pos_m", "delta_or_deg"});
    s.delta_pos_m = n.number("delta_pos_m", s.delta_pos_m);
    s.delta_or_deg = n.number("delta_or_deg", s.delta_or_deg);
  }
  require(s.delta_pos_m > 0.0, "normalization.delta_pos_m must be > 0");
  require(s.delta_or_deg > 0.0, "normalization.delta_or_deg must be > 0");

  if (root.has("cone")) {
    const Reader c = root.child("cone");
    c.only({"eps_min_deg", "eps_max_deg", "delta_eps_deg", "facets"});
    s.eps_min_deg = c.number("eps_min_deg", s.eps_min_deg);
    s.eps_max_deg = c.number("eps_max_deg", s.eps_max_deg);
    s.delta_eps_deg = c.number("delta_eps_deg", s.delta_eps_deg);
    s.facets = c.integer("facets", s.facets);
  }
  require(s.eps_min_deg > 0.0, "cone.eps_min_deg must be > 0");
  require(s.eps_max_deg >= s.eps_min_deg, "cone.eps_max_deg must be >= cone.eps_min_deg");
  require(s.eps_max_deg < 90.0, "cone.eps_max_deg must be < 90");
  require(s.delta_eps_deg >= 0.0, "cone.delta_eps_deg must be >= 0");
  require(s.facets >= 3, "cone.facets must be >= 3");

  if (root.has("tolerances")) {
    const Reader t = root.child("tolerances");
    t.only({"tol_pos_m", "tol_ang_deg"});
    s.tol_pos_m = t.number("tol_pos_m", s.tol_pos_m);
    s.tol_ang_deg = t.number("tol_ang_deg", s.tol_ang_deg);
  }
  require(s.tol_pos_m > 0.0, "tolerances.tol_pos_m must be > 0");
  require(s.tol_ang_deg > 0.0, "tolerances.tol_ang_deg must be > 0");

  if (root.has("gradient_steps")) {
    const Reader g = root.child("gradient_steps");
    g.only({"h_pos_m", "h_ang_deg"});
    s.h_pos_m = g.number("h_pos_m", s.h_pos_m);
    s.h_ang_deg = g.number("h_ang_deg", s.h_ang_deg);
  }
  require(s.h_pos_m > 0.0, "gradient_steps.h_pos_m must be > 0");
  require(s.h_ang_deg > 0.0, "gradient_steps.h_ang_deg must be > 0");

  s.tick_rate_hz = root.number("tick_rate_hz", s.tick_rate_hz);
  require(s.tick_rate_hz > 0.0, "tick_rate_hz must be > 0");
  return s;
}

/// Canonical form: every field written, fixed order.
inline Json scenario_to_json(const Scenario& s) {
  Json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["obstacles"] = Json::array();
  for (const auto& o : s.obstacles) {
    j["obstacles"].push_back({{"mesh", o.mesh}, {"position_m", o.position_m}, {"theta_deg", o.theta_deg}});
  }
  auto range = [](const JointRangeDeg& r) { return Json{{"min", r.min}, {"max", r.max}, {"neutral", r.neutral}}; };
  Json body{{"neck_height_m", s.neck_height_m}, {"eye_forward_m", s.eye_forward_m}, {"eye_up_m", s.eye_up_m}};
  if (!s.trunk_mesh.empty()) body["trunk_mesh"] = s.trunk_mesh;
  if (!s.head_mesh.empty()) body["head_mesh"] = s.head_mesh;
  j["manikin"] = {
      {"pose", {{"x_m", s.start_x_m}, {"y_m", s.start_y_m}, {"theta_deg", s.start_theta_deg}}},
      {"joints_deg", {{"alpha", s.joint_alpha_deg}, {"beta", s.joint_beta_deg}, {"theta", s.joint_theta_deg}}},
      {"body", body},
      {"joint_limits_deg",
       {{"alpha", range(s.alpha_limits)}, {"beta", range(s.beta_limits)}, {"theta", range(s.theta_limits)}}},
  };
  j["targets"] = {{"final", s.final_target}, {"waypoints", s.waypoints}};
  Json agents = Json::object();
  for (const auto& a : default_agents()) {
    const auto& c = s.agents.at(a.name);
    agents[a.name] = {{"rate", c.rate}, {"active", c.active}, {"gain", c.gain}};
  }
  j["agents"] = agents;
  j["normalization"] = {{"delta_pos_m", s.delta_pos_m}, {"delta_or_deg", s.delta_or_deg}};
  j["cone"] = {{"eps_min_deg", s.eps_min_deg},
               {"eps_max_deg", s.eps_max_deg},
               {"delta_eps_deg", s.delta_eps_deg},
               {"facets", s.facets}};
  j["tolerances"] = {{"tol_pos_m", s.tol_pos_m}, {"tol_ang_deg", s.tol_ang_deg}};
  j["gradient_steps"] = {{"h_pos_m", s.h_pos_m}, {"h_ang_deg", s.h_ang_deg}};
  j["tick_rate_hz"] = s.tick_rate_hz;
  return j;
}

/// Mesh references are relative to the scenario file's directory.
inline std::filesystem::path resolve_mesh_path(const Scenario& s, const std::string& ref) {
  const std::filesystem::path ref_path(ref);
  return ref_path.is_absolute() ? ref_path : s.base_dir / ref_path;
}

inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ScenarioError(source + ": parse error: " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const ScenarioError& e) {
    throw ScenarioError(source + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  Scenario s = parse_scenario(buf.str(), path.string());
  s.base_dir = path.parent_path();
  std::vector<std::string> refs{s.trunk_mesh, s.head_mesh};
  for (const auto& o : s.obstacles) refs.push_back(o.mesh);
  for (const auto& ref : refs) {
    if (ref.empty()) continue;
    const std::filesystem::path p = resolve_mesh_path(s, ref);
    if (!std::filesystem::exists(p)) throw ScenarioError(path.string() + ": missing mesh file " + p.string());
  }
  return s;
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write scenario file " + path.string());
  out << scenario_to_json(s).dump(2) << '\n';
}

inline MeshPtr load_scenario_mesh(const Scenario& s, const std::string& ref) {
  const std::filesystem::path p = resolve_mesh_path(s, ref);
  if (!std::filesystem::exists(p)) throw ScenarioError("missing mesh file " + p.string());
  return std::make_shared<const TriMesh>(load_mesh(p));
}

inline Point3 to_point(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

/// Build the initial blackboard from a scenario (degrees -> radians here).
inline WorldState build_world(const Scenario& s) {
  WorldState w;
  for (const auto& o : s.obstacles) {
    w.obstacles.emplace_back(load_scenario_mesh(s, o.mesh), o.position_m[0], o.position_m[1], o.position_m[2],
                             deg_to_rad(o.theta_deg));
  }
  w.pose = ManikinPose{s.start_x_m, s.start_y_m, wrap_angle(deg_to_rad(s.start_theta_deg))};
  w.body.neck_height = s.neck_height_m;
  w.body.eye_forward = s.eye_forward_m;
  w.body.eye_up = s.eye_up_m;
  if (!s.trunk_mesh.empty()) w.body.trunk = load_scenario_mesh(s, s.trunk_mesh);
  if (!s.head_mesh.empty()) w.body.head = load_scenario_mesh(s, s.head_mesh);
  auto range = [](const JointRangeDeg& r) {
    return JointRange{deg_to_rad(r.min), deg_to_rad(r.max), deg_to_rad(r.neutral)};
  };
  w.limits = {range(s.alpha_limits), range(s.beta_limits), range(s.theta_limits)};
  w.joints = clamp_joints(
      {deg_to_rad(s.joint_alpha_deg), deg_to_rad(s.joint_beta_deg), deg_to_rad(s.joint_theta_deg)}, w.limits);
  w.cone.eps_min = deg_to_rad(s.eps_min_deg);
  w.cone.eps_max = deg_to_rad(s.eps_max_deg);
  w.cone.eps_c = w.cone.eps_min;
  w.cone.delta_eps = deg_to_rad(s.delta_eps_deg);
  w.cone.facets = s.facets;
  w.target_stack.push_back(to_point(s.final_target));
  for (auto it = s.waypoints.rbegin(); it != s.waypoints.rend(); ++it) w.target_stack.push_back(to_point(*it));
  w.normalization = {s.delta_pos_m, deg_to_rad(s.delta_or_deg)};
  w.tolerances = {s.tol_pos_m, deg_to_rad(s.tol_ang_deg)};
  w.gradient_steps = {s.h_pos_m, deg_to_rad(s.h_ang_deg)};
  w.agents = default_agents();
  for (auto& a : w.agents) {
    const auto& c = s.agents.at(a.name);
    a.rate = c.rate;
    a.active = c.active;
    a.gain = c.gain;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Commands (shared by scripts and the live protocol)

class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Json point_json(const Point3& p) { return Json::array({p.x(), p.y(), p.z()}); }

/// Wire form of a blackboard command (meters, radians).
inline Json command_to_json(const Command& cmd) {
  using namespace command;
  return std::visit(
      [](const auto& c) -> Json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, SetRate>) {
          return {{"type", "configure"}, {"command", "set_rate"}, {"agent", c.agent}, {"value", c.rate}};
        } else if constexpr (std::is_same_v<T, Pause>) {
          return {{"type", "configure"}, {"command", "pause"}, {"agent", c.agent}};
        } else if constexpr (std::is_same_v<T, Resume>) {
          return {{"type", "configure"}, {"command", "resume"}, {"agent", c.agent}};
        } else if constexpr (std::is_same_v<T, SetDeltaPos>) {
          return {{"type", "configure"}, {"command", "set_delta_pos"}, {"value", c.value}};
        } else if constexpr (std::is_same_v<T, SetDeltaOr>) {
          return {{"type", "configure"}, {"command", "set_delta_or"}, {"value", c.value}};
        } else if constexpr (std::is_same_v<T, SetGain>) {
          return {{"type", "configure"}, {"command", "set_gain"}, {"agent", c.agent}, {"value", c.value}};
        } else if constexpr (std::is_same_v<T, PushIntermediateTarget>) {
          return {{"type", "push_waypoint"}, {"point", point_json(c.point)}};
        } else if constexpr (std::is_same_v<T, SetTarget>) {
          return {{"type", "set_target"}, {"point", point_json(c.point)}};
        } else {
          return {{"type", "operator_input"}, {"dx", c.dx}, {"dy", c.dy}, {"dtheta", c.dtheta}};
        }
      },
      cmd);
}

namespace detail {
inline double json_number(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw CommandError(std::string("field '") + key + "' must be a number");
  return j.at(key).get<double>();
}
inline std::string json_string(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) throw CommandError(std::string("field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}
inline Point3 json_point(const Json& j) {
  if (!j.contains("point")) throw CommandError("field 'point' is required");
  try {
    return to_point(Reader::point(j.at("point"), "point"));
  } catch (const ScenarioError& e) {
    throw CommandError(e.what());
  }
}
}  // namespace detail

/// True when `type` names a blackboard command rather than session control.
inline bool is_world_command(const std::string& type) {
  return type == "configure" || type == "operator_input" || type == "set_target" || type == "push_waypoint";
}

inline Command command_from_json(const Json& j) {
  using namespace command;
  if (!j.is_object()) throw CommandError("command must be an object");
  const std::string type = detail::json_string(j, "type");
  if (type == "operator_input") {
    return OperatorMove{detail::json_number(j, "dx"), detail::json_number(j, "dy"), detail::json_number(j, "dtheta")};
  }
  if (type == "set_target") return SetTarget{detail::json_point(j)};
  if (type == "push_waypoint") return PushIntermediateTarget{detail::json_point(j)};
  if (type != "configure") throw CommandError("unknown command type '" + type + "'");
  const std::string name = detail::json_string(j, "command");
  if (name == "set_rate") {
    if (!j.contains("value") || !j.at("value").is_number_integer()) throw CommandError("set_rate value must be an integer");
    return SetRate{detail::json_string(j, "agent"), j.at("value").get<int>()};
  }
  if (name == "pause") return Pause{detail::json_string(j, "agent")};
  if (name == "resume") return Resume{detail::json_string(j, "agent")};
  if (name == "set_delta_pos") return SetDeltaPos{detail::json_number(j, "value")};
  if (name == "set_delta_or") return SetDeltaOr{detail::json_number(j, "value")};
  if (name == "set_gain") return SetGain{detail::json_string(j, "agent"), detail::json_number(j, "value")};
  throw CommandError("unknown configure command '" + name + "'");
}

// ---------------------------------------------------------------------------
// Scripts: one JSON object per line, {"tick": t, "command": {...}}, with an
// optional trailing {"tick": n, "end": true}.

inline Script parse_script(std::istream& in, const std::string& source = "<script>") {
  Script s;
  std::string line;
  std::size_t lineno = 0;
  std::int64_t last_tick = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw CommandError(where + "parse error: " + e.what());
    }
    if (!j.is_object() || !j.contains("tick") || !j.at("tick").is_number_integer()) {
      throw CommandError(where + "each line needs an integer 'tick'");
    }
    const auto tick = j.at("tick").get<std::int64_t>();
    if (tick < last_tick) throw CommandError(where + "ticks must be non-decreasing");
    last_tick = tick;
    if (j.value("end", false)) {
      s.end_tick = tick;
      continue;
    }
    if (s.end_tick) throw CommandError(where + "command after end marker");
    if (!j.contains("command")) throw CommandError(where + "missing 'command'");
    try {
      s.commands.push_back({tick, command_from_json(j.at("command"))});
    } catch (const CommandError& e) {
      throw CommandError(where + e.what());
    }
  }
  return s;
}

inline Script load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CommandError("cannot open script file " + path.string());
  return parse_script(in, path.string());
}

inline void write_script(std::ostream& out, const Script& s) {
  for (const auto& c : s.commands) out << Json{{"tick", c.tick}, {"command", command_to_json(c.command)}}.dump() << '\n';
  if (s.end_tick) out << Json{{"tick", *s.end_tick}, {"end", true}}.dump() << '\n';
}

inline void write_script(const Script& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write script file " + path.string());
  write_script(out, s);
  if (!out) throw std::runtime_error("error writing script file " + path.string());
}

// ---------------------------------------------------------------------------
// Trace and report

inline Json contribution_json(const Contribution& c) {
  return {{"dx", c.dx},
          {"dy", c.dy},
          {"dtheta", c.dtheta},
          {"dalpha", c.dalpha},
          {"dtheta_head", c.dtheta_head},
          {"cone_delta", c.cone_delta}};
}

/// Stable field order; this is the golden-test surface.
inline Json trace_record_json(const TraceRecord& r) {
  Json j;
  j["tick"] = r.tick;
  j["status"] = to_string(r.status);
  j["x"] = r.pose.x;
  j["y"] = r.pose.y;
  j["theta"] = r.pose.theta;
  j["alpha_b"] = r.joints.alpha;
  j["beta_b"] = r.joints.beta;
  j["theta_b"] = r.joints.theta;
  j["eps_c"] = r.eps_c;
  j["collision_length"] = r.diagnostics.collision_length;
  j["cone_collision_length"] = r.diagnostics.cone_collision_length;
  j["comfort"] = r.diagnostics.comfort;
  j["occluded"] = r.diagnostics.occluded;
  j["view_angle"] = r.diagnostics.view_angle;
  j["planar_distance"] = r.diagnostics.planar_distance;
  j["targets_remaining"] = r.targets_remaining;
  j["target"] = point_json(r.target);
  Json contributions = Json::object();
  for (const auto& [name, c] : r.contributions) contributions[name] = contribution_json(c);
  j["contributions"] = contributions;
  j["commands"] = Json::array();
  for (const auto& c : r.commands) j["commands"].push_back(command_to_json(c));
  j["consumed_inputs"] = r.consumed_inputs;
  j["warnings"] = r.warnings;
  return j;
}

inline void write_trace(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) out << trace_record_json(r).dump() << '\n';
}

inline void write_trace(const std::vector<TraceRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file " + path.string());
  write_trace(out, records);
  if (!out) throw std::runtime_error("error writing trace file " + path.string());
}

struct Summary {
  bool reached = false;
  std::int64_t ticks = 0;
  std::optional<std::int64_t> ticks_to_reached;
  double min_comfort = 1.0;
  double max_collision_length = 0.0;
  double max_cone_collision_length = 0.0;
  double path_length = 0.0;
  std::map<std::string, std::int64_t> firing_counts;
};

/// Path length is the sum of planar displacements between consecutive
/// records, starting from `start`.
inline Summary summarize(const std::vector<TraceRecord>& records, const ManikinPose& start) {
  if (records.empty()) throw std::invalid_argument("summarize: no trace records");
  Summary s;
  s.ticks = static_cast<std::int64_t>(records.size());
  double px = start.x;
  double py = start.y;
  for (const auto& r : records) {
    s.min_comfort = std::min(s.min_comfort, r.diagnostics.comfort);
    s.max_collision_length = std::max(s.max_collision_length, r.diagnostics.collision_length);
    s.max_cone_collision_length = std::max(s.max_cone_collision_length, r.diagnostics.cone_collision_length);
    s.path_length += std::hypot(r.pose.x - px, r.pose.y - py);
    px = r.pose.x;
    py = r.pose.y;
    for (const auto& [name, c] : r.contributions) ++s.firing_counts[name];
    if (r.status == TaskStatus::reached && !s.ticks_to_reached) s.ticks_to_reached = r.tick + 1;
  }
  s.reached = records.back().status == TaskStatus::reached;
  return s;
}

inline Json summary_json(const Summary& s) {
  Json j;
  j["reached"] = s.reached;
  j["ticks"] = s.ticks;
  j["ticks_to_reached"] = s.ticks_to_reached ? Json(*s.ticks_to_reached) : Json(nullptr);
  j["min_comfort"] = s.min_comfort;
  j["max_collision_length"] = s.max_collision_length;
  j["max_cone_collision_length"] = s.max_cone_collision_length;
  j["path_length"] = s.path_length;
  j["firing_counts"] = s.firing_counts;
  return j;
}

}  // namespace vispath
