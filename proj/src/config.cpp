#include "objslam/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>
#include <vector>

#include "objslam/error.hpp"
#include "objslam/io.hpp"

namespace objslam {

namespace {

using Slot = std::variant<double*, int*, bool*, std::uint64_t*, std::string*>;

struct Binding {
  const char* section;
  const char* key;
  Slot slot;
};

struct Names {
  std::string scene = "single";
  std::string association = "lidar";
};

std::vector<Binding> bindings(Config& c, Names& n) {
  FitConfig& f = c.slam.fit;
  GraphConfig& g = c.slam.graph;
  return {
      {"scene", "kind", &n.scene},
      {"scene", "seed", &c.single.seed},
      {"scene", "distance", &c.single.distance},
      {"scene", "azimuth_deg", &c.single.azimuth_deg},
      {"scene", "elevation_deg", &c.single.elevation_deg},
      {"scene", "scale", &c.single.scale},
      {"scene", "code_sigma", &c.single.code_sigma},
      {"scene", "surface_points", &c.single.surface_points},
      {"scene", "partial", &c.single.partial},
      {"scene", "init_scale_bias", &c.init_scale_bias},
      {"scene", "cameras", &c.loop.cameras},
      {"scene", "radius", &c.loop.radius},
      {"scene", "objects", &c.loop.objects},
      {"scene", "wall_landmarks", &c.loop.wall_landmarks},
      {"scene", "landmark_cone_deg", &c.loop.landmark_cone_deg},
      {"noise", "depth", &c.noise.depth},
      {"noise", "pixel", &c.noise.pixel},
      {"noise", "odometry_tx", &c.noise.odometry(0)},
      {"noise", "odometry_ty", &c.noise.odometry(1)},
      {"noise", "odometry_tz", &c.noise.odometry(2)},
      {"noise", "odometry_rx", &c.noise.odometry(3)},
      {"noise", "odometry_ry", &c.noise.odometry(4)},
      {"noise", "odometry_rz", &c.noise.odometry(5)},
      {"noise", "init_rotation_deg", &c.noise.init_rotation_deg},
      {"noise", "init_translation", &c.noise.init_translation},
      {"noise", "init_scale", &c.noise.init_scale},
      {"fit", "lambda_surface", &f.lambda_surface},
      {"fit", "lambda_render", &f.lambda_render},
      {"fit", "lambda_code", &f.lambda_code},
      {"fit", "use_rotation_prior", &f.use_rotation_prior},
      {"fit", "lambda_rotation", &f.lambda_rotation},
      {"fit", "max_iters", &f.max_iters},
      {"fit", "bbox_pixels", &f.bbox_pixels},
      {"fit", "damping", &f.damping},
      {"fit", "convergence_tol", &f.convergence_tol},
      {"fit", "seed", &f.seed},
      {"fit", "max_damping_escalations", &f.max_damping_escalations},
      {"fit", "max_step_rejections", &f.max_step_rejections},
      {"fit", "pose_only_iters", &f.pose_only_iters},
      {"fit", "pose_only_max_rms", &f.pose_only_max_rms},
      {"fit", "first_order_step", &f.first_order_step},
      {"fit", "first_order_iters", &f.first_order_iters},
      {"render", "ray_samples", &f.ray_samples},
      {"render", "sigma", &f.sigma},
      {"render", "near_plane", &f.near_plane},
      {"render", "mesh_resolution", &c.mesh_resolution},
      {"graph", "max_iters", &g.max_iters},
      {"graph", "damping", &g.damping},
      {"graph", "max_damping_escalations", &g.max_damping_escalations},
      {"graph", "convergence_tol", &g.convergence_tol},
      {"graph", "cost_tol", &g.cost_tol},
      {"graph", "huber", &g.huber},
      {"graph", "huber_delta", &g.huber_delta},
      {"graph", "sigma_pixel", &g.sigma_pixel},
      {"graph", "sigma_co_translation", &g.sigma_co_translation},
      {"graph", "sigma_co_rotation", &g.sigma_co_rotation},
      {"slam", "association", &n.association},
      {"slam", "tau", &c.slam.assoc.tau},
      {"slam", "min_shared", &c.slam.assoc.min_shared},
      {"slam", "ba_every", &c.slam.ba_every},
      {"slam", "object_edges", &c.slam.object_edges},
  };
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw FormatError("config:" + (line > 0 ? std::to_string(line) + ":" : std::string()) + " " + what, line);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

template <typename T>
T parse_number(const std::string& v, int line) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) fail(line, "bad number '" + v + "'");
  return out;
}

void assign(const Slot& slot, const std::string& v, int line) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (v == "true") *p = true;
          else if (v == "false") *p = false;
          else fail(line, "expected true or false, found '" + v + "'");
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (v.size() < 2 || v.front() != '"' || v.back() != '"') fail(line, "expected a quoted string");
          *p = v.substr(1, v.size() - 2);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          *p = parse_number<std::uint64_t>(v, line);
        } else if constexpr (std::is_same_v<T, int>) {
          *p = parse_number<int>(v, line);
        } else {
          *p = parse_number<double>(v, line);
        }
      },
      slot);
}

std::string render(const Slot& slot) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) return *p ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return "\"" + *p + "\"";
        else if constexpr (std::is_same_v<T, double>) return format_double(*p);
        else return std::to_string(*p);
      },
      slot);
}

}  // namespace

SceneSpec Config::make_scene() const {
  SceneSpec scene;
  if (this->scene == SceneKind::kSingle) {
    SingleObjectOptions o = single;
    o.noise = noise;
    scene = single_object_scene(o);
    scene.init_scale_bias = init_scale_bias;
  } else {
    LoopOptions o = loop;
    o.seed = single.seed;
    o.noise = noise;
    scene = loop_scene(o);
  }
  return scene;
}

Config parse_config(const std::string& text) {
  Config config;
  Names names;
  const std::vector<Binding> table = bindings(config, names);
  std::map<std::string, int> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  int assoc_line = 0;
  int scene_line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      bool known = false;
      for (const Binding& b : table) known = known || section == b.section;
      if (!known) fail(line, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    if (section.empty()) fail(line, "key outside of a section");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (value.empty()) fail(line, "missing value for '" + key + "'");
    const std::string full = section + "." + key;
    if (seen.count(full)) fail(line, "duplicate key '" + full + "'");
    seen[full] = line;
    const Binding* match = nullptr;
    for (const Binding& b : table) {
      if (section == b.section && key == b.key) match = &b;
    }
    if (!match) fail(line, "unknown key '" + key + "' in [" + section + "]");
    assign(match->slot, value, line);
    if (full == "slam.association") assoc_line = line;
    if (full == "scene.kind") scene_line = line;
  }

  if (names.scene == "single") config.scene = SceneKind::kSingle;
  else if (names.scene == "loop") config.scene = SceneKind::kLoop;
  else fail(scene_line, "scene kind must be \"single\" or \"loop\"");
  try {
    config.slam.assoc.mode = association_mode_from_string(names.association);
  } catch (const ParameterError& e) {
    fail(assoc_line, e.what());
  }
  try {
    config.slam.fit.validate();
  } catch (const ParameterError& e) {
    fail(0, e.what());
  }
  if (config.slam.ba_every < 0) fail(0, "slam.ba_every must be >= 0");
  if (config.mesh_resolution < 8) fail(0, "render.mesh_resolution must be >= 8");
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const FormatError& e) {
    const std::string what = e.what();
    const std::string where = e.line() > 0 ? ":" + std::to_string(e.line()) + ":" : ":";
    throw FormatError(path.string() + where + what.substr(what.find(' ')), e.line());
  }
}

std::string format_config(const Config& config) {
  Config copy = config;
  Names names;
  names.scene = copy.scene == SceneKind::kSingle ? "single" : "loop";
  names.association = to_string(copy.slam.assoc.mode);
  std::ostringstream out;
  std::string section;
  for (const Binding& b : bindings(copy, names)) {
    if (section != b.section) {
      out << (section.empty() ? "" : "\n") << '[' << b.section << "]\n";
      section = b.section;
    }
    out << b.key << " = " << render(b.slot) << '\n';
  }
  return out.str();
}

}  // namespace objslam
