#include "objslam/io.hpp"

#include <bit>
#include <charconv>
#include <sstream>

#include <Eigen/Geometry>

#include "objslam/error.hpp"

namespace objslam {

namespace {

using Tokens = std::vector<std::string>;

class LineReader {
 public:
  explicit LineReader(const fs::path& path) : in_(path), path_(path.string()) {
    if (!in_) throw Error("cannot open " + path_);
  }

  // Next non-empty, non-comment line; false at end of file.
  bool next(Tokens& tokens) {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      tokens.clear();
      std::istringstream ss(text);
      std::string t;
      while (ss >> t) tokens.push_back(t);
      if (!tokens.empty() && tokens[0][0] != '#') return true;
    }
    return false;
  }

  Tokens expect(const std::string& keyword, std::size_t values) {
    Tokens t;
    if (!next(t)) fail("unexpected end of file, expected '" + keyword + "'");
    if (t[0] != keyword) fail("expected '" + keyword + "', found '" + t[0] + "'");
    if (t.size() != values + 1) fail("'" + keyword + "' takes " + std::to_string(values) + " values");
    return t;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path_ + ":" + std::to_string(line_) + ": " + what, line_);
  }

  double number(const std::string& s) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("bad number '" + s + "'");
    return v;
  }

  long integer(const std::string& s) const {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("bad integer '" + s + "'");
    return v;
  }

  Eigen::VectorXd vector(const Tokens& t, std::size_t first, std::size_t n) const {
    if (t.size() < first + n) fail("too few values on '" + t[0] + "'");
    Eigen::VectorXd v(n);
    for (std::size_t i = 0; i < n; ++i) v(i) = number(t[first + i]);
    return v;
  }

  void header(const std::string& magic) {
    Tokens t;
    if (!next(t) || t.size() != 2 || t[0] != magic || t[1] != "1") {
      fail("missing '" + magic + " 1' header");
    }
  }

  std::istream& stream() { return in_; }
  int line() const { return line_; }

 private:
  std::ifstream in_;
  std::string path_;
  int line_ = 0;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

template <typename Derived>
void put(std::ostream& out, const Eigen::DenseBase<Derived>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ' ' << format_double(m(i, j));
  }
}

// 12 numbers: the 3x4 matrix [R | t] row-major.
void put_pose(std::ostream& out, const Eigen::Matrix3d& R, const Eigen::Vector3d& t) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out << ' ' << format_double(R(i, j));
    out << ' ' << format_double(t(i));
  }
}

void put_se3(std::ostream& out, const PoseSE3d& T) { put_pose(out, T.rotation(), T.translation()); }

void put_sim3(std::ostream& out, const PoseSim3d& T) {
  put_pose(out, T.rotation(), T.translation());
  out << ' ' << format_double(T.scale());
}

std::pair<Eigen::Matrix3d, Eigen::Vector3d> get_pose(const LineReader& r, const Tokens& t,
                                                     std::size_t first) {
  const Eigen::VectorXd v = r.vector(t, first, 12);
  Eigen::Matrix3d M;
  Eigen::Vector3d p;
  for (int i = 0; i < 3; ++i) {
    M.row(i) = v.segment<3>(4 * i).transpose();
    p(i) = v(4 * i + 3);
  }
  return {M, p};
}

PoseSE3d get_se3(const LineReader& r, const Tokens& t, std::size_t first) {
  const auto [R, p] = get_pose(r, t, first);
  if (!(R.transpose() * R).isApprox(Eigen::Matrix3d::Identity(), 1e-9) || R.determinant() <= 0.0) {
    r.fail("pose rotation is not orthonormal");
  }
  return PoseSE3d(R, p);
}

PoseSim3d get_sim3(const LineReader& r, const Tokens& t, std::size_t first) {
  const auto [R, p] = get_pose(r, t, first);
  const double s = r.number(t.at(first + 12));
  if (!(s > 0.0)) r.fail("scale must be positive");
  if (!(R.transpose() * R).isApprox(Eigen::Matrix3d::Identity(), 1e-9) || R.determinant() <= 0.0) {
    r.fail("pose rotation is not orthonormal");
  }
  return PoseSim3d(R, p, s);
}

// "SPEC family p k base(p) lower(p) upper(p) mixing(p*k)"
void put_spec(std::ostream& out, const DecoderSpec& spec) {
  out << "SPEC " << to_string(spec.family) << ' ' << spec.param_count() << ' ' << spec.code_dim();
  put(out, spec.base.transpose());
  put(out, spec.lower.transpose());
  put(out, spec.upper.transpose());
  put(out, spec.mixing);
  out << '\n';
}

DecoderSpec get_spec(LineReader& r) {
  Tokens t;
  if (!r.next(t) || t[0] != "SPEC" || t.size() < 4) r.fail("expected 'SPEC family p k ...'");
  DecoderSpec spec;
  try {
    spec.family = shape_family_from_string(t[1]);
  } catch (const ParameterError& e) {
    r.fail(e.what());
  }
  const long p = r.integer(t[2]);
  const long k = r.integer(t[3]);
  if (p < 1 || k < 0) r.fail("bad SPEC dimensions");
  if (t.size() != static_cast<std::size_t>(4 + 3 * p + p * k)) r.fail("SPEC value count mismatch");
  spec.base = r.vector(t, 4, p);
  spec.lower = r.vector(t, 4 + p, p);
  spec.upper = r.vector(t, 4 + 2 * p, p);
  const Eigen::VectorXd m = r.vector(t, 4 + 3 * p, p * k);
  spec.mixing.resize(p, k);
  for (long i = 0; i < p; ++i) {
    for (long j = 0; j < k; ++j) spec.mixing(i, j) = m(i * k + j);
  }
  try {
    spec.validate();
  } catch (const ParameterError& e) {
    r.fail(e.what());
  }
  return spec;
}

void put_code(std::ostream& out, const char* keyword, const ShapeCode& z) {
  out << keyword << ' ' << z.size();
  put(out, z.transpose());
  out << '\n';
}

ShapeCode get_code(LineReader& r, const Tokens& t) {
  if (t.size() < 2) r.fail("missing code dimension");
  const long k = r.integer(t[1]);
  if (k < 0 || t.size() != static_cast<std::size_t>(2 + k)) r.fail("code value count mismatch");
  return r.vector(t, 2, k);
}

}  // namespace

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

void write_scene(const fs::path& path, const SceneSpec& scene) {
  std::ofstream out = open_out(path);
  out << "objslam-scene 1\n";
  out << "SEED " << scene.seed << '\n';
  const Camera& c = scene.camera;
  out << "CAMERA " << format_double(c.fx()) << ' ' << format_double(c.fy()) << ' '
      << format_double(c.cx()) << ' ' << format_double(c.cy()) << ' ' << c.width << ' '
      << c.height << '\n';
  const NoiseModel& n = scene.noise;
  out << "NOISE " << format_double(n.depth) << ' ' << format_double(n.pixel);
  put(out, n.odometry.transpose());
  out << ' ' << format_double(n.init_rotation_deg) << ' ' << format_double(n.init_translation)
      << ' ' << format_double(n.init_scale) << '\n';
  out << "SAMPLING " << scene.surface_points << ' ' << scene.object_landmarks << ' '
      << scene.min_mask_pixels << ' ' << (scene.ground_normal ? 1 : 0) << ' '
      << format_double(scene.init_scale_bias);
  put(out, scene.init_anchor.transpose());
  out << '\n';
  for (const SceneObject& o : scene.objects) {
    out << "OBJECT\n";
    put_spec(out, o.spec);
    put_code(out, "CODE", o.z);
    out << "POSE";
    put_sim3(out, o.T_wo);
    out << '\n';
    for (const auto& box : o.sample_regions) {
      out << "REGION";
      put(out, box.min().transpose());
      put(out, box.max().transpose());
      out << '\n';
    }
    out << "END_OBJECT\n";
  }
  for (const PoseSE3d& T : scene.trajectory) {
    out << "CAMERA_POSE";
    put_se3(out, T);
    out << '\n';
  }
  for (const Landmark& l : scene.landmarks) {
    out << "LANDMARK";
    put(out, l.position.transpose());
    put(out, l.normal.transpose());
    out << ' ' << format_double(l.cone_deg) << '\n';
  }
}

SceneSpec read_scene(const fs::path& path) {
  LineReader r(path);
  r.header("objslam-scene");
  SceneSpec scene;
  bool have_camera = false;
  Tokens t;
  while (r.next(t)) {
    const std::string& key = t[0];
    if (key == "SEED" && t.size() == 2) {
      scene.seed = static_cast<std::uint64_t>(r.integer(t[1]));
    } else if (key == "CAMERA" && t.size() == 7) {
      scene.camera = Camera::from_intrinsics(r.number(t[1]), r.number(t[2]), r.number(t[3]),
                                             r.number(t[4]), static_cast<int>(r.integer(t[5])),
                                             static_cast<int>(r.integer(t[6])));
      have_camera = true;
    } else if (key == "NOISE" && t.size() == 12) {
      const Eigen::VectorXd v = r.vector(t, 1, 11);
      scene.noise.depth = v(0);
      scene.noise.pixel = v(1);
      scene.noise.odometry = v.segment<6>(2);
      scene.noise.init_rotation_deg = v(8);
      scene.noise.init_translation = v(9);
      scene.noise.init_scale = v(10);
    } else if (key == "SAMPLING" && t.size() == 9) {
      scene.surface_points = static_cast<int>(r.integer(t[1]));
      scene.object_landmarks = static_cast<int>(r.integer(t[2]));
      scene.min_mask_pixels = static_cast<int>(r.integer(t[3]));
      scene.ground_normal = r.integer(t[4]) != 0;
      scene.init_scale_bias = r.number(t[5]);
      scene.init_anchor = r.vector(t, 6, 3);
    } else if (key == "OBJECT" && t.size() == 1) {
      SceneObject o;
      o.spec = get_spec(r);
      Tokens c;
      if (!r.next(c) || c[0] != "CODE") r.fail("expected 'CODE'");
      o.z = get_code(r, c);
      if (o.z.size() != o.spec.code_dim()) r.fail("code dimension does not match SPEC");
      o.T_wo = get_sim3(r, r.expect("POSE", 13), 1);
      while (true) {
        Tokens b;
        if (!r.next(b)) r.fail("missing END_OBJECT");
        if (b[0] == "END_OBJECT") break;
        if (b[0] != "REGION" || b.size() != 7) r.fail("expected 'REGION' with 6 values");
        const Eigen::VectorXd v = r.vector(b, 1, 6);
        o.sample_regions.emplace_back(Eigen::Vector3d(v.head<3>()), Eigen::Vector3d(v.tail<3>()));
      }
      scene.objects.push_back(std::move(o));
    } else if (key == "CAMERA_POSE" && t.size() == 13) {
      scene.trajectory.push_back(get_se3(r, t, 1));
    } else if (key == "LANDMARK" && t.size() == 8) {
      Landmark l;
      const Eigen::VectorXd v = r.vector(t, 1, 7);
      l.position = v.head<3>();
      l.normal = v.segment<3>(3);
      l.cone_deg = v(6);
      scene.landmarks.push_back(l);
    } else {
      r.fail("unexpected line '" + key + "'");
    }
  }
  if (!have_camera) r.fail("missing CAMERA");
  try {
    scene.validate();
  } catch (const ParameterError& e) {
    r.fail(e.what());
  }
  return scene;
}

void write_frames(const fs::path& path, const FrameLog& log) {
  std::ofstream out = open_out(path);
  out << "objslam-frames 1\n";
  out << "ORIGIN";
  put_se3(out, log.origin);
  out << '\n';
  for (const FrameObservation& f : log.frames) {
    out << "FRAME " << f.camera_id << '\n';
    out << "ODOMETRY";
    put_se3(out, f.odometry);
    out << '\n';
    for (const PointObservation& p : f.points) {
      out << "OBS " << p.id << ' ' << format_double(p.pixel.x()) << ' '
          << format_double(p.pixel.y()) << ' ' << format_double(p.depth) << '\n';
    }
    for (std::size_t d = 0; d < f.detections.size(); ++d) {
      const Detection& det = f.detections[d];
      const int gt = d < f.gt_associations.size() ? f.gt_associations[d] : -1;
      out << "DETECTION " << gt << '\n';
      out << "BBOX " << det.bbox.x_min << ' ' << det.bbox.y_min << ' ' << det.bbox.x_max << ' '
          << det.bbox.y_max << '\n';
      out << "INIT_POSE";
      put_sim3(out, det.init_pose);
      out << '\n';
      if (det.ground_normal) {
        out << "GROUND";
        put(out, det.ground_normal->transpose());
        out << '\n';
      }
      const std::vector<int> runs = det.mask.run_lengths();
      out << "MASK " << det.mask.width << ' ' << det.mask.height << ' ' << runs.size();
      for (int v : runs) out << ' ' << v;
      out << '\n';
      for (const SurfaceObservation& s : det.surface) {
        out << "SURFACE " << format_double(s.pixel.x()) << ' ' << format_double(s.pixel.y()) << ' '
            << format_double(s.depth) << '\n';
      }
      out << "LANDMARK_IDS " << det.landmark_ids.size();
      for (int id : det.landmark_ids) out << ' ' << id;
      out << '\n';
      out << "END_DETECTION\n";
    }
    out << "END_FRAME\n";
  }
}

FrameLog read_frames(const fs::path& path) {
  LineReader r(path);
  r.header("objslam-frames");
  FrameLog log;
  log.origin = get_se3(r, r.expect("ORIGIN", 12), 1);
  Tokens t;
  while (r.next(t)) {
    if (t[0] != "FRAME" || t.size() != 2) r.fail("expected 'FRAME id'");
    FrameObservation f;
    f.camera_id = static_cast<int>(r.integer(t[1]));
    f.odometry = get_se3(r, r.expect("ODOMETRY", 12), 1);
    while (true) {
      if (!r.next(t)) r.fail("missing END_FRAME");
      if (t[0] == "END_FRAME") break;
      if (t[0] == "OBS" && t.size() == 5) {
        f.points.push_back({static_cast<int>(r.integer(t[1])),
                            Eigen::Vector2d(r.number(t[2]), r.number(t[3])), r.number(t[4])});
        continue;
      }
      if (t[0] != "DETECTION" || t.size() != 2) r.fail("unexpected line '" + t[0] + "' in frame");
      Detection det;
      f.gt_associations.push_back(static_cast<int>(r.integer(t[1])));
      const Tokens b = r.expect("BBOX", 4);
      det.bbox = {static_cast<int>(r.integer(b[1])), static_cast<int>(r.integer(b[2])),
                  static_cast<int>(r.integer(b[3])), static_cast<int>(r.integer(b[4]))};
      det.init_pose = get_sim3(r, r.expect("INIT_POSE", 13), 1);
      while (true) {
        if (!r.next(t)) r.fail("missing END_DETECTION");
        const std::string& key = t[0];
        if (key == "END_DETECTION") break;
        if (key == "GROUND" && t.size() == 4) {
          det.ground_normal = Eigen::Vector3d(r.vector(t, 1, 3));
        } else if (key == "MASK" && t.size() >= 4) {
          const long n = r.integer(t[3]);
          if (n < 0 || t.size() != static_cast<std::size_t>(4 + n)) r.fail("MASK run count mismatch");
          std::vector<int> runs(n);
          for (long i = 0; i < n; ++i) runs[i] = static_cast<int>(r.integer(t[4 + i]));
          try {
            det.mask = Mask::from_run_lengths(static_cast<int>(r.integer(t[1])),
                                              static_cast<int>(r.integer(t[2])), runs);
          } catch (const Error& e) {
            r.fail(e.what());
          }
        } else if (key == "SURFACE" && t.size() == 4) {
          det.surface.push_back({Eigen::Vector2d(r.number(t[1]), r.number(t[2])), r.number(t[3])});
        } else if (key == "LANDMARK_IDS" && t.size() >= 2) {
          const long n = r.integer(t[1]);
          if (n < 0 || t.size() != static_cast<std::size_t>(2 + n)) r.fail("LANDMARK_IDS count mismatch");
          for (long i = 0; i < n; ++i) det.landmark_ids.push_back(static_cast<int>(r.integer(t[2 + i])));
        } else {
          r.fail("unexpected line '" + key + "' in detection");
        }
      }
      f.detections.push_back(std::move(det));
    }
    log.frames.push_back(std::move(f));
  }
  return log;
}

void write_depth(const fs::path& path, const DepthImage& image) {
  static_assert(std::endian::native == std::endian::little, "depth maps are little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "objslam-depth 1\n"
      << image.width << ' ' << image.height << '\n'
      << format_double(image.K(0, 0)) << ' ' << format_double(image.K(1, 1)) << ' '
      << format_double(image.K(0, 2)) << ' ' << format_double(image.K(1, 2)) << '\n';
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size() * sizeof(float)));
}

DepthImage read_depth(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string magic, version;
  DepthImage image;
  double fx, fy, cx, cy;
  if (!(in >> magic >> version) || magic != "objslam-depth" || version != "1") {
    throw FormatError(path.string() + ":1: missing 'objslam-depth 1' header", 1);
  }
  if (!(in >> image.width >> image.height) || image.width <= 0 || image.height <= 0) {
    throw FormatError(path.string() + ":2: bad image size", 2);
  }
  if (!(in >> fx >> fy >> cx >> cy)) throw FormatError(path.string() + ":3: bad intrinsics", 3);
  in.get();  // newline before the payload
  image.K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  image.data.resize(static_cast<std::size_t>(image.width) * image.height);
  in.read(reinterpret_cast<char*>(image.data.data()),
          static_cast<std::streamsize>(image.data.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(image.data.size() * sizeof(float))) {
    throw FormatError(path.string() + ":4: truncated depth payload", 4);
  }
  return image;
}

void write_obj(const fs::path& path, const TriangleMesh& mesh) {
  std::ofstream out = open_out(path);
  for (const auto& v : mesh.vertices) {
    out << 'v';
    put(out, v.transpose());
    out << '\n';
  }
  for (const auto& f : mesh.faces) out << "f " << f(0) + 1 << ' ' << f(1) + 1 << ' ' << f(2) + 1 << '\n';
}

TriangleMesh read_obj(const fs::path& path) {
  LineReader r(path);
  TriangleMesh mesh;
  Tokens t;
  while (r.next(t)) {
    if (t[0] == "v" && t.size() == 4) {
      mesh.vertices.emplace_back(r.vector(t, 1, 3));
    } else if (t[0] == "f" && t.size() == 4) {
      Eigen::Vector3i f;
      for (int i = 0; i < 3; ++i) {
        const long idx = r.integer(t[1 + i]);
        if (idx < 1 || idx > static_cast<long>(mesh.vertices.size())) r.fail("face index out of range");
        f(i) = static_cast<int>(idx - 1);
      }
      mesh.faces.push_back(f);
    } else {
      r.fail("unsupported OBJ line '" + t[0] + "'");
    }
  }
  return mesh;
}

void write_ply(const fs::path& path, const std::vector<Eigen::Vector3d>& points) {
  std::ofstream out = open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  for (const auto& p : points) {
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
  }
}

std::vector<Eigen::Vector3d> read_ply(const fs::path& path) {
  LineReader r(path);
  Tokens t;
  if (!r.next(t) || t[0] != "ply") r.fail("missing 'ply' magic");
  long count = -1;
  while (true) {
    if (!r.next(t)) r.fail("missing end_header");
    if (t[0] == "end_header") break;
    if (t[0] == "element" && t.size() == 3 && t[1] == "vertex") count = r.integer(t[2]);
  }
  if (count < 0) r.fail("missing vertex element");
  std::vector<Eigen::Vector3d> points;
  while (r.next(t)) {
    if (t.size() != 3) r.fail("expected 3 coordinates");
    points.emplace_back(r.vector(t, 0, 3));
  }
  if (static_cast<long>(points.size()) != count) r.fail("vertex count mismatch");
  return points;
}

void write_graph(const fs::path& path, const FactorGraph& graph) {
  std::ofstream out = open_out(path);
  out << "objslam-graph 1\n";
  const Camera& c = graph.camera;
  out << "INTRINSICS " << format_double(c.fx()) << ' ' << format_double(c.fy()) << ' '
      << format_double(c.cx()) << ' ' << format_double(c.cy()) << ' ' << c.width << ' '
      << c.height << '\n';
  for (const auto& [id, cam] : graph.cameras) {
    out << "CAMERA " << id << ' ' << (cam.fixed ? 1 : 0);
    put_se3(out, cam.T_wc);
    out << '\n';
  }
  for (const auto& [id, obj] : graph.objects) {
    out << "OBJECT " << id;
    put_se3(out, obj.T_wo);
    out << ' ' << format_double(obj.scale) << '\n';
    put_spec(out, obj.spec);
    put_code(out, "CODE", obj.z);
    out << "LANDMARK_IDS " << obj.landmark_ids.size();
    for (int l : obj.landmark_ids) out << ' ' << l;
    out << '\n';
  }
  for (const auto& [id, p] : graph.points) {
    out << "POINT " << id;
    put(out, p.transpose());
    out << '\n';
  }
  for (const CoEdge& e : graph.co_edges) {
    out << "EDGE_CO " << e.camera << ' ' << e.object;
    put_se3(out, e.T_co);
    put(out, e.covariance);
    out << '\n';
  }
  for (const CpEdge& e : graph.cp_edges) {
    out << "EDGE_CP " << e.camera << ' ' << e.point;
    put(out, e.pixel.transpose());
    put(out, e.covariance);
    out << '\n';
  }
}

FactorGraph read_graph(const fs::path& path) {
  LineReader r(path);
  r.header("objslam-graph");
  FactorGraph g;
  const Tokens in = r.expect("INTRINSICS", 6);
  g.camera = Camera::from_intrinsics(r.number(in[1]), r.number(in[2]), r.number(in[3]),
                                     r.number(in[4]), static_cast<int>(r.integer(in[5])),
                                     static_cast<int>(r.integer(in[6])));
  Tokens t;
  while (r.next(t)) {
    const std::string& key = t[0];
    if (key == "CAMERA" && t.size() == 15) {
      g.cameras[static_cast<int>(r.integer(t[1]))] = {get_se3(r, t, 3), r.integer(t[2]) != 0};
    } else if (key == "OBJECT" && t.size() == 15) {
      ObjectNode o;
      o.T_wo = get_se3(r, t, 2);
      o.scale = r.number(t[14]);
      o.spec = get_spec(r);
      Tokens c;
      if (!r.next(c) || c[0] != "CODE") r.fail("expected 'CODE'");
      o.z = get_code(r, c);
      Tokens l;
      if (!r.next(l) || l[0] != "LANDMARK_IDS" || l.size() < 2) r.fail("expected 'LANDMARK_IDS'");
      const long n = r.integer(l[1]);
      if (n < 0 || l.size() != static_cast<std::size_t>(2 + n)) r.fail("LANDMARK_IDS count mismatch");
      for (long i = 0; i < n; ++i) o.landmark_ids.insert(static_cast<int>(r.integer(l[2 + i])));
      g.objects[static_cast<int>(r.integer(t[1]))] = std::move(o);
    } else if (key == "POINT" && t.size() == 5) {
      g.points[static_cast<int>(r.integer(t[1]))] = r.vector(t, 2, 3);
    } else if (key == "EDGE_CO" && t.size() == 51) {
      CoEdge e;
      e.camera = static_cast<int>(r.integer(t[1]));
      e.object = static_cast<int>(r.integer(t[2]));
      e.T_co = get_se3(r, t, 3);
      const Eigen::VectorXd v = r.vector(t, 15, 36);
      for (int i = 0; i < 36; ++i) e.covariance(i / 6, i % 6) = v(i);
      g.co_edges.push_back(e);
    } else if (key == "EDGE_CP" && t.size() == 9) {
      CpEdge e;
      e.camera = static_cast<int>(r.integer(t[1]));
      e.point = static_cast<int>(r.integer(t[2]));
      e.pixel = r.vector(t, 3, 2);
      const Eigen::VectorXd v = r.vector(t, 5, 4);
      e.covariance << v(0), v(1), v(2), v(3);
      g.cp_edges.push_back(e);
    } else {
      r.fail("unexpected line '" + key + "'");
    }
  }
  try {
    g.validate();
  } catch (const ParameterError& e) {
    r.fail(e.what());
  }
  return g;
}

void write_trajectory(const fs::path& path, const std::vector<PoseSE3d>& poses) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Eigen::Quaterniond q(poses[i].rotation());
    out << i;
    put(out, poses[i].translation().transpose());
    out << ' ' << format_double(q.x()) << ' ' << format_double(q.y()) << ' '
        << format_double(q.z()) << ' ' << format_double(q.w()) << '\n';
  }
}

std::vector<PoseSE3d> read_trajectory(const fs::path& path) {
  LineReader r(path);
  std::vector<PoseSE3d> poses;
  Tokens t;
  while (r.next(t)) {
    if (t.size() != 8) r.fail("expected 'timestamp tx ty tz qx qy qz qw'");
    const Eigen::VectorXd v = r.vector(t, 1, 7);
    const Eigen::Quaterniond q(v(6), v(3), v(4), v(5));
    if (std::abs(q.norm() - 1.0) > 1e-6) r.fail("quaternion is not unit length");
    poses.emplace_back(q.normalized().toRotationMatrix(), Eigen::Vector3d(v.head<3>()));
  }
  return poses;
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : columns_(header.size()), out_(open_out(path)) {
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw ParameterError("CsvWriter: wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << '\n';
  out_.flush();
}

}  // namespace objslam
