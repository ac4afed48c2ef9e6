#include <gtest/gtest.h>

#include <Eigen/Core>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "objslam/bench.hpp"
#include "objslam/config.hpp"
#include "objslam/error.hpp"
#include "objslam/io.hpp"
#include "objslam/metrics.hpp"
#include "objslam/pipeline.hpp"

using namespace objslam;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("objslam_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

SceneSpec noisy_loop(std::uint64_t seed = 1) {
  LoopOptions o;
  o.seed = seed;
  o.cameras = 8;
  o.noise.depth = 0.01;
  o.noise.pixel = 1.0;
  o.noise.odometry << 0.05, 0.05, 0.05, 0.01, 0.01, 0.01;
  o.noise.init_rotation_deg = 5.0;
  return loop_scene(o);
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(-1.5e-7), "-1.5e-07");
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = n(rng);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(SceneIo, RoundTripIsExact) {
  const fs::path dir = temp_dir("scene");
  SingleObjectOptions o;
  o.partial = true;
  SceneSpec scene = single_object_scene(o);
  scene.noise.depth = 0.01;
  scene.init_scale_bias = 1.22;
  write_scene(dir / "scene.txt", scene);
  const SceneSpec back = read_scene(dir / "scene.txt");
  ASSERT_EQ(back.objects.size(), 1u);
  EXPECT_EQ(back.objects[0].z, scene.objects[0].z);
  EXPECT_EQ(back.objects[0].T_wo.matrix(), scene.objects[0].T_wo.matrix());
  EXPECT_EQ(back.objects[0].spec.mixing, scene.objects[0].spec.mixing);
  ASSERT_EQ(back.objects[0].sample_regions.size(), scene.objects[0].sample_regions.size());
  EXPECT_EQ(back.trajectory[0].matrix(), scene.trajectory[0].matrix());
  EXPECT_EQ(back.camera.K, scene.camera.K);
  EXPECT_EQ(back.noise.depth, 0.01);
  EXPECT_EQ(back.init_scale_bias, 1.22);
  EXPECT_EQ(back.init_anchor, scene.init_anchor);
  // Frames regenerated from the read scene are identical.
  const auto a = make_frames(scene);
  const auto b = make_frames(back);
  EXPECT_EQ(a[0].detections[0].init_pose.matrix(), b[0].detections[0].init_pose.matrix());
}

TEST(FramesIo, RoundTripIsExact) {
  const fs::path dir = temp_dir("frames");
  const SceneSpec scene = noisy_loop();
  const FrameLog log{scene.trajectory[0], make_frames(scene)};
  write_frames(dir / "frames.txt", log);
  const FrameLog back = read_frames(dir / "frames.txt");
  EXPECT_EQ(back.origin.matrix(), log.origin.matrix());
  ASSERT_EQ(back.frames.size(), log.frames.size());
  for (std::size_t i = 0; i < log.frames.size(); ++i) {
    const auto& f = log.frames[i];
    const auto& g = back.frames[i];
    EXPECT_EQ(g.camera_id, f.camera_id);
    EXPECT_EQ(g.odometry.matrix(), f.odometry.matrix());
    ASSERT_EQ(g.points.size(), f.points.size());
    for (std::size_t k = 0; k < f.points.size(); ++k) {
      EXPECT_EQ(g.points[k].id, f.points[k].id);
      EXPECT_EQ(g.points[k].pixel, f.points[k].pixel);
      EXPECT_EQ(g.points[k].depth, f.points[k].depth);
    }
    ASSERT_EQ(g.detections.size(), f.detections.size());
    EXPECT_EQ(g.gt_associations, f.gt_associations);
    for (std::size_t k = 0; k < f.detections.size(); ++k) {
      const Detection& a = f.detections[k];
      const Detection& b = g.detections[k];
      EXPECT_EQ(b.mask.bits, a.mask.bits);
      EXPECT_EQ(b.bbox.x_min, a.bbox.x_min);
      EXPECT_EQ(b.bbox.y_max, a.bbox.y_max);
      EXPECT_EQ(b.init_pose.matrix(), a.init_pose.matrix());
      EXPECT_EQ(b.ground_normal.has_value(), a.ground_normal.has_value());
      EXPECT_EQ(b.landmark_ids, a.landmark_ids);
      ASSERT_EQ(b.surface.size(), a.surface.size());
      for (std::size_t s = 0; s < a.surface.size(); ++s) {
        EXPECT_EQ(b.surface[s].pixel, a.surface[s].pixel);
        EXPECT_EQ(b.surface[s].depth, a.surface[s].depth);
      }
    }
  }
}

TEST(Mask, RunLengthRoundTrip) {
  Mask m(7, 3);
  m.set(0, 0);
  m.set(3, 1);
  m.set(4, 1);
  m.set(6, 2);
  const Mask back = Mask::from_run_lengths(7, 3, m.run_lengths());
  EXPECT_EQ(back.bits, m.bits);
  EXPECT_EQ(m.count(), 4);
  const BoundingBox box = m.bounding_box();
  EXPECT_EQ(box.x_min, 0);
  EXPECT_EQ(box.x_max, 6);
  EXPECT_EQ(box.y_min, 0);
  EXPECT_EQ(box.y_max, 2);
}

TEST(DepthIo, RoundTripAndTruncation) {
  const fs::path dir = temp_dir("depth");
  DepthImage img;
  img.width = 5;
  img.height = 4;
  img.K = Camera::from_intrinsics(100, 110, 2, 1.5, 5, 4).K;
  for (int i = 0; i < 20; ++i) img.data.push_back(0.25f * static_cast<float>(i));
  write_depth(dir / "d.depth", img);
  const DepthImage back = read_depth(dir / "d.depth");
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.height, 4);
  EXPECT_EQ(back.K, img.K);
  EXPECT_EQ(back.data, img.data);

  const std::string bytes = read_text(dir / "d.depth");
  write_text(dir / "short.depth", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_depth(dir / "short.depth"), FormatError);
}

TEST(MeshIo, ObjRoundTrip) {
  const fs::path dir = temp_dir("obj");
  const TriangleMesh mesh = decode_mesh(ShapeCode::Zero(8), car_spec(), 16);
  write_obj(dir / "m.obj", mesh);
  const TriangleMesh back = read_obj(dir / "m.obj");
  ASSERT_EQ(back.vertices.size(), mesh.vertices.size());
  ASSERT_EQ(back.faces.size(), mesh.faces.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) EXPECT_EQ(back.vertices[i], mesh.vertices[i]);
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) EXPECT_EQ(back.faces[i], mesh.faces[i]);
}

TEST(PointIo, PlyRoundTrip) {
  const fs::path dir = temp_dir("ply");
  std::vector<Eigen::Vector3d> pts{{1, 2, 3}, {0.1, -0.2, 1e-9}};
  write_ply(dir / "p.ply", pts);
  const auto back = read_ply(dir / "p.ply");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], pts[0]);
  EXPECT_EQ(back[1], pts[1]);
}

TEST(GraphIo, RoundTripPreservesCost) {
  const fs::path dir = temp_dir("graph");
  const SceneSpec scene = noisy_loop(2);
  const FrameLog log{scene.trajectory[0], make_frames(scene)};
  const SlamResult r = run_slam(log, scene.camera, car_spec(), SlamConfig{});
  write_graph(dir / "g.txt", r.graph);
  const FactorGraph back = read_graph(dir / "g.txt");
  EXPECT_EQ(back.cameras.size(), r.graph.cameras.size());
  EXPECT_EQ(back.objects.size(), r.graph.objects.size());
  EXPECT_EQ(back.points.size(), r.graph.points.size());
  EXPECT_EQ(back.co_edges.size(), r.graph.co_edges.size());
  EXPECT_EQ(back.cp_edges.size(), r.graph.cp_edges.size());
  const GraphConfig cfg;
  EXPECT_EQ(graph_cost(back, cfg).total(), graph_cost(r.graph, cfg).total());
  for (const auto& [id, obj] : r.graph.objects) {
    EXPECT_EQ(back.objects.at(id).T_wo.matrix(), obj.T_wo.matrix());
    EXPECT_EQ(back.objects.at(id).scale, obj.scale);
    EXPECT_EQ(back.objects.at(id).z, obj.z);
    EXPECT_EQ(back.objects.at(id).landmark_ids, obj.landmark_ids);
  }
}

TEST(TrajectoryIo, RoundTripWithinQuaternionPrecision) {
  const fs::path dir = temp_dir("traj");
  const SceneSpec scene = noisy_loop();
  write_trajectory(dir / "t.txt", scene.trajectory);
  const auto back = read_trajectory(dir / "t.txt");
  ASSERT_EQ(back.size(), scene.trajectory.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].translation(), scene.trajectory[i].translation());
    EXPECT_LT((back[i].rotation() - scene.trajectory[i].rotation()).norm(), 1e-14);
  }
}

TEST(Readers, ReportLineOfMalformedInput) {
  const fs::path dir = temp_dir("bad");
  write_text(dir / "t.txt", "# comment\n0 0 0 0 0 0 0 1\n1 0 0 zero 0 0 0 1\n");
  try {
    read_trajectory(dir / "t.txt");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("t.txt:3:"), std::string::npos) << e.what();
  }
  write_text(dir / "s.txt", "objslam-scene 2\n");
  EXPECT_THROW(read_scene(dir / "s.txt"), FormatError);
  write_text(dir / "o.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n");
  EXPECT_THROW(read_obj(dir / "o.obj"), FormatError);
  EXPECT_THROW(read_graph(dir / "missing.txt"), Error);
}

TEST(CsvWriter, WritesHeaderAndRejectsRaggedRows) {
  const fs::path dir = temp_dir("csv");
  {
    CsvWriter csv(dir / "a.csv", {"x", "y"});
    csv.row({"1", "2"});
    EXPECT_THROW(csv.row({"1"}), ParameterError);
  }
  EXPECT_EQ(read_text(dir / "a.csv"), "x,y\n1,2\n");
}

TEST(Config, ParsesSectionsAndRoundTrips) {
  const Config c = parse_config(
      "# experiment\n"
      "[scene]\n"
      "kind = \"loop\"\n"
      "seed = 7   # trailing comment\n"
      "cameras = 12\n"
      "[noise]\n"
      "odometry_tx = 0.05\n"
      "[fit]\n"
      "use_rotation_prior = true\n"
      "[slam]\n"
      "association = \"visual\"\n");
  EXPECT_EQ(c.scene, SceneKind::kLoop);
  EXPECT_EQ(c.single.seed, 7u);
  EXPECT_EQ(c.loop.cameras, 12);
  EXPECT_EQ(c.noise.odometry(0), 0.05);
  EXPECT_TRUE(c.slam.fit.use_rotation_prior);
  EXPECT_EQ(c.slam.assoc.mode, AssociationMode::kVisual);
  EXPECT_EQ(c.make_scene().trajectory.size(), 12u);

  const std::string text = format_config(c);
  EXPECT_EQ(format_config(parse_config(text)), text);
  // Every default is spelled out.
  EXPECT_NE(text.find("lambda_render = 2.5"), std::string::npos);
  EXPECT_NE(text.find("tau = 2"), std::string::npos);
}

TEST(Config, RejectsMalformedInputWithLineNumbers) {
  const auto line_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const FormatError& e) {
      return e.line();
    }
    return -1;
  };
  EXPECT_EQ(line_of("[scene]\nseed = 1\n[nope]\n"), 3);
  EXPECT_EQ(line_of("[scene]\nbogus = 1\n"), 2);
  EXPECT_EQ(line_of("[scene]\nseed = 1\nseed = 2\n"), 3);
  EXPECT_EQ(line_of("[scene]\nseed = one\n"), 2);
  EXPECT_EQ(line_of("[fit]\nuse_rotation_prior = yes\n"), 2);
  EXPECT_EQ(line_of("seed = 1\n"), 1);
  EXPECT_EQ(line_of("[scene]\nkind = \"torus\"\n"), 2);
  EXPECT_EQ(line_of("[slam]\nassociation = \"radar\"\n"), 2);
  EXPECT_THROW(parse_config("[render]\nray_samples = 1\n"), FormatError);
}

TEST(Config, LoadConfigNamesTheFile) {
  const fs::path dir = temp_dir("cfg");
  write_text(dir / "c.toml", "[scene]\n\nseed = x\n");
  try {
    load_config(dir / "c.toml");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("c.toml:3:"), std::string::npos) << e.what();
  }
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"reference.toml", "partial.toml", "loop.toml", "zero_noise.toml"}) {
    EXPECT_NO_THROW(load_config(fs::path(OBJSLAM_SOURCE_DIR) / "configs" / name)) << name;
  }
}

TEST(Metrics, PoseErrors) {
  const Eigen::Matrix3d R = exp_so3(Eigen::Vector3d(0, 0.1, 0));
  EXPECT_NEAR(rotation_error_deg(R, Eigen::Matrix3d::Identity()), 0.1 * 180.0 / std::numbers::pi, 1e-9);
  EXPECT_EQ(rotation_error_deg(R, R), 0.0);
  EXPECT_NEAR(scale_error(2.2, 2.0), 0.1, 1e-15);
  const PoseError e = pose_error(PoseSim3d(R, Eigen::Vector3d(3, 4, 0), 1.1), PoseSim3d());
  EXPECT_DOUBLE_EQ(e.translation, 5.0);
  EXPECT_NEAR(e.scale, 0.1, 1e-15);
}

TEST(Metrics, TrajectoryErrors) {
  std::vector<PoseSE3d> gt;
  std::vector<PoseSE3d> est;
  for (int i = 0; i < 4; ++i) {
    gt.emplace_back(Eigen::Matrix3d::Identity(), Eigen::Vector3d(i, 0, 0));
    est.emplace_back(Eigen::Matrix3d::Identity(), Eigen::Vector3d(i, i == 3 ? 2.0 : 0.0, 0));
  }
  EXPECT_DOUBLE_EQ(absolute_trajectory_error(est, gt), 1.0);
  const RelativePoseError rpe = relative_pose_error(est, gt);
  EXPECT_NEAR(rpe.translation, std::sqrt(4.0 / 3.0), 1e-12);
  EXPECT_EQ(rpe.rotation_deg, 0.0);
  EXPECT_THROW(absolute_trajectory_error(est, {}), ParameterError);
}

TEST(Metrics, ChamferProperties) {
  const TriangleMesh mesh = decode_mesh(ShapeCode::Zero(8), car_spec(), 24);
  const auto a = sample_mesh(mesh, 500, 1);
  EXPECT_EQ(chamfer_distance(a, a), 0.0);
  // A rigid shift by d moves every nearest neighbour by at most d.
  std::vector<Eigen::Vector3d> b = a;
  for (auto& p : b) p += Eigen::Vector3d(0.05, 0, 0);
  const double c = chamfer_distance(a, b);
  EXPECT_GT(c, 0.0);
  EXPECT_LE(c, 0.05 + 1e-12);
  EXPECT_EQ(chamfer_distance(a, b), chamfer_distance(b, a));
  // Identical shapes differ only by the independent surface samples.
  const double self = shape_error(ShapeCode::Zero(8), PoseSim3d(), ShapeCode::Zero(8), PoseSim3d(), car_spec(), 24);
  const PoseSim3d shifted(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0.2, 0, 0), 1.0);
  EXPECT_LT(self, 0.05);
  EXPECT_GT(shape_error(ShapeCode::Zero(8), shifted, ShapeCode::Zero(8), PoseSim3d(), car_spec(), 24), self);
}

TEST(Metrics, MeshSamplesLieOnTriangles) {
  const DecoderSpec spec = DecoderSpec::superellipsoid(Eigen::Vector3d::Ones(), 2.0);
  const TriangleMesh mesh = decode_mesh(ShapeCode::Zero(8), spec, 32);
  for (const auto& p : sample_mesh(mesh, 300, 2)) EXPECT_NEAR(p.norm(), 1.0, 0.05);
}

TEST(Bench, IterationsToReach) {
  EXPECT_EQ(iterations_to_reach({10, 5, 2, 1}, 2.0), 2);
  EXPECT_EQ(iterations_to_reach({10, 5, 2, 1}, 0.5), -1);
  EXPECT_EQ(iterations_to_reach({1, 5}, 1.0), -1);
}
