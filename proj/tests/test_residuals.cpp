#include <gtest/gtest.h>

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <random>

#include "objslam/jacobian_check.hpp"
#include "objslam/residuals.hpp"
#include "objslam/simkit.hpp"

using namespace objslam;

namespace {

Camera test_camera() { return Camera::from_intrinsics(500, 500, 320, 240, 640, 480); }

DecoderSpec sphere_spec(double radius) {
  return DecoderSpec::superellipsoid(Eigen::Vector3d::Constant(radius), 2.0);
}

PoseSim3d random_pose(std::mt19937_64& rng, double distance) {
  std::normal_distribution<double> n(0.0, 0.3);
  TwistSim3d xi;
  xi.phi = Eigen::Vector3d(n(rng), n(rng), n(rng));
  xi.sigma = 0.3 * n(rng);
  PoseSim3d T = exp_sim3(xi);
  return PoseSim3d(T.rotation(), Eigen::Vector3d(n(rng), n(rng), distance + n(rng)), T.scale());
}

ShapeCode random_code(int k, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.3);
  ShapeCode z(k);
  for (int i = 0; i < k; ++i) z(i) = n(rng);
  return z;
}

// f(delta) over [xi_oc; z] with a left perturbation of T_oc.
template <typename F>
Eigen::MatrixXd fd_pose_code(const PoseSim3d& T_oc, const ShapeCode& z, F residual) {
  const int k = static_cast<int>(z.size());
  const auto f = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
    const PoseSim3d T = exp_sim3(TwistSim3d::from_vector(d.head<kSim3Dof>())) * T_oc;
    return Eigen::VectorXd::Constant(1, residual(T, z + d.tail(k)));
  };
  return numeric_jacobian(f, kSim3Dof + k);
}

}  // namespace

TEST(SurfaceResidual, ZeroOnGroundTruthSurface) {
  const Camera cam = test_camera();
  const DecoderSpec spec = car_spec();
  std::mt19937_64 rng(1);
  const ShapeCode z = random_code(spec.code_dim(), rng);
  const PoseSim3d T_co(exp_so3(Eigen::Vector3d(0.1, 0.8, 0.05)), Eigen::Vector3d(0.2, 0.1, 8.0), 2.0);
  const DecodedShape shape = decode_shape(z, spec);
  int hits = 0;
  for (int y = 200; y < 280; y += 7) {
    for (int x = 240; x < 400; x += 9) {
      const RayHit h = sphere_trace(cam, Eigen::Vector2d(x, y), T_co, shape, spec);
      if (!h.hit) continue;
      ++hits;
      const SurfaceObservation obs{Eigen::Vector2d(x, y), h.depth};
      EXPECT_NEAR(surface_residual(obs, T_co.inverse(), z, spec, cam), 0.0, 1e-6);
    }
  }
  EXPECT_GT(hits, 20);
}

TEST(SurfaceResidual, SphereDistanceOracle) {
  const Camera cam = test_camera();
  const DecoderSpec spec = sphere_spec(1.0);
  const ShapeCode z = ShapeCode::Zero(spec.code_dim());
  // Observed point at the optical center, depth 2 in the object frame at identity pose.
  const SurfaceObservation obs{Eigen::Vector2d(320, 240), 2.0};
  EXPECT_NEAR(surface_residual(obs, PoseSim3d::Identity(), z, spec, cam), 1.0, 1e-14);
}

TEST(SurfaceJacobian, OriginKillsRotationAndScale) {
  const Camera cam = test_camera();
  const DecoderSpec spec = car_spec();
  const ShapeCode z = ShapeCode::Zero(spec.code_dim());
  // The observation maps onto the object origin.
  const PoseSim3d T_oc(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, -5), 1.0);
  const SurfaceObservation obs{Eigen::Vector2d(320, 240), 5.0};
  const Eigen::RowVectorXd J = surface_jacobian(obs, T_oc, z, spec, cam);
  EXPECT_TRUE(J.segment<4>(3).isZero());
}

TEST(SurfaceJacobian, CodeBlockEqualsDecoderGradient) {
  const Camera cam = test_camera();
  const DecoderSpec spec = car_spec();
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const ShapeCode z = random_code(spec.code_dim(), rng);
    const PoseSim3d T_co = random_pose(rng, 6.0);
    const SurfaceObservation obs{Eigen::Vector2d(300 + i, 250), 6.0};
    const Eigen::Vector3d x = T_co.inverse() * (obs.depth * cam.ray(obs.pixel));
    const Eigen::RowVectorXd J = surface_jacobian(obs, T_co.inverse(), z, spec, cam);
    EXPECT_EQ(Eigen::VectorXd(J.tail(spec.code_dim()).transpose()),
              decode_gradients(x, z, spec).d_code);
  }
}

TEST(SurfaceJacobian, MatchesFiniteDifferences) {
  const Camera cam = test_camera();
  std::mt19937_64 rng(3);
  for (const DecoderSpec& spec : {car_spec(), DecoderSpec::superellipsoid({1.0, 0.5, 0.7}, 3.0)}) {
    int pass = 0;
    for (int i = 0; i < 100; ++i) {
      const ShapeCode z = random_code(spec.code_dim(), rng);
      const PoseSim3d T_oc = random_pose(rng, 6.0).inverse();
      std::uniform_real_distribution<double> u(-60, 60);
      const SurfaceObservation obs{Eigen::Vector2d(320 + u(rng), 240 + u(rng)), 6.0 + 0.02 * u(rng)};
      const auto r = [&](const PoseSim3d& T, const ShapeCode& zz) {
        return surface_residual(obs, T, zz, spec, cam);
      };
      const double err =
          relative_error(surface_jacobian(obs, T_oc, z, spec, cam), fd_pose_code(T_oc, z, r));
      if (err <= 1e-5) ++pass;
    }
    EXPECT_GE(pass, 99) << to_string(spec.family);
  }
}

TEST(RenderResidual, BackgroundMissIsZero) {
  const Camera cam = test_camera();
  const DecoderSpec spec = sphere_spec(1.0);
  const ShapeCode z = ShapeCode::Zero(spec.code_dim());
  const PoseSim3d T_oc = PoseSim3d(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 10), 1).inverse();
  EXPECT_EQ(render_residual(Eigen::Vector2d(10, 10), std::nullopt, T_oc, z, spec, cam, 32), 0.0);
}

TEST(RenderResidual, SurfacePixelWithinOneSpacing) {
  const Camera cam = test_camera();
  const DecoderSpec spec = sphere_spec(1.0);
  const ShapeCode z = ShapeCode::Zero(spec.code_dim());
  const PoseSim3d T_co(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 10), 1);
  const DepthRange range = depth_range(T_co, spec);
  const double r = render_residual(Eigen::Vector2d(320, 240), 9.0, T_co.inverse(), z, spec, cam, 32);
  EXPECT_LE(std::abs(r), range.spacing(32));
}

TEST(RenderResidual, BackgroundHitIsSilhouetteViolation) {
  const Camera cam = test_camera();
  const DecoderSpec spec = sphere_spec(1.0);
  const ShapeCode z = ShapeCode::Zero(spec.code_dim());
  const PoseSim3d T_co(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 10), 1);
  const DepthRange range = depth_range(T_co, spec);
  const double r = render_residual(Eigen::Vector2d(320, 240), std::nullopt, T_co.inverse(), z, spec, cam, 32);
  EXPECT_GT(r, 0.0);
  EXPECT_NEAR(r, range.escape_depth() - 9.0, range.spacing(32));
}

TEST(RenderJacobian, ZeroOutsideBand) {
  const Camera cam = test_camera();
  const DecoderSpec spec = sphere_spec(1.0);
  const ShapeCode z = ShapeCode::Zero(spec.code_dim());
  const PoseSim3d T_oc = PoseSim3d(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 10), 1).inverse();
  EXPECT_TRUE(render_jacobian(Eigen::Vector2d(10, 10), std::nullopt, T_oc, z, spec, cam, 32).isZero());
}

TEST(RenderJacobian, SparseEqualsDenseWithFewerCalls) {
  const Camera cam = test_camera();
  const DecoderSpec spec = car_spec();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-80, 80);
  int band_rays = 0;
  for (int i = 0; i < 300; ++i) {
    const ShapeCode z = random_code(spec.code_dim(), rng);
    const PoseSim3d T_co = random_pose(rng, 8.0);
    const DecodedShape shape = decode_shape(z, spec);
    const DepthRange range = depth_range(T_co, spec);
    const Eigen::Vector2d px(320 + u(rng), 240 + u(rng));
    const std::optional<double> obs = i % 2 ? std::optional<double>(8.0) : std::nullopt;
    const RenderTerm sparse = render_term(px, obs, T_co.inverse(), shape, range, cam, 32, 0.01, true,
                                          JacobianAssembly::kSparse);
    const RenderTerm dense = render_term(px, obs, T_co.inverse(), shape, range, cam, 32, 0.01, true,
                                         JacobianAssembly::kDense);
    EXPECT_EQ(sparse.r, dense.r);
    EXPECT_EQ(sparse.J, dense.J);
    if (sparse.touches_band) {
      ++band_rays;
      EXPECT_LT(sparse.gradient_calls, dense.gradient_calls);
    }
  }
  EXPECT_GT(band_rays, 10);
}

TEST(RenderJacobian, MatchesFiniteDifferencesAwayFromBranches) {
  const Camera cam = test_camera();
  const DecoderSpec spec = sphere_spec(1.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-60, 60);
  const double sigma = 0.05;
  int checked = 0;
  for (int i = 0; i < 400 && checked < 50; ++i) {
    const ShapeCode z = random_code(spec.code_dim(), rng);
    const PoseSim3d T_co = random_pose(rng, 8.0);
    const PoseSim3d T_oc = T_co.inverse();
    const DecodedShape shape = decode_shape(z, spec);
    const DepthRange range = depth_range(T_co, spec);
    const Eigen::Vector2d px(320 + u(rng), 240 + u(rng));
    const RayBundle b = trace_ray(cam, px, T_oc, shape, range, 32, sigma);
    bool near_branch = false;
    bool in_band = false;
    for (int k = 0; k < 32; ++k) {
      near_branch = near_branch || std::abs(std::abs(b.sdf(k)) - sigma) < 1e-4;
      in_band = in_band || std::abs(b.sdf(k)) < sigma;
    }
    if (near_branch || !in_band) continue;
    const RenderTerm t = render_term(px, 8.0, T_oc, shape, range, cam, 32, sigma, true);
    const auto r = [&](const PoseSim3d& T, const ShapeCode& zz) {
      return render_term(px, 8.0, T, decode_shape(zz, spec), range, cam, 32, sigma, false).r;
    };
    EXPECT_LE(relative_error(t.J, fd_pose_code(T_oc, z, r)), 1e-4);
    ++checked;
  }
  EXPECT_EQ(checked, 50);
}

TEST(CodePrior, ResidualIsCodeAndJacobianIsIdentity) {
  const ShapeCode zero = ShapeCode::Zero(8);
  EXPECT_TRUE(code_prior_block(zero).r.isZero());
  std::mt19937_64 rng(6);
  const ShapeCode z = random_code(8, rng);
  const ResidualBlock b = code_prior_block(z);
  EXPECT_EQ(b.r, z);
  EXPECT_TRUE(b.J.leftCols(kSim3Dof).isZero());
  EXPECT_EQ(Eigen::MatrixXd(b.J.rightCols(8)), Eigen::MatrixXd::Identity(8, 8));
}

TEST(RotationPrior, Examples) {
  const Eigen::Vector3d up(0, 1, 0);
  EXPECT_EQ(rotation_prior_residual(PoseSim3d::Identity(), up), 0.0);
  const PoseSim3d quarter(exp_so3(Eigen::Vector3d(std::numbers::pi / 2, 0, 0)), Eigen::Vector3d::Zero(), 1);
  EXPECT_NEAR(rotation_prior_residual(quarter, up), 1.0, 1e-15);
}

TEST(RotationPrior, ResidualInRangeAndJacobianMatches) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    const PoseSim3d T_oc(exp_so3(Eigen::Vector3d(2 * n(rng), 2 * n(rng), 2 * n(rng))),
                         Eigen::Vector3d(n(rng), n(rng), n(rng)), 1.5);
    const Eigen::Vector3d ng = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    const double r = rotation_prior_residual(T_oc, ng);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 2.0);
    const ShapeCode z = ShapeCode::Zero(4);
    const auto f = [&](const PoseSim3d& T, const ShapeCode&) { return rotation_prior_residual(T, ng); };
    EXPECT_LE(relative_error(rotation_prior_jacobian(T_oc, ng, 4), fd_pose_code(T_oc, z, f)), 1e-5);
  }
}
