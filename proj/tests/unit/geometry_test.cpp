#include <gtest/gtest.h>

#include "nocs/geometry.hpp"
#include "support/random.hpp"

namespace nocs {
namespace {

using testing::random_rotation;
using testing::Rng;
using testing::uniform;

const CameraIntrinsics kSquare{100.0, 100.0, 50.0, 50.0, 100, 100};

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const Vec2 p = project({0, 0, 1}, kSquare);
  EXPECT_DOUBLE_EQ(p.x(), 50.0);
  EXPECT_DOUBLE_EQ(p.y(), 50.0);
}

TEST(Project, OffAxisPoint) {
  const Vec2 p = project({1, 0, 2}, kSquare);
  EXPECT_DOUBLE_EQ(p.x(), 100.0);
  EXPECT_DOUBLE_EQ(p.y(), 50.0);
}

TEST(Project, BehindCameraThrows) {
  try {
    project({0, 0, -1}, kSquare);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveDepth);
  }
  EXPECT_THROW(project({0, 0, 0}, kSquare), Error);
}

TEST(Backproject, Examples) {
  EXPECT_TRUE(backproject({50, 50}, 1.0, kSquare).isApprox(Vec3(0, 0, 1)));
  EXPECT_TRUE(backproject({100, 50}, 2.0, kSquare).isApprox(Vec3(1, 0, 2)));
  EXPECT_THROW(backproject({1, 1}, 0.0, kSquare), Error);
}

TEST(Backproject, RoundTripProperty) {
  Rng rng(7);
  const CameraIntrinsics k = testing::test_camera();
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec2 px(uniform(rng, 0, 640), uniform(rng, 0, 480));
    const double d = uniform(rng, 0.1, 100.0);
    worst = std::max(worst, (project(backproject(px, d, k), k) - px).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Intrinsics, Validation) {
  EXPECT_NO_THROW(kSquare.validate());
  EXPECT_THROW((CameraIntrinsics{0, 1, 0, 0, 10, 10}.validate()), Error);
  EXPECT_THROW((CameraIntrinsics{1, 1, 10, 0, 10, 10}.validate()), Error);
}

TEST(Rot6D, DecodeExamples) {
  EXPECT_TRUE(rot6d_decode({{1, 0, 0}, {0, 1, 0}}).isApprox(Mat3::Identity()));
  EXPECT_TRUE(rot6d_decode({{2, 0, 0}, {0, 3, 0}}).isApprox(Mat3::Identity()));
  try {
    rot6d_decode({{1, 0, 0}, {1, 0, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateInput);
  }
  EXPECT_THROW(rot6d_decode({{0, 0, 0}, {0, 1, 0}}), Error);
}

TEST(Rot6D, EncodeIdentity) {
  const Rotation6D r = rot6d_encode(Mat3::Identity());
  EXPECT_EQ(r.a1, Vec3(1, 0, 0));
  EXPECT_EQ(r.a2, Vec3(0, 1, 0));
}

TEST(Rot6D, RoundTripAndOrthonormalityProperty) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 r = random_rotation(rng);
    EXPECT_LT((rot6d_decode(rot6d_encode(r)) - r).cwiseAbs().maxCoeff(), 1e-9);
    // Arbitrary non-orthogonal inputs still decode into SO(3).
    const Rotation6D raw{testing::uniform_vec(rng, -3, 3), testing::uniform_vec(rng, -3, 3)};
    EXPECT_TRUE(is_rotation(rot6d_decode(raw), 1e-9));
  }
}

TEST(Rot6D, QuarterYawRoundTrip) {
  const Mat3 yaw = rotation_about(Vec3::UnitY(), M_PI / 2);
  EXPECT_LT((rot6d_decode(rot6d_encode(yaw)) - yaw).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Allocentric, OpticalAxisRayIsIdentity) {
  Rng rng(3);
  const Mat3 r = random_rotation(rng);
  const UnitRay axis = UnitRay::from({0, 0, 1});
  EXPECT_LT((allocentric_to_egocentric(r, axis) - r).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((egocentric_to_allocentric(r, axis) - r).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Allocentric, AntiparallelRayRejected) {
  try {
    allocentric_to_egocentric(Mat3::Identity(), UnitRay::from({0, 0, -1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateInput);
  }
}

TEST(Allocentric, ViewRotationTakesAxisToRay) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const UnitRay ray = UnitRay::from({uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, 0.05, 2)});
    const Mat3 v = view_rotation(ray);
    EXPECT_TRUE(is_rotation(v, 1e-12));
    EXPECT_LT((v * Vec3::UnitZ() - ray.direction()).norm(), 1e-12);
    // Minimal: the rotation axis is perpendicular to both the optical axis and the ray.
    const Eigen::AngleAxisd aa(v);
    EXPECT_NEAR(aa.axis().z(), 0.0, 1e-9);
  }
}

TEST(Allocentric, RoundTripProperty) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 r = random_rotation(rng);
    const UnitRay ray = UnitRay::from({uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, 0.01, 3)});
    EXPECT_LT((egocentric_to_allocentric(allocentric_to_egocentric(r, ray), ray) - r).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((allocentric_to_egocentric(egocentric_to_allocentric(r, ray), ray) - r).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Allocentric, SameAllocentricDifferentRays) {
  Rng rng(13);
  const Mat3 alloc = random_rotation(rng);
  const UnitRay a = UnitRay::from({0.3, -0.1, 1.0});
  const UnitRay b = UnitRay::from({-0.4, 0.2, 1.0});
  const Mat3 ego_a = allocentric_to_egocentric(alloc, a);
  const Mat3 ego_b = allocentric_to_egocentric(alloc, b);
  const Mat3 expected = view_rotation(b) * view_rotation(a).transpose() * ego_a;
  EXPECT_LT((ego_b - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BoxCorners, UnitCube) {
  OrientedBox3D box;
  const auto corners = box_corners(box);
  for (const auto& c : corners) EXPECT_TRUE((c.cwiseAbs() - Vec3::Constant(0.5)).isZero(1e-15));
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) EXPECT_GT((corners[i] - corners[j]).norm(), 0.5);
}

TEST(BoxCorners, TranslationAndRotationEquivariance) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    OrientedBox3D box{testing::uniform_vec(rng, -2, 2), testing::uniform_vec(rng, 0.1, 3), random_rotation(rng)};
    const Vec3 shift = testing::uniform_vec(rng, -5, 5);
    OrientedBox3D shifted = box;
    shifted.center += shift;
    const auto a = box_corners(box);
    const auto b = box_corners(shifted);
    for (int i = 0; i < 8; ++i) EXPECT_LT((b[i] - a[i] - shift).norm(), 1e-12);

    // Rigidly rotating the box about the origin rotates its corners.
    const Mat3 q = random_rotation(rng);
    OrientedBox3D turned{q * box.center, box.size, q * box.rotation};
    const auto c = box_corners(turned);
    for (int i = 0; i < 8; ++i) EXPECT_LT((c[i] - q * a[i]).norm(), 1e-12);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) EXPECT_NEAR((c[i] - c[j]).norm(), (a[i] - a[j]).norm(), 1e-12);
  }
}

}  // namespace
}  // namespace nocs
