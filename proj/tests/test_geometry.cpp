#include <gtest/gtest.h>

#include <cmath>

#include "extrinsiq/error.hpp"
#include "extrinsiq/geometry.hpp"
#include "extrinsiq/residuals.hpp"
#include "support.hpp"

using namespace extrinsiq;
using namespace extrinsiq::testing;

namespace {

Mat3 rodrigues(const Vec3& w) {
  const double th = w.norm();
  if (th == 0.0) return Mat3::Identity();
  const Mat3 k = skew(w / th);
  return Mat3::Identity() + std::sin(th) * k + (1.0 - std::cos(th)) * k * k;
}

Mat4 homogeneous(const Mat3& r, const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

CameraIntrinsics pinhole(double f, double cx, double cy) {
  CameraIntrinsics k;
  k.fx = k.fy = f;
  k.cx = cx;
  k.cy = cy;
  return k;
}

}  // namespace

TEST(Rotation, QuaternionIsUnitAndCanonical) {
  const Rotation r = Rotation::from_quaternion(-2.0, 0.4, -1.0, 0.2);
  EXPECT_NEAR(r.quaternion().norm(), 1.0, 1e-12);
  EXPECT_GE(r.quaternion().w(), 0.0);
  EXPECT_THROW(Rotation::from_quaternion(0, 0, 0, 0), Error);
}

TEST(Rotation, ExpMatchesRodrigues) {
  EXPECT_TRUE(exp_so3(Vec3::Zero()).matrix().isApprox(Mat3::Identity(), 1e-15));
  Mat3 rz;
  rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((exp_so3(Vec3(0, 0, kPi / 2)).matrix() - rz).norm(), 1e-15);

  Rng rng = derive_rng(11, {});
  for (int i = 0; i < 200; ++i) {
    const Vec3 w = random_unit(rng) * uniform(rng, 0.0, 3.1);
    EXPECT_LT((exp_so3(w).matrix() - rodrigues(w)).norm(), 1e-12);
  }
}

TEST(Rotation, LogInvertsExp) {
  const Vec3 w(0.1, -0.2, 0.3);
  EXPECT_LT((log_so3(exp_so3(w)) - w).norm(), 1e-12);

  Rng rng = derive_rng(12, {});
  for (int i = 0; i < 1000; ++i) {
    const Vec3 v = random_unit(rng) * uniform(rng, 0.0, kPi - 0.01);
    EXPECT_LT((log_so3(exp_so3(v)) - v).norm(), 1e-10);
  }
  // Tiny angles go through the series branch.
  const Vec3 tiny(1e-9, -2e-9, 5e-10);
  EXPECT_LT((log_so3(exp_so3(tiny)) - tiny).norm(), 1e-20);
}

TEST(Rotation, LogRejectsNearPi) {
  try {
    (void)log_so3(exp_so3(Vec3(0, kPi - 1e-8, 0)));
    FAIL() << "expected NearPiAngle";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNearPiAngle);
  }
}

TEST(Pose, ComposeExamples) {
  const Pose id;
  const Pose c = compose(id, id);
  EXPECT_EQ(c.rotation.angle(), 0.0);
  EXPECT_EQ(c.translation.norm(), 0.0);

  const Pose a{Rotation::about_axis(Vec3::UnitZ(), kPi / 2), Vec3(1, 0, 0)};
  const Pose b{Rotation::about_axis(Vec3::UnitZ(), kPi / 2), Vec3::Zero()};
  const Mat4 oracle = homogeneous(rodrigues(Vec3(0, 0, kPi / 2)), Vec3(1, 0, 0)) *
                      homogeneous(rodrigues(Vec3(0, 0, kPi / 2)), Vec3::Zero());
  EXPECT_LT((compose(a, b).matrix() - oracle).norm(), 1e-12);
  EXPECT_NEAR(compose(a, b).rotation.angle(), kPi, 1e-12);
}

TEST(Pose, TransformPointExamples) {
  EXPECT_EQ(transform_point(Pose{}, Vec3(1, 2, 3)), Vec3(1, 2, 3));
  EXPECT_EQ(transform_point(Pose{Rotation(), Vec3(0, 0, 1)}, Vec3::Zero()), Vec3(0, 0, 1));
  const Pose rz{Rotation::about_axis(Vec3::UnitZ(), kPi / 2), Vec3::Zero()};
  EXPECT_LT((transform_point(rz, Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(Pose, GroupLawsOnRandomPoses) {
  Rng rng = derive_rng(13, {});
  for (int i = 0; i < 1000; ++i) {
    const Pose a = random_pose(rng, 3.1, 5.0);
    const Pose b = random_pose(rng, 3.1, 5.0);
    const Pose c = random_pose(rng, 3.1, 5.0);
    const Pose l = compose(compose(a, b), c);
    const Pose r = compose(a, compose(b, c));
    EXPECT_LT(rotation_gap(l, r), 1e-10);
    EXPECT_LT(translation_gap(l, r), 1e-10);
    const Pose e = compose(a, invert(a));
    EXPECT_LT(e.rotation.angle(), 1e-10);
    EXPECT_LT(e.translation.norm(), 1e-10);
    // Matrix form agrees with the 4x4 product.
    EXPECT_LT((compose(a, b).matrix() - a.matrix() * b.matrix()).norm(), 1e-10);
  }
}

TEST(Projection, Examples) {
  EXPECT_LT((project(pinhole(1, 0, 0), Pose{}, Vec3(0, 0, 1))).norm(), 1e-15);
  const CameraIntrinsics k = pinhole(100, 320, 240);
  EXPECT_LT((project(k, Pose{}, Vec3(0, 0, 2)) - Vec2(320, 240)).norm(), 1e-12);
  EXPECT_LT((project(k, Pose{}, Vec3(1, 1, 2)) - Vec2(370, 290)).norm(), 1e-12);
}

TEST(Projection, RejectsPointsBehind) {
  const CameraIntrinsics k = pinhole(100, 320, 240);
  for (double z : {0.0, 1e-10, -1.0}) {
    try {
      (void)project(k, Pose{}, Vec3(0.1, 0.2, z));
      FAIL() << "z=" << z;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kNonPositiveDepth);
    }
  }
}

TEST(Projection, InvariantToHomogeneousScale) {
  Rng rng = derive_rng(14, {});
  CameraIntrinsics k = pinhole(800, 400, 300);
  k.skew = 0.5;
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng, 0.3, 0.2);
    const Vec3 x(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 3, 6));
    const double s = uniform(rng, 0.1, 10.0);
    // (s x, s) dehomogenizes to the same point; applying the 3x4 [R|t] to it
    // and dividing must land on the same pixel.
    const Eigen::Vector4d xh(s * x.x(), s * x.y(), s * x.z(), s);
    const Eigen::Vector3d cam = (p.matrix() * xh).head<3>();
    const Vec3 h = k.matrix() * cam;
    EXPECT_LT((project(k, p, x) - h.head<2>() / h.z()).norm(), 1e-9);
  }
}

TEST(BackprojectedPlane, Examples) {
  const CameraIntrinsics id = pinhole(1, 0, 0);
  Plane p = backprojected_plane(id, ImageLine(Vec3(1, 0, 0)));
  EXPECT_LT((p.normal() - Vec3(1, 0, 0)).norm(), 1e-15);
  EXPECT_EQ(p.offset(), 0.0);
  p = backprojected_plane(id, ImageLine(Vec3(0, 1, 0)));
  EXPECT_LT((p.normal() - Vec3(0, 1, 0)).norm(), 1e-15);

  const CameraIntrinsics k2 = pinhole(2, 0, 0);
  const Vec3 l = Vec3(1, 1, -4) / std::sqrt(2.0);
  const Vec3 expect = (Vec3(2, 2, -4) / std::sqrt(2.0)).normalized();
  EXPECT_LT((backprojected_plane(k2, ImageLine(l)).normal() - expect).norm(), 1e-12);
}

TEST(BackprojectedPlane, ContainsViewingRays) {
  Rng rng = derive_rng(15, {});
  for (int i = 0; i < 100; ++i) {
    CameraIntrinsics k = pinhole(uniform(rng, 200, 2000), uniform(rng, 100, 900), uniform(rng, 100, 700));
    k.fy = k.fx * uniform(rng, 0.9, 1.1);
    k.skew = uniform(rng, -1, 1);
    const Vec2 a(uniform(rng, 0, 1000), uniform(rng, 0, 800));
    const Vec2 b(uniform(rng, 0, 1000), uniform(rng, 0, 800));
    if ((a - b).norm() < 1.0) continue;
    const ImageLine line = ImageLine::through(a, b);
    const Plane pi = backprojected_plane(k, line);
    const Vec2 on = a + uniform(rng, -2, 2) * (b - a);
    const Vec3 ray = k.matrix().inverse() * Vec3(on.x(), on.y(), 1.0);
    for (double depth : {0.0, 0.5, 3.0, 40.0}) EXPECT_LT(std::abs(pi.signed_distance(depth * ray)), 1e-9);
  }
}

TEST(ImageLine, NormalizedAndDegenerate) {
  const ImageLine l(Vec3(3, 4, 10));
  EXPECT_NEAR(l.coefficients().head<2>().norm(), 1.0, 1e-15);
  EXPECT_NEAR(l.distance(Vec2(0, 0)), 2.0, 1e-15);
  EXPECT_THROW(ImageLine(Vec3(0, 0, 1)), Error);
  EXPECT_THROW(ImageLine::through(Vec2(1, 1), Vec2(1, 1)), Error);
}

TEST(IntersectLines, Examples) {
  EXPECT_LT(intersect_lines(ImageLine(Vec3(1, 0, 0)), ImageLine(Vec3(0, 1, 0))).norm(), 1e-15);
  EXPECT_LT((intersect_lines(ImageLine(Vec3(1, 0, -1)), ImageLine(Vec3(0, 1, -2))) - Vec2(1, 2)).norm(), 1e-15);
  const Vec2 p = intersect_lines(ImageLine(Vec3(1, 1, -2) / std::sqrt(2.0)), ImageLine(Vec3(1, -1, 0) / std::sqrt(2.0)));
  EXPECT_LT((p - Vec2(1, 1)).norm(), 1e-12);
  try {
    (void)intersect_lines(ImageLine(Vec3(1, 0, 0)), ImageLine(Vec3(1, 0, -5)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParallelLines);
  }
}

TEST(Plane, UnitNormalAndTangentialGauge) {
  Rng rng = derive_rng(16, {});
  for (int i = 0; i < 200; ++i) {
    const Plane pl = random_plane(rng);
    EXPECT_NEAR(pl.normal().norm(), 1.0, 1e-12);
    Vec3 v = random_vec(rng, 5.0);
    v -= v.dot(pl.normal()) * pl.normal();
    const Plane moved(pl.normal(), pl.origin_offset() + v);
    const Pose x = random_pose(rng);
    const Vec3 p = random_vec(rng, 3.0);
    EXPECT_LT(std::abs(residual_ppc(x, p, pl) - residual_ppc(x, p, moved)), 1e-12);
    const Plane other = random_plane(rng);
    EXPECT_LT((residual_msg_pair(x, pl, other) - residual_msg_pair(x, moved, other)).norm(), 1e-12);
    EXPECT_LT((residual_msg_pair(x, other, pl) - residual_msg_pair(x, other, moved)).norm(), 1e-12);
  }
}

TEST(Plane, TransformKeepsPointsOnPlane) {
  Rng rng = derive_rng(17, {});
  for (int i = 0; i < 100; ++i) {
    const Plane pl = random_plane(rng);
    const Pose x = random_pose(rng);
    Vec3 q = random_vec(rng, 4.0);
    q -= pl.signed_distance(q) * pl.normal();
    EXPECT_LT(std::abs(pl.transformed(x).signed_distance(transform_point(x, q))), 1e-12);
  }
}
