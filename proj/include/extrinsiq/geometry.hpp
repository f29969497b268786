#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace extrinsiq {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Cross-product matrix: skew(v) * u == v.cross(u).
Mat3 skew(const Vec3& v);

/// Unit quaternion rotation, canonicalized to w >= 0.
class Rotation {
 public:
  Rotation() = default;

  /// Normalizes and canonicalizes; throws InvalidArgument on a zero quaternion.
  static Rotation from_quaternion(double w, double x, double y, double z);
  static Rotation from_matrix(const Mat3& r);
  static Rotation about_axis(const Vec3& axis, double angle_rad);
  static Rotation exp(const Vec3& omega);

  /// Rotation vector; throws NearPiAngle when angle >= pi - 1e-6.
  Vec3 log() const;
  /// Rotation vector without the near-pi guard (axis sign is arbitrary at pi).
  Vec3 log_unchecked() const;

  double angle() const;
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  Rotation inverse() const;
  Rotation operator*(const Rotation& other) const;
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

 private:
  explicit Rotation(const Eigen::Quaterniond& q);

  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

Rotation exp_so3(const Vec3& omega);
Vec3 log_so3(const Rotation& r);

/// Rigid transform x -> R x + t. Naming convention throughout: a pose
/// `a_from_b` maps coordinates expressed in frame b into frame a.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  Mat4 matrix() const;
};

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);
Vec3 transform_point(const Pose& p, const Vec3& x);

/// Plane as unit normal plus the vector from the frame origin to a point on
/// the plane. Only rho = normal . origin_offset enters any residual.
class Plane {
 public:
  Plane() = default;
  /// Normalizes `normal`; throws InvalidArgument if it is (near) zero.
  Plane(const Vec3& normal, const Vec3& origin_offset);

  const Vec3& normal() const { return normal_; }
  const Vec3& origin_offset() const { return origin_offset_; }
  double offset() const { return normal_.dot(origin_offset_); }
  double signed_distance(const Vec3& x) const { return normal_.dot(x) - offset(); }

  /// Same plane expressed in frame a, given a pose a_from_b and `this` in b.
  Plane transformed(const Pose& a_from_b) const;
  Plane flipped() const { return Plane(-normal_, origin_offset_); }

 private:
  Vec3 normal_ = Vec3::UnitZ();
  Vec3 origin_offset_ = Vec3::Zero();
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;
  int width = 0;   // pixels; 0 when the image extent is unknown
  int height = 0;

  Mat3 matrix() const;
  void validate() const;
  bool contains(const Vec2& pixel) const;
};

/// Homogeneous image line a*u + b*v + c = 0, stored with a^2 + b^2 = 1.
class ImageLine {
 public:
  ImageLine() = default;
  /// Throws DegenerateLine when (a, b) is (near) zero.
  explicit ImageLine(const Vec3& abc);
  /// Line through two pixels; throws CoincidentPoints.
  static ImageLine through(const Vec2& p, const Vec2& q);

  const Vec3& coefficients() const { return abc_; }
  /// Signed perpendicular distance in pixels.
  double distance(const Vec2& pixel) const { return abc_.x() * pixel.x() + abc_.y() * pixel.y() + abc_.z(); }

 private:
  Vec3 abc_ = Vec3(1.0, 0.0, 0.0);
};

/// Pinhole projection of a camera-frame point; throws NonPositiveDepth.
Vec2 project_camera_point(const CameraIntrinsics& k, const Vec3& x_camera);
Vec2 project(const CameraIntrinsics& k, const Pose& camera_from_sensor, const Vec3& x_sensor);

/// Plane through the camera centre containing the image line. Throws DegenerateLine.
Plane backprojected_plane(const CameraIntrinsics& k, const ImageLine& line);

/// Intersection pixel of two lines; throws ParallelLines.
Vec2 intersect_lines(const ImageLine& l1, const ImageLine& l2);

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace extrinsiq
