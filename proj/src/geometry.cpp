#include "extrinsiq/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "extrinsiq/error.hpp"

namespace extrinsiq {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kDegenerateLine: return "DegenerateLine";
    case ErrorCode::kNearPiAngle: return "NearPiAngle";
    case ErrorCode::kParallelLines: return "ParallelLines";
    case ErrorCode::kCoincidentPoints: return "CoincidentPoints";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInfeasibleScene: return "InfeasibleScene";
    case ErrorCode::kNoReturns: return "NoReturns";
    case ErrorCode::kTargetNotVisible: return "TargetNotVisible";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kMissingEdge: return "MissingEdge";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kDidNotConverge: return "DidNotConverge";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kInsufficientViews: return "InsufficientViews";
    case ErrorCode::kDisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::kUnknownSensor: return "UnknownSensor";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<     0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

// ---------------------------------------------------------------- Rotation

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q) {
  if (std::abs(q_.norm() - 1.0) > 4 * kEps) q_.normalize();
  if (q_.w() < 0.0) q_.coeffs() = -q_.coeffs();
}

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
  const Eigen::Quaterniond q(w, x, y, z);
  if (!(q.norm() > 1e-300)) {
    throw Error(ErrorCode::kInvalidArgument, "zero quaternion");
  }
  return Rotation(q);
}

Rotation Rotation::from_matrix(const Mat3& r) { return Rotation(Eigen::Quaterniond(r)); }

Rotation Rotation::about_axis(const Vec3& axis, double angle_rad) {
  return exp(axis.normalized() * angle_rad);
}

Rotation Rotation::exp(const Vec3& omega) {
  const double theta = omega.norm();
  const double half = 0.5 * theta;
  double w = 0.0;
  double k = 0.0;  // sin(theta/2) / theta
  if (theta < 1e-8) {
    const double t2 = theta * theta;
    w = 1.0 - t2 / 8.0;
    k = 0.5 - t2 / 48.0;
  } else {
    w = std::cos(half);
    k = std::sin(half) / theta;
  }
  return Rotation(Eigen::Quaterniond(w, k * omega.x(), k * omega.y(), k * omega.z()));
}

Vec3 Rotation::log_unchecked() const {
  const Vec3 v = q_.vec();
  const double n = v.norm();
  const double w = q_.w();
  double factor = 0.0;  // theta / n
  if (n < 1e-10) {
    // w > 0 here since the quaternion is canonical and unit.
    factor = 2.0 / w - 2.0 * n * n / (3.0 * w * w * w);
  } else {
    factor = 2.0 * std::atan2(n, w) / n;
  }
  return factor * v;
}

Vec3 Rotation::log() const {
  if (angle() >= kPi - 1e-6) {
    throw Error(ErrorCode::kNearPiAngle, "rotation angle too close to pi for a unique logarithm");
  }
  return log_unchecked();
}

double Rotation::angle() const { return 2.0 * std::atan2(q_.vec().norm(), std::abs(q_.w())); }

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Rotation Rotation::operator*(const Rotation& other) const { return Rotation(q_ * other.q_); }

Rotation exp_so3(const Vec3& omega) { return Rotation::exp(omega); }
Vec3 log_so3(const Rotation& r) { return r.log(); }

// -------------------------------------------------------------------- Pose

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose invert(const Pose& p) {
  const Rotation r_inv = p.rotation.inverse();
  return {r_inv, -(r_inv * p.translation)};
}

Vec3 transform_point(const Pose& p, const Vec3& x) { return p.rotation * x + p.translation; }

// ------------------------------------------------------------------- Plane

Plane::Plane(const Vec3& normal, const Vec3& origin_offset) : origin_offset_(origin_offset) {
  const double n = normal.norm();
  if (!(n > 1e-12)) throw Error(ErrorCode::kInvalidArgument, "plane normal is zero");
  // Leave already-unit input alone so serialized planes reload bit-exact.
  normal_ = std::abs(n - 1.0) <= 4 * kEps ? normal : Vec3(normal / n);
}

Plane Plane::transformed(const Pose& a_from_b) const {
  return Plane(a_from_b.rotation * normal_, transform_point(a_from_b, origin_offset_));
}

// ------------------------------------------------------- CameraIntrinsics

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  // clang-format off
  k << fx, skew, cx,
       0.0, fy,  cy,
       0.0, 0.0, 1.0;
  // clang-format on
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (width < 0 || height < 0) throw Error(ErrorCode::kInvalidArgument, "negative image size");
}

bool CameraIntrinsics::contains(const Vec2& pixel) const {
  if (width <= 0 || height <= 0) return true;
  return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width && pixel.y() <= height;
}

// --------------------------------------------------------------- ImageLine

ImageLine::ImageLine(const Vec3& abc) {
  const double n = abc.head<2>().norm();
  if (!(n > 1e-300) || !(n > 1e-12 * abc.norm())) {
    throw Error(ErrorCode::kDegenerateLine, "line has vanishing (a, b)");
  }
  abc_ = std::abs(n - 1.0) <= 4 * kEps ? abc : Vec3(abc / n);
}

ImageLine ImageLine::through(const Vec2& p, const Vec2& q) {
  if ((p - q).norm() < 1e-12) throw Error(ErrorCode::kCoincidentPoints, "line endpoints coincide");
  return ImageLine(Vec3(p.x(), p.y(), 1.0).cross(Vec3(q.x(), q.y(), 1.0)));
}

// ------------------------------------------------------------ projections

Vec2 project_camera_point(const CameraIntrinsics& k, const Vec3& x) {
  if (!(x.z() > 1e-9)) throw Error(ErrorCode::kNonPositiveDepth, "point is behind the camera");
  const double u = x.x() / x.z();
  const double v = x.y() / x.z();
  return {k.fx * u + k.skew * v + k.cx, k.fy * v + k.cy};
}

Vec2 project(const CameraIntrinsics& k, const Pose& camera_from_sensor, const Vec3& x_sensor) {
  return project_camera_point(k, transform_point(camera_from_sensor, x_sensor));
}

Plane backprojected_plane(const CameraIntrinsics& k, const ImageLine& line) {
  const Vec3 n = k.matrix().transpose() * line.coefficients();
  if (n.norm() < 1e-12) throw Error(ErrorCode::kDegenerateLine, "K^T l vanishes");
  return Plane(n, Vec3::Zero());
}

Vec2 intersect_lines(const ImageLine& l1, const ImageLine& l2) {
  const Vec3 x = l1.coefficients().cross(l2.coefficients());
  if (std::abs(x.z()) < 1e-12 * x.norm() || x.norm() == 0.0) {
    throw Error(ErrorCode::kParallelLines, "lines do not intersect at a finite point");
  }
  return x.head<2>() / x.z();
}

}  // namespace extrinsiq
