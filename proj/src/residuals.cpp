#include "extrinsiq/residuals.hpp"

#include <array>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "extrinsiq/error.hpp"

namespace extrinsiq {

double residual_ppc(const Pose& camera_from_lidar, const Vec3& p_lidar, const Plane& plane_camera, Row6* jacobian) {
  const Vec3& n = plane_camera.normal();
  const Vec3 rp = camera_from_lidar.rotation * p_lidar;
  if (jacobian != nullptr) {
    jacobian->head<3>() = rp.cross(n).transpose();
    jacobian->tail<3>() = n.transpose();
  }
  return n.dot(rp + camera_from_lidar.translation) - plane_camera.offset();
}

double residual_pbpc(const Pose& camera_from_lidar, const Vec3& q_lidar, const Vec3& m, Row6* jacobian) {
  const Vec3 rq = camera_from_lidar.rotation * q_lidar;
  if (jacobian != nullptr) {
    jacobian->head<3>() = rq.cross(m).transpose();
    jacobian->tail<3>() = m.transpose();
  }
  return m.dot(rq + camera_from_lidar.translation);
}

double residual_pbpc(const Pose& camera_from_lidar, const Vec3& q_lidar, const ImageLine& line,
                     const CameraIntrinsics& k, Row6* jacobian) {
  return residual_pbpc(camera_from_lidar, q_lidar, backprojected_plane(k, line).normal(), jacobian);
}

Eigen::Vector4d residual_msg_pair(const Pose& a_from_b, const Plane& plane_a, const Plane& plane_b, Jac4x6* jacobian) {
  const Vec3& na = plane_a.normal();
  const Vec3 rnb = a_from_b.rotation * plane_b.normal();
  Eigen::Vector4d r;
  r.head<3>() = na - rnb;
  r(3) = na.dot(a_from_b.translation) + plane_b.offset() - plane_a.offset();
  if (jacobian != nullptr) {
    jacobian->setZero();
    jacobian->block<3, 3>(0, 0) = skew(rnb);
    jacobian->block<1, 3>(3, 3) = na.transpose();
  }
  return r;
}

Mat3 left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 w = skew(phi);
  double c;
  if (theta < 1e-5) {
    c = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    c = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Mat3::Identity() - 0.5 * w + c * w * w;
}

Vec6 relative_pose_error(const Pose& a_from_b, const Pose& measured, Mat6* jacobian) {
  const Vec3 phi = (a_from_b.rotation * measured.rotation.inverse()).log_unchecked();
  Vec6 e;
  e.head<3>() = phi;
  e.tail<3>() = a_from_b.translation - measured.translation;
  if (jacobian != nullptr) {
    jacobian->setIdentity();
    jacobian->block<3, 3>(0, 0) = left_jacobian_inverse(phi);
  }
  return e;
}

Pose relative_pose(const Pose& x_a, const Pose& x_b, Mat6* d_xa, Mat6* d_xb) {
  const Pose rel = compose(x_a, invert(x_b));
  const Mat3 r = rel.rotation.matrix();
  const Vec3 rtb = r * x_b.translation;
  if (d_xa != nullptr) {
    d_xa->setIdentity();
    d_xa->block<3, 3>(3, 0) = skew(rtb);
  }
  if (d_xb != nullptr) {
    d_xb->setZero();
    d_xb->block<3, 3>(0, 0) = -r;
    d_xb->block<3, 3>(3, 0) = -r * skew(x_b.translation);
    d_xb->block<3, 3>(3, 3) = -r;
  }
  return rel;
}

Mat6 sqrt_information(const Mat6& information) {
  const Mat6 sym = 0.5 * (information + information.transpose());
  Eigen::SelfAdjointEigenSolver<Mat6> eig(sym);
  const Vec6 root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

using RowMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor>>;

class PpcBlock final : public ResidualBlock {
 public:
  PpcBlock(int pose, const Vec3& p, const Plane& plane, double weight)
      : params_{pose}, p_(p), plane_(plane), weight_(weight) {}
  int dimension() const override { return 1; }
  const std::vector<int>& parameters() const override { return params_; }
  void evaluate(std::span<const Pose* const> poses, double* r, std::span<double* const> jac) const override {
    Row6 j;
    r[0] = weight_ * residual_ppc(*poses[0], p_, plane_, &j);
    if (!jac.empty() && jac[0] != nullptr) RowMap(jac[0], 1, 6) = weight_ * j;
  }

 private:
  std::vector<int> params_;
  Vec3 p_;
  Plane plane_;
  double weight_;
};

class PbpcBlock final : public ResidualBlock {
 public:
  PbpcBlock(int pose, const Vec3& q, const Vec3& m, double weight) : params_{pose}, q_(q), m_(m), weight_(weight) {}
  int dimension() const override { return 1; }
  const std::vector<int>& parameters() const override { return params_; }
  void evaluate(std::span<const Pose* const> poses, double* r, std::span<double* const> jac) const override {
    Row6 j;
    r[0] = weight_ * residual_pbpc(*poses[0], q_, m_, &j);
    if (!jac.empty() && jac[0] != nullptr) RowMap(jac[0], 1, 6) = weight_ * j;
  }

 private:
  std::vector<int> params_;
  Vec3 q_;
  Vec3 m_;
  double weight_;
};

class MsgPairBlock final : public ResidualBlock {
 public:
  MsgPairBlock(int pose, const Plane& a, const Plane& b, double weight)
      : params_{pose}, a_(a), b_(b), weight_(weight) {}
  int dimension() const override { return 4; }
  const std::vector<int>& parameters() const override { return params_; }
  void evaluate(std::span<const Pose* const> poses, double* r, std::span<double* const> jac) const override {
    Jac4x6 j;
    Eigen::Map<Eigen::Vector4d> out(r);
    out = weight_ * residual_msg_pair(*poses[0], a_, b_, &j);
    if (!jac.empty() && jac[0] != nullptr) RowMap(jac[0], 4, 6) = weight_ * j;
  }

 private:
  std::vector<int> params_;
  Plane a_;
  Plane b_;
  double weight_;
};

class RelativePoseBlock final : public ResidualBlock {
 public:
  RelativePoseBlock(int a, int b, const Pose& measured, const Mat6& sqrt_info)
      : params_{a, b}, measured_(measured), sqrt_info_(sqrt_info) {}
  int dimension() const override { return 6; }
  const std::vector<int>& parameters() const override { return params_; }
  void evaluate(std::span<const Pose* const> poses, double* r, std::span<double* const> jac) const override {
    Mat6 da;
    Mat6 db;
    const Pose rel = relative_pose(*poses[0], *poses[1], &da, &db);
    Mat6 de;
    Eigen::Map<Vec6> out(r);
    out = sqrt_info_ * relative_pose_error(rel, measured_, &de);
    if (jac.empty()) return;
    if (jac[0] != nullptr) RowMap(jac[0], 6, 6) = sqrt_info_ * de * da;
    if (jac[1] != nullptr) RowMap(jac[1], 6, 6) = sqrt_info_ * de * db;
  }

 private:
  std::vector<int> params_;
  Pose measured_;
  Mat6 sqrt_info_;
};

class GraphPlaneBlock final : public ResidualBlock {
 public:
  GraphPlaneBlock(int a, int b, const Plane& pa, const Plane& pb, double weight)
      : params_{a, b}, a_(pa), b_(pb), weight_(weight) {}
  int dimension() const override { return 4; }
  const std::vector<int>& parameters() const override { return params_; }
  void evaluate(std::span<const Pose* const> poses, double* r, std::span<double* const> jac) const override {
    Mat6 da;
    Mat6 db;
    const Pose rel = relative_pose(*poses[0], *poses[1], &da, &db);
    Jac4x6 j;
    Eigen::Map<Eigen::Vector4d> out(r);
    out = weight_ * residual_msg_pair(rel, a_, b_, &j);
    if (jac.empty()) return;
    if (jac[0] != nullptr) RowMap(jac[0], 4, 6) = weight_ * j * da;
    if (jac[1] != nullptr) RowMap(jac[1], 4, 6) = weight_ * j * db;
  }

 private:
  std::vector<int> params_;
  Plane a_;
  Plane b_;
  double weight_;
};

}  // namespace

std::unique_ptr<ResidualBlock> make_ppc_block(int pose, const Vec3& p_lidar, const Plane& plane_camera, double weight) {
  return std::make_unique<PpcBlock>(pose, p_lidar, plane_camera, weight);
}

std::unique_ptr<ResidualBlock> make_pbpc_block(int pose, const Vec3& q_lidar, const Vec3& backprojected_normal,
                                               double weight) {
  return std::make_unique<PbpcBlock>(pose, q_lidar, backprojected_normal.normalized(), weight);
}

std::unique_ptr<ResidualBlock> make_msg_pair_block(int pose, const Plane& plane_a, const Plane& plane_b,
                                                   double weight) {
  return std::make_unique<MsgPairBlock>(pose, plane_a, plane_b, weight);
}

std::unique_ptr<ResidualBlock> make_relative_pose_block(int node_a, int node_b, const Pose& measured_a_from_b,
                                                        const Mat6& sqrt_info) {
  if (node_a == node_b) throw Error(ErrorCode::kInvalidArgument, "relative-pose edge needs two distinct nodes");
  return std::make_unique<RelativePoseBlock>(node_a, node_b, measured_a_from_b, sqrt_info);
}

std::unique_ptr<ResidualBlock> make_graph_plane_block(int node_a, int node_b, const Plane& plane_a,
                                                      const Plane& plane_b, double weight) {
  if (node_a == node_b) throw Error(ErrorCode::kInvalidArgument, "plane edge needs two distinct nodes");
  return std::make_unique<GraphPlaneBlock>(node_a, node_b, plane_a, plane_b, weight);
}

}  // namespace extrinsiq
