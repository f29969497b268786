#pragma once

#include <memory>

#include "extrinsiq/geometry.hpp"
#include "extrinsiq/nlls.hpp"

namespace extrinsiq {

using Row6 = Eigen::Matrix<double, 1, 6>;
using Jac4x6 = Eigen::Matrix<double, 4, 6>;

// Jacobians below are with respect to the left tangent [dw; dt] of the pose
// argument (see retract()).

// LIDAR point against the camera's target plane: n . (R p + t - d).
double residual_ppc(const Pose& camera_from_lidar, const Vec3& p_lidar, const Plane& plane_camera,
                    Row6* jacobian = nullptr);

// LIDAR edge point against the plane back-projected from an image line.
// Throws DegenerateLine.
double residual_pbpc(const Pose& camera_from_lidar, const Vec3& q_lidar, const ImageLine& line,
                     const CameraIntrinsics& k, Row6* jacobian = nullptr);

// Same, with the back-projected normal already computed.
double residual_pbpc(const Pose& camera_from_lidar, const Vec3& q_lidar, const Vec3& backprojected_normal,
                     Row6* jacobian = nullptr);

// Plane pair seen by A and B, pose a_from_b:
//   r[0..2] = n_a - R n_b,  r[3] = n_a . t + n_b . d_b - n_a . d_a
Eigen::Vector4d residual_msg_pair(const Pose& a_from_b, const Plane& plane_a, const Plane& plane_b,
                                  Jac4x6* jacobian = nullptr);

/// Inverse of the SO(3) left Jacobian.
Mat3 left_jacobian_inverse(const Vec3& phi);

// Discrepancy between a relative pose and a measurement of it:
//   e = [log(R Rz^T); t - tz]
Vec6 relative_pose_error(const Pose& a_from_b, const Pose& measured, Mat6* jacobian = nullptr);

// a_from_b = x_a * inv(x_b) for node poses x = sensor_from_global, with the
// 6x6 maps from each node's tangent to the tangent of a_from_b.
Pose relative_pose(const Pose& x_a, const Pose& x_b, Mat6* d_xa = nullptr, Mat6* d_xb = nullptr);

// Residual blocks. `weight` multiplies the residual (so the squared cost is
// scaled by weight^2).
std::unique_ptr<ResidualBlock> make_ppc_block(int pose, const Vec3& p_lidar, const Plane& plane_camera, double weight);
std::unique_ptr<ResidualBlock> make_pbpc_block(int pose, const Vec3& q_lidar, const Vec3& backprojected_normal,
                                               double weight);
std::unique_ptr<ResidualBlock> make_msg_pair_block(int pose, const Plane& plane_a, const Plane& plane_b,
                                                   double weight);
// Graph edges between two node poses (either may be fixed).
std::unique_ptr<ResidualBlock> make_relative_pose_block(int node_a, int node_b, const Pose& measured_a_from_b,
                                                        const Mat6& sqrt_information);
std::unique_ptr<ResidualBlock> make_graph_plane_block(int node_a, int node_b, const Plane& plane_a,
                                                      const Plane& plane_b, double weight);

/// Symmetric square root S with S^T S = information (negative eigenvalues clipped).
Mat6 sqrt_information(const Mat6& information);

}  // namespace extrinsiq
