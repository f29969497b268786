#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "extrinsiq/calibration.hpp"
#include "extrinsiq/geometry.hpp"
#include "extrinsiq/sim.hpp"

namespace extrinsiq {

// ------------------------------------------------------------------ MLRE

/// Edge points of one frame grouped by edge, with the image line of each edge.
struct MlreFrame {
  int observation = 0;
  std::array<ImageLine, 4> lines;
  std::array<std::vector<Vec3>, 4> edge_points;  // LIDAR frame
};

struct LineError {
  int observation = 0;
  int edge = 1;
  double mean_px = 0.0;
  int points = 0;
};

struct FrameError {
  int observation = 0;
  double mean_px = 0.0;  // mean over this frame's lines
  int lines = 0;
};

struct MlreReport {
  double mean_px = 0.0;             // points -> lines -> frames
  double point_weighted_px = 0.0;   // plain mean over all points
  int points = 0;
  int skipped = 0;                  // behind the camera
  std::vector<FrameError> frames;
  std::vector<LineError> lines;
};

/// Throws NonPositiveDepth when every point is behind the camera and
/// InvalidArgument when there are no points at all.
MlreReport mlre(const Pose& camera_from_lidar, const CameraIntrinsics& k, std::span<const MlreFrame> frames);

/// Frames for a camera/LIDAR pair: the simulator's labelled edge points and
/// the camera's observed lines, for observations seen by both sensors.
std::vector<MlreFrame> mlre_frames(const Dataset& ds, const std::string& camera, const std::string& lidar);

// ------------------------------------------------------------- stereo

struct StereoConsistencyError {
  double alpha_deg = 0.0;  // intrinsic X-Y-Z Euler angles of the error rotation
  double beta_deg = 0.0;
  double gamma_deg = 0.0;
  double x = 0.0;  // meters
  double y = 0.0;
  double z = 0.0;
  bool near_gimbal = false;  // |beta| within 1e-6 rad of 90 degrees
};

/// Compares c1_from_lidar * inv(c2_from_lidar) with the factory c1_from_c2.
StereoConsistencyError stereo_consistency(const Pose& c1_from_lidar, const Pose& c2_from_lidar,
                                          const Pose& factory_c1_from_c2);

/// R = Rx(alpha) Ry(beta) Rz(gamma), radians.
Vec3 euler_xyz(const Mat3& r);

// --------------------------------------------------------- pose error

struct PoseError {
  double rotation_deg = 0.0;
  double translation_m = 0.0;
};

PoseError pose_error(const Pose& estimate, const Pose& truth);

// -------------------------------------------------------------- sweep

struct SweepTrial {
  int index = 0;
  Vec6 init = Vec6::Zero();   // [log R; t]
  Vec6 final = Vec6::Zero();
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string failure;  // empty when the solve ran
  int cluster = -1;
};

struct SweepCluster {
  Pose representative;
  int members = 0;
};

struct SweepResult {
  std::vector<SweepTrial> trials;
  std::vector<SweepCluster> clusters;  // in order of first appearance
  int modal_cluster = -1;
  int modal_count = 0;
};

struct SweepOptions {
  int trials = 100;
  double sigma_rot_deg = 90.0;
  double sigma_t = 0.5;
  std::uint64_t seed = 0;
  double cluster_tolerance = 1e-4;  // radians and meters
  int threads = 0;                  // 0: hardware concurrency
};

/// Initial pose of one trial: exp(w) with w ~ N(0, sigma_rot^2 I), t ~ N(0, sigma_t^2 I).
Pose sweep_initial_pose(const SweepOptions& options, int trial);

/// Independent solves from random initial poses, clustered greedily in trial
/// order. Per-trial failures are recorded, not raised.
SweepResult random_init_sweep(const DatasetFeatures& features, Method method, const std::string& a,
                              const std::string& b, const SweepOptions& sweep,
                              const CalibrationOptions& options = {});

// ---------------------------------------------------------- benchmark

/// Seeded noisy benchmark: one LIDAR much noisier than the rest.
struct BenchmarkConfig {
  int views = 100;
  std::string noisy_lidar = "lidar64";
  double noisy_range_sigma = 0.03;  // meters
  double range_sigma = 0.01;        // every other LIDAR
  double pixel_sigma = 0.5;
};

std::map<std::string, NoiseModel> benchmark_noise(const SensorRig& rig, const BenchmarkConfig& config = {});
Dataset benchmark_dataset(const SensorRig& rig, std::uint64_t seed, const BenchmarkConfig& config = {});

// ------------------------------------------------------------ helpers

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double standard_deviation(std::span<const double> values);

}  // namespace extrinsiq
