#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "extrinsiq/geometry.hpp"
#include "extrinsiq/random.hpp"

namespace extrinsiq {

/// Rectangular planar board. Target frame: origin at the centroid, x to the
/// right and y up as seen from the front, z out of the front face. Corners
/// run counterclockwise from bottom-left; edge j joins corner j and j+1
/// (mod 4), so edge 1 is the bottom, 2 the right, 3 the top, 4 the left.
struct TargetModel {
  double width = 0.8;   // meters
  double height = 0.6;  // meters

  void validate() const;
  std::array<Vec3, 4> corners() const;
};

struct ScanPattern {
  int channel_count = 64;
  double elevation_min = deg2rad(-22.5);  // radians
  double elevation_max = deg2rad(22.5);
  double azimuth_step = deg2rad(0.2);

  void validate() const;
  double elevation(int ring) const;
  double ring_spacing() const;
  /// Nearest ring index for an elevation angle (unclamped).
  int nearest_ring(double elevation_rad) const;
};

struct NoiseModel {
  double lidar_range_sigma = 0.0;  // meters, along the ray
  double pixel_sigma = 0.0;        // pixels, per image coordinate
  double clutter_fraction = 0.0;   // share of LIDAR returns that are off-target

  void validate() const;
};

enum class SensorKind { kLidar, kCamera };

struct Sensor {
  std::string name;
  SensorKind kind = SensorKind::kLidar;
  Pose sensor_from_rig;
  ScanPattern scan;               // LIDAR only
  CameraIntrinsics intrinsics;    // camera only
  double confidence = 1.0;        // (0, 1], consumed by the multi-sensor graph

  bool is_lidar() const { return kind == SensorKind::kLidar; }
  bool is_camera() const { return kind == SensorKind::kCamera; }
  Vec3 position_in_rig() const { return invert(sensor_from_rig).translation; }
};

struct StereoPair {
  std::string left;
  std::string right;
  Pose factory_left_from_right;
};

struct SensorRig {
  std::vector<Sensor> sensors;
  std::vector<StereoPair> stereo_pairs;
  TargetModel target;

  void validate() const;
  bool has(const std::string& name) const;
  const Sensor& sensor(const std::string& name) const;
  /// Ground-truth extrinsic a_from_b.
  Pose extrinsic(const std::string& a, const std::string& b) const;
  std::vector<std::string> names() const;
  std::vector<std::string> lidars() const;
  std::vector<std::string> cameras() const;
};

/// Two LIDARs (64-channel and 32-channel), a 1600x1200 camera and an
/// 800x600 stereo pair with a 10 cm baseline.
SensorRig default_rig();

struct EdgePoint {
  int edge = 1;  // 1..4
  Vec3 xyz = Vec3::Zero();
};

struct LidarObservation {
  std::vector<Vec3> planar_points;
  std::vector<EdgePoint> edge_points;
  std::vector<Vec3> clutter_points;

  std::size_t size() const { return planar_points.size() + edge_points.size() + clutter_points.size(); }
  /// Every return in one list (planar, edge, clutter order) with labels dropped.
  std::vector<Vec3> all_points() const;
};

struct CameraObservation {
  Plane plane;  // target plane in the camera frame (from the true pose)
  std::array<ImageLine, 4> lines;
  std::array<Vec2, 4> corners;
  std::array<bool, 4> visible{};
};

struct TargetObservation {
  int pose_index = 0;
  Pose rig_from_target;
  std::map<std::string, LidarObservation> lidar;
  std::map<std::string, CameraObservation> camera;

  bool sees(const std::string& sensor) const { return lidar.count(sensor) || camera.count(sensor); }
};

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::map<std::string, NoiseModel> noise;
  std::string tool_version;
  double range_min = 0.0;
  double range_max = 0.0;
};

struct Dataset {
  SensorRig rig;
  std::vector<TargetObservation> observations;
  DatasetMeta meta;

  /// Noise configured for a sensor (zero model when absent).
  NoiseModel noise_for(const std::string& sensor) const;
  /// Number of observations in which both sensors produced data.
  int covisible(const std::string& a, const std::string& b) const;
};

struct SceneLimits {
  double range_min = 2.5;  // meters
  double range_max = 5.0;
};

/// Target poses (rig_from_target) held diagonally: in-plane roll in [30, 60]
/// degrees. Throws InfeasibleScene when rejection sampling gives up.
std::vector<Pose> sample_target_poses(const SensorRig& rig, int n, const SceneLimits& limits, Rng& rng);

LidarObservation simulate_lidar_scan(const SensorRig& rig, const std::string& sensor,
                                     const Pose& rig_from_target, const ScanPattern& pattern,
                                     const NoiseModel& noise, Rng& rng);

CameraObservation simulate_camera_view(const SensorRig& rig, const std::string& sensor,
                                       const Pose& rig_from_target, const NoiseModel& noise, Rng& rng);

/// Pure function of (rig, n_poses, noise, limits, seed).
Dataset build_dataset(const SensorRig& rig, int n_poses, const std::map<std::string, NoiseModel>& noise,
                      std::uint64_t seed, const SceneLimits& limits = {});

inline constexpr const char* kToolVersion = "extrinsiq 0.1.0";

}  // namespace extrinsiq
