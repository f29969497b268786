// Shared generators for the property tests.
#pragma once

#include <cmath>

#include "extrinsiq/geometry.hpp"
#include "extrinsiq/random.hpp"
#include "extrinsiq/sim.hpp"

namespace extrinsiq::testing {

inline Vec3 random_vec(Rng& rng, double scale = 1.0) {
  return {uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale)};
}

inline Vec3 random_unit(Rng& rng) {
  Vec3 v;
  do {
    v = Vec3(gaussian(rng, 1.0), gaussian(rng, 1.0), gaussian(rng, 1.0));
  } while (v.norm() < 1e-3);
  return v.normalized();
}

// Angle strictly below max_angle so log() stays away from pi.
inline Rotation random_rotation(Rng& rng, double max_angle = 3.0) {
  return Rotation::exp(random_unit(rng) * uniform(rng, 0.0, max_angle));
}

inline Pose random_pose(Rng& rng, double max_angle = 3.0, double max_t = 2.0) {
  return {random_rotation(rng, max_angle), random_vec(rng, max_t)};
}

inline Plane random_plane(Rng& rng) { return Plane(random_unit(rng), random_vec(rng, 3.0)); }

inline double rotation_gap(const Pose& a, const Pose& b) { return (a.rotation.inverse() * b.rotation).angle(); }
inline double translation_gap(const Pose& a, const Pose& b) { return (a.translation - b.translation).norm(); }

inline std::map<std::string, NoiseModel> lidar_noise(const SensorRig& rig, double sigma64, double sigma32 = 0.0) {
  std::map<std::string, NoiseModel> noise;
  for (const std::string& l : rig.lidars()) noise[l].lidar_range_sigma = l == "lidar64" ? sigma64 : sigma32;
  return noise;
}

}  // namespace extrinsiq::testing
