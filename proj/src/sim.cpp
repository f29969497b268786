#include "extrinsiq/sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include <Eigen/SVD>

#include "extrinsiq/error.hpp"

namespace extrinsiq {

// ------------------------------------------------------------------ models

void TargetModel::validate() const {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target dimensions must be positive");
  }
}

std::array<Vec3, 4> TargetModel::corners() const {
  const double hw = 0.5 * width;
  const double hh = 0.5 * height;
  return {Vec3(-hw, -hh, 0.0), Vec3(hw, -hh, 0.0), Vec3(hw, hh, 0.0), Vec3(-hw, hh, 0.0)};
}

void ScanPattern::validate() const {
  if (channel_count < 2) throw Error(ErrorCode::kInvalidArgument, "scan pattern needs >= 2 channels");
  if (!(azimuth_step > 0.0)) throw Error(ErrorCode::kInvalidArgument, "azimuth step must be positive");
  if (!(elevation_max > elevation_min)) {
    throw Error(ErrorCode::kInvalidArgument, "vertical field of view is empty");
  }
}

double ScanPattern::ring_spacing() const {
  return (elevation_max - elevation_min) / static_cast<double>(channel_count - 1);
}

double ScanPattern::elevation(int ring) const { return elevation_min + ring * ring_spacing(); }

int ScanPattern::nearest_ring(double elevation_rad) const {
  return static_cast<int>(std::lround((elevation_rad - elevation_min) / ring_spacing()));
}

void NoiseModel::validate() const {
  if (!(lidar_range_sigma >= 0.0) || !(pixel_sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise sigmas must be non-negative");
  }
  if (!(clutter_fraction >= 0.0 && clutter_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "clutter fraction must lie in [0, 1)");
  }
}

// --------------------------------------------------------------------- rig

void SensorRig::validate() const {
  target.validate();
  std::set<std::string> seen;
  for (const Sensor& s : sensors) {
    if (s.name.empty()) throw Error(ErrorCode::kInvalidArgument, "sensor without a name");
    if (!seen.insert(s.name).second) throw Error(ErrorCode::kInvalidArgument, "duplicate sensor " + s.name);
    if (!s.sensor_from_rig.translation.allFinite()) throw Error(ErrorCode::kInvalidArgument, "non-finite pose for " + s.name);
    if (!(s.confidence > 0.0 && s.confidence <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "confidence of " + s.name + " must lie in (0, 1]");
    }
    if (s.is_lidar()) s.scan.validate();
    if (s.is_camera()) s.intrinsics.validate();
  }
  for (const StereoPair& p : stereo_pairs) {
    if (!has(p.left) || !has(p.right) || !sensor(p.left).is_camera() || !sensor(p.right).is_camera()) {
      throw Error(ErrorCode::kUnknownSensor, "stereo pair must reference two cameras of the rig");
    }
  }
}

bool SensorRig::has(const std::string& name) const {
  return std::any_of(sensors.begin(), sensors.end(), [&](const Sensor& s) { return s.name == name; });
}

const Sensor& SensorRig::sensor(const std::string& name) const {
  for (const Sensor& s : sensors) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::kUnknownSensor, "no sensor named '" + name + "'");
}

Pose SensorRig::extrinsic(const std::string& a, const std::string& b) const {
  return compose(sensor(a).sensor_from_rig, invert(sensor(b).sensor_from_rig));
}

std::vector<std::string> SensorRig::names() const {
  std::vector<std::string> out;
  for (const Sensor& s : sensors) out.push_back(s.name);
  return out;
}

std::vector<std::string> SensorRig::lidars() const {
  std::vector<std::string> out;
  for (const Sensor& s : sensors) {
    if (s.is_lidar()) out.push_back(s.name);
  }
  return out;
}

std::vector<std::string> SensorRig::cameras() const {
  std::vector<std::string> out;
  for (const Sensor& s : sensors) {
    if (s.is_camera()) out.push_back(s.name);
  }
  return out;
}

namespace {

// Rig frame: x forward, y left, z up. Camera frame: x right, y down, z forward.
Mat3 camera_axes_in_rig() {
  Mat3 b;
  b.col(0) = Vec3(0.0, -1.0, 0.0);
  b.col(1) = Vec3(0.0, 0.0, -1.0);
  b.col(2) = Vec3(1.0, 0.0, 0.0);
  return b;
}

Rotation ypr(double yaw_deg, double pitch_deg, double roll_deg) {
  return Rotation::about_axis(Vec3::UnitZ(), deg2rad(yaw_deg)) *
         Rotation::about_axis(Vec3::UnitY(), deg2rad(pitch_deg)) *
         Rotation::about_axis(Vec3::UnitX(), deg2rad(roll_deg));
}

Pose mount(const Rotation& rig_from_sensor, const Vec3& position) {
  return invert(Pose{rig_from_sensor, position});
}

}  // namespace

SensorRig default_rig() {
  SensorRig rig;
  const Rotation cam_base = Rotation::from_matrix(camera_axes_in_rig());

  Sensor lidar64;
  lidar64.name = "lidar64";
  lidar64.kind = SensorKind::kLidar;
  lidar64.sensor_from_rig = mount(ypr(1.5, 0.0, -0.7), Vec3(-0.05, 0.0, 0.22));
  lidar64.scan = ScanPattern{64, deg2rad(-22.5), deg2rad(22.5), deg2rad(0.2)};

  Sensor lidar32;
  lidar32.name = "lidar32";
  lidar32.kind = SensorKind::kLidar;
  lidar32.sensor_from_rig = Pose::identity();
  lidar32.scan = ScanPattern{32, deg2rad(-25.0), deg2rad(15.0), deg2rad(0.2)};

  Sensor basler;
  basler.name = "basler";
  basler.kind = SensorKind::kCamera;
  basler.sensor_from_rig = mount(ypr(-2.0, 1.0, 0.0) * cam_base, Vec3(0.10, 0.12, -0.15));
  basler.intrinsics = CameraIntrinsics{1400.0, 1400.0, 800.0, 600.0, 0.0, 1600, 1200};

  // The stereo heads share one orientation (rectified pair).
  const Rotation stereo_rot = ypr(0.5, 1.2, 0.0) * cam_base;
  const CameraIntrinsics stereo_k{700.0, 700.0, 400.0, 300.0, 0.0, 800, 600};

  Sensor left;
  left.name = "stereo_left";
  left.kind = SensorKind::kCamera;
  left.sensor_from_rig = mount(stereo_rot, Vec3(0.12, 0.05, -0.30));
  left.intrinsics = stereo_k;

  Sensor right = left;
  right.name = "stereo_right";
  right.sensor_from_rig = mount(stereo_rot, Vec3(0.12, -0.05, -0.30));

  rig.sensors = {lidar64, lidar32, basler, left, right};
  rig.stereo_pairs.push_back(
      {left.name, right.name, compose(left.sensor_from_rig, invert(right.sensor_from_rig))});
  return rig;
}

std::vector<Vec3> LidarObservation::all_points() const {
  std::vector<Vec3> out;
  out.reserve(size());
  out.insert(out.end(), planar_points.begin(), planar_points.end());
  for (const EdgePoint& e : edge_points) out.push_back(e.xyz);
  out.insert(out.end(), clutter_points.begin(), clutter_points.end());
  return out;
}

NoiseModel Dataset::noise_for(const std::string& sensor) const {
  auto it = meta.noise.find(sensor);
  return it == meta.noise.end() ? NoiseModel{} : it->second;
}

int Dataset::covisible(const std::string& a, const std::string& b) const {
  return static_cast<int>(std::count_if(observations.begin(), observations.end(),
                                        [&](const TargetObservation& o) { return o.sees(a) && o.sees(b); }));
}

// ------------------------------------------------------------ pose sampling

namespace {

bool visible_to(const Sensor& s, const TargetModel& target, const Pose& rig_from_target) {
  const Pose sensor_from_target = compose(s.sensor_from_rig, rig_from_target);
  const Vec3 normal = sensor_from_target.rotation * Vec3::UnitZ();
  const Vec3 centre = sensor_from_target.translation;
  // Front face toward the sensor, incidence below 70 degrees.
  if (!(-normal.dot(centre.normalized()) > std::cos(deg2rad(70.0)))) return false;

  for (const Vec3& corner : target.corners()) {
    const Vec3 x = transform_point(sensor_from_target, corner);
    if (s.is_camera()) {
      if (x.z() < 0.3) return false;
      const Vec2 px = project_camera_point(s.intrinsics, x);
      const double margin = 20.0;
      if (px.x() < margin || px.y() < margin || px.x() > s.intrinsics.width - margin ||
          px.y() > s.intrinsics.height - margin) {
        return false;
      }
    } else {
      const double elevation = std::atan2(x.z(), x.head<2>().norm());
      const double guard = s.scan.ring_spacing();
      if (elevation < s.scan.elevation_min + guard || elevation > s.scan.elevation_max - guard) return false;
      if (x.head<2>().norm() < 0.5) return false;
    }
  }
  return true;
}

double min_singular_value(const std::vector<Vec3>& normals) {
  Eigen::MatrixXd n(static_cast<Eigen::Index>(normals.size()), 3);
  for (std::size_t i = 0; i < normals.size(); ++i) n.row(static_cast<Eigen::Index>(i)) = normals[i].transpose();
  return Eigen::JacobiSVD<Eigen::MatrixXd>(n).singularValues()(2);
}

}  // namespace

std::vector<Pose> sample_target_poses(const SensorRig& rig, int n, const SceneLimits& limits, Rng& rng) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one target pose");
  if (!(limits.range_min > 0.0 && limits.range_max >= limits.range_min)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid range interval");
  }
  rig.validate();

  const long cap = 20000L * n;
  long attempts = 0;
  for (int restart = 0; restart < 10; ++restart) {
    std::vector<Pose> poses;
    while (static_cast<int>(poses.size()) < n) {
      if (++attempts > cap) {
        throw Error(ErrorCode::kInfeasibleScene, "could not place the target in every sensor's field of view");
      }
      const double range = uniform(rng, limits.range_min, limits.range_max);
      const double azimuth = deg2rad(uniform(rng, -14.0, 14.0));
      const double z = uniform(rng, -0.35, 0.15);
      const double horizontal = std::sqrt(std::max(range * range - z * z, 1e-6));
      const Vec3 centre(horizontal * std::cos(azimuth), horizontal * std::sin(azimuth), z);

      const Vec3 toward = -centre.normalized();
      const Vec3 x_axis = Vec3::UnitZ().cross(toward).normalized();
      const Vec3 y_axis = toward.cross(x_axis);
      Mat3 base;
      base << x_axis, y_axis, toward;

      const Rotation tilt = Rotation::about_axis(Vec3::UnitX(), deg2rad(uniform(rng, -30.0, 30.0))) *
                            Rotation::about_axis(Vec3::UnitY(), deg2rad(uniform(rng, -30.0, 30.0))) *
                            Rotation::about_axis(Vec3::UnitZ(), deg2rad(uniform(rng, 30.0, 60.0)));
      const Pose candidate{Rotation::from_matrix(base) * tilt, centre};

      bool ok = true;
      for (const Sensor& s : rig.sensors) {
        if (!visible_to(s, rig.target, candidate)) {
          ok = false;
          break;
        }
      }
      if (ok) poses.push_back(candidate);
    }
    if (n < 3) return poses;
    std::vector<Vec3> normals;
    for (const Pose& p : poses) normals.push_back(p.rotation * Vec3::UnitZ());
    if (min_singular_value(normals) > 1e-3) return poses;
  }
  throw Error(ErrorCode::kInfeasibleScene, "sampled target normals never spanned three dimensions");
}

// ------------------------------------------------------------ LIDAR model

namespace {

struct RayCaster {
  Mat3 rotation;  // sensor_from_target
  Vec3 centre;
  Vec3 normal;
  double half_width;
  double half_height;

  static Vec3 direction(double elevation, double azimuth) {
    return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation)};
  }

  // Hit point in the sensor frame and in target coordinates.
  bool cast(const Vec3& dir, Vec3* hit, Vec3* local) const {
    const double denom = normal.dot(dir);
    if (std::abs(denom) < 1e-12) return false;
    const double s = normal.dot(centre) / denom;
    if (!(s > 0.0)) return false;
    *hit = s * dir;
    *local = rotation.transpose() * (*hit - centre);
    return std::abs(local->x()) <= half_width && std::abs(local->y()) <= half_height;
  }
};

int nearest_edge(const Vec3& local, double hw, double hh) {
  const std::array<double, 4> d = {std::abs(local.y() + hh), std::abs(local.x() - hw), std::abs(local.y() - hh),
                                   std::abs(local.x() + hw)};
  return static_cast<int>(std::min_element(d.begin(), d.end()) - d.begin()) + 1;
}

// Exact boundary crossing between an azimuth that misses (`out`) and one
// that hits (`in`); returns the point on the hit side.
Vec3 boundary_crossing(const RayCaster& caster, double elevation, double out, double in, Vec3* local) {
  Vec3 hit;
  Vec3 loc;
  Vec3 best_hit;
  Vec3 best_local;
  caster.cast(RayCaster::direction(elevation, in), &best_hit, &best_local);
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (out + in);
    if (mid == out || mid == in) break;
    if (caster.cast(RayCaster::direction(elevation, mid), &hit, &loc)) {
      in = mid;
      best_hit = hit;
      best_local = loc;
    } else {
      out = mid;
    }
  }
  *local = best_local;
  return best_hit;
}

}  // namespace

LidarObservation simulate_lidar_scan(const SensorRig& rig, const std::string& sensor_name,
                                     const Pose& rig_from_target, const ScanPattern& pattern,
                                     const NoiseModel& noise, Rng& rng) {
  const Sensor& sensor = rig.sensor(sensor_name);
  if (!sensor.is_lidar()) throw Error(ErrorCode::kInvalidArgument, sensor_name + " is not a LIDAR");
  pattern.validate();
  noise.validate();

  const Pose sensor_from_target = compose(sensor.sensor_from_rig, rig_from_target);
  const Mat3 rot = sensor_from_target.rotation.matrix();
  const RayCaster caster{rot, sensor_from_target.translation, rot.col(2), 0.5 * rig.target.width,
                         0.5 * rig.target.height};

  // Angular window around the board.
  const Vec3 centre = sensor_from_target.translation;
  const double centre_az = std::atan2(centre.y(), centre.x());
  double az_lo = 0.0;
  double az_hi = 0.0;
  double el_lo = kPi;
  double el_hi = -kPi;
  for (const Vec3& c : rig.target.corners()) {
    const Vec3 x = transform_point(sensor_from_target, c);
    const double az = std::remainder(std::atan2(x.y(), x.x()) - centre_az, 2.0 * kPi);
    az_lo = std::min(az_lo, az);
    az_hi = std::max(az_hi, az);
    const double el = std::atan2(x.z(), x.head<2>().norm());
    el_lo = std::min(el_lo, el);
    el_hi = std::max(el_hi, el);
  }
  const double step = pattern.azimuth_step;
  const long k_lo = static_cast<long>(std::floor((centre_az + az_lo) / step)) - 2;
  const long k_hi = static_cast<long>(std::ceil((centre_az + az_hi) / step)) + 2;
  const int ring_lo = std::max(0, pattern.nearest_ring(el_lo) - 1);
  const int ring_hi = std::min(pattern.channel_count - 1, pattern.nearest_ring(el_hi) + 1);

  LidarObservation obs;
  std::set<std::pair<int, long>> occupied;
  const double hw = caster.half_width;
  const double hh = caster.half_height;

  auto add_noise = [&](const Vec3& p) {
    const double r = p.norm();
    return Vec3(p * ((r + gaussian(rng, noise.lidar_range_sigma)) / r));
  };

  for (int ring = ring_lo; ring <= ring_hi; ++ring) {
    const double el = pattern.elevation(ring);
    std::vector<long> hits_k;
    std::vector<Vec3> hits;
    for (long k = k_lo; k <= k_hi; ++k) {
      Vec3 hit;
      Vec3 local;
      if (caster.cast(RayCaster::direction(el, k * step), &hit, &local)) {
        hits_k.push_back(k);
        hits.push_back(hit);
        occupied.insert({ring, k});
      }
    }
    // Contiguous runs of hits along the scan line.
    std::size_t i = 0;
    while (i < hits.size()) {
      std::size_t j = i;
      while (j + 1 < hits.size() && hits_k[j + 1] == hits_k[j] + 1) ++j;
      if (j == i) {
        // A lone hit is itself on the boundary; keep one exact crossing.
        Vec3 local;
        const Vec3 only = boundary_crossing(caster, el, (hits_k[i] - 1) * step, hits_k[i] * step, &local);
        obs.edge_points.push_back({nearest_edge(local, hw, hh), add_noise(only)});
      } else {
        Vec3 local;
        const Vec3 first = boundary_crossing(caster, el, (hits_k[i] - 1) * step, hits_k[i] * step, &local);
        obs.edge_points.push_back({nearest_edge(local, hw, hh), add_noise(first)});
        for (std::size_t m = i + 1; m < j; ++m) obs.planar_points.push_back(add_noise(hits[m]));
        const Vec3 last = boundary_crossing(caster, el, (hits_k[j] + 1) * step, hits_k[j] * step, &local);
        obs.edge_points.push_back({nearest_edge(local, hw, hh), add_noise(last)});
      }
      i = j + 1;
    }
  }

  const std::size_t board_returns = obs.planar_points.size() + obs.edge_points.size();
  if (board_returns == 0) throw Error(ErrorCode::kNoReturns, "no ray of " + sensor_name + " hits the target");

  // Off-target returns in a shell around the board, in scan cells the board
  // does not occupy and well away from the board's plane.
  const double f = noise.clutter_fraction;
  const auto n_clutter = static_cast<std::size_t>(std::lround(static_cast<double>(board_returns) * f / (1.0 - f)));
  const long width = k_hi - k_lo;
  const Plane target_plane(caster.normal, caster.centre);
  std::size_t attempts = 0;
  while (obs.clutter_points.size() < n_clutter && attempts++ < 100 * n_clutter + 100) {
    const int ring = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(pattern.channel_count)));
    const long k = k_lo - width + static_cast<long>(uniform_index(rng, static_cast<std::size_t>(3 * width + 1)));
    const double range = uniform(rng, 1.0, 12.0);
    if (occupied.count({ring, k})) continue;
    const Vec3 p = range * RayCaster::direction(pattern.elevation(ring), k * step);
    if (std::abs(target_plane.signed_distance(p)) < 0.25) continue;
    occupied.insert({ring, k});
    obs.clutter_points.push_back(p);
  }
  return obs;
}

// ----------------------------------------------------------- camera model

CameraObservation simulate_camera_view(const SensorRig& rig, const std::string& sensor_name,
                                       const Pose& rig_from_target, const NoiseModel& noise, Rng& rng) {
  const Sensor& sensor = rig.sensor(sensor_name);
  if (!sensor.is_camera()) throw Error(ErrorCode::kInvalidArgument, sensor_name + " is not a camera");
  noise.validate();

  const Pose camera_from_target = compose(sensor.sensor_from_rig, rig_from_target);
  const Vec3 normal = camera_from_target.rotation * Vec3::UnitZ();
  if (!(normal.dot(camera_from_target.translation) < 0.0)) {
    throw Error(ErrorCode::kTargetNotVisible, sensor_name + " sees the back of the target");
  }

  CameraObservation obs;
  obs.plane = Plane(normal, camera_from_target.translation);
  const auto corners = rig.target.corners();
  bool any_visible = false;
  for (std::size_t j = 0; j < 4; ++j) {
    const Vec3 x = transform_point(camera_from_target, corners[j]);
    if (!(x.z() > 1e-9)) throw Error(ErrorCode::kTargetNotVisible, "target corner behind " + sensor_name);
    const Vec2 px = project_camera_point(sensor.intrinsics, x);
    obs.corners[j] = px + Vec2(gaussian(rng, noise.pixel_sigma), gaussian(rng, noise.pixel_sigma));
    obs.visible[j] = sensor.intrinsics.contains(obs.corners[j]);
    any_visible = any_visible || obs.visible[j];
  }
  if (!any_visible) throw Error(ErrorCode::kTargetNotVisible, "no target corner inside the image of " + sensor_name);
  for (std::size_t j = 0; j < 4; ++j) obs.lines[j] = ImageLine::through(obs.corners[j], obs.corners[(j + 1) % 4]);
  return obs;
}

// ----------------------------------------------------------------- dataset

Dataset build_dataset(const SensorRig& rig, int n_poses, const std::map<std::string, NoiseModel>& noise,
                      std::uint64_t seed, const SceneLimits& limits) {
  rig.validate();
  for (const auto& [name, model] : noise) {
    if (!rig.has(name)) throw Error(ErrorCode::kUnknownSensor, "noise configured for unknown sensor " + name);
    model.validate();
  }

  Dataset ds;
  ds.rig = rig;
  ds.meta.seed = seed;
  ds.meta.noise = noise;
  ds.meta.tool_version = kToolVersion;
  ds.meta.range_min = limits.range_min;
  ds.meta.range_max = limits.range_max;

  Rng pose_rng = derive_rng(seed, {0x706f736573ULL});
  const std::vector<Pose> poses = sample_target_poses(rig, n_poses, limits, pose_rng);

  for (std::size_t i = 0; i < poses.size(); ++i) {
    TargetObservation obs;
    obs.pose_index = static_cast<int>(i);
    obs.rig_from_target = poses[i];
    for (std::size_t s = 0; s < rig.sensors.size(); ++s) {
      const Sensor& sensor = rig.sensors[s];
      Rng rng = derive_rng(seed, {i + 1, s + 1});
      const NoiseModel model = ds.noise_for(sensor.name);
      if (sensor.is_lidar()) {
        obs.lidar.emplace(sensor.name, simulate_lidar_scan(rig, sensor.name, poses[i], sensor.scan, model, rng));
      } else {
        obs.camera.emplace(sensor.name, simulate_camera_view(rig, sensor.name, poses[i], model, rng));
      }
    }
    ds.observations.push_back(std::move(obs));
  }
  return ds;
}

}  // namespace extrinsiq
