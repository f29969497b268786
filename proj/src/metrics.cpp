#include "extrinsiq/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "extrinsiq/error.hpp"

namespace extrinsiq {

MlreReport mlre(const Pose& camera_from_lidar, const CameraIntrinsics& k, std::span<const MlreFrame> frames) {
  MlreReport rep;
  double point_sum = 0.0;
  double frame_sum = 0.0;
  int seen = 0;
  for (const MlreFrame& f : frames) {
    double line_sum = 0.0;
    int lines = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const Vec3 l = f.lines[j].coefficients();
      double sum = 0.0;
      int n = 0;
      for (const Vec3& q : f.edge_points[j]) {
        ++seen;
        const Vec3 x = transform_point(camera_from_lidar, q);
        if (!(x.z() > 1e-9)) {
          ++rep.skipped;
          continue;
        }
        const Vec2 px = project_camera_point(k, x);
        const double d = std::abs(l.x() * px.x() + l.y() * px.y() + l.z());
        sum += d;
        point_sum += d;
        ++n;
      }
      if (n == 0) continue;
      rep.lines.push_back({f.observation, static_cast<int>(j) + 1, sum / n, n});
      rep.points += n;
      line_sum += sum / n;
      ++lines;
    }
    if (lines == 0) continue;
    rep.frames.push_back({f.observation, line_sum / lines, lines});
    frame_sum += line_sum / lines;
  }
  if (seen == 0) throw Error(ErrorCode::kInvalidArgument, "no edge points to evaluate");
  if (rep.points == 0) throw Error(ErrorCode::kNonPositiveDepth, "every edge point lies behind the camera");
  rep.mean_px = frame_sum / static_cast<double>(rep.frames.size());
  rep.point_weighted_px = point_sum / rep.points;
  return rep;
}

std::vector<MlreFrame> mlre_frames(const Dataset& ds, const std::string& camera, const std::string& lidar) {
  if (!ds.rig.sensor(camera).is_camera()) throw Error(ErrorCode::kInvalidArgument, camera + " is not a camera");
  if (!ds.rig.sensor(lidar).is_lidar()) throw Error(ErrorCode::kInvalidArgument, lidar + " is not a LIDAR");
  std::vector<MlreFrame> out;
  for (std::size_t i = 0; i < ds.observations.size(); ++i) {
    const TargetObservation& o = ds.observations[i];
    auto c = o.camera.find(camera);
    auto l = o.lidar.find(lidar);
    if (c == o.camera.end() || l == o.lidar.end()) continue;
    MlreFrame f;
    f.observation = static_cast<int>(i);
    f.lines = c->second.lines;
    for (const EdgePoint& e : l->second.edge_points) f.edge_points[static_cast<std::size_t>(e.edge - 1)].push_back(e.xyz);
    out.push_back(std::move(f));
  }
  return out;
}

Vec3 euler_xyz(const Mat3& r) {
  const double beta = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
  const double alpha = std::atan2(-r(1, 2), r(2, 2));
  const double gamma = std::atan2(-r(0, 1), r(0, 0));
  return {alpha, beta, gamma};
}

StereoConsistencyError stereo_consistency(const Pose& c1_from_lidar, const Pose& c2_from_lidar,
                                          const Pose& factory_c1_from_c2) {
  const Pose estimate = compose(c1_from_lidar, invert(c2_from_lidar));
  const Pose err = compose(invert(factory_c1_from_c2), estimate);
  const Vec3 e = euler_xyz(err.rotation.matrix());
  StereoConsistencyError out;
  out.alpha_deg = rad2deg(e.x());
  out.beta_deg = rad2deg(e.y());
  out.gamma_deg = rad2deg(e.z());
  out.x = err.translation.x();
  out.y = err.translation.y();
  out.z = err.translation.z();
  out.near_gimbal = std::abs(e.y()) >= 0.5 * kPi - 1e-6;
  return out;
}

PoseError pose_error(const Pose& estimate, const Pose& truth) {
  const Pose d = compose(invert(truth), estimate);
  return {rad2deg(d.rotation.angle()), d.translation.norm()};
}

// ---------------------------------------------------------------- sweep

Pose sweep_initial_pose(const SweepOptions& options, int trial) {
  Rng rng = derive_rng(options.seed, {0x7377656570ULL, static_cast<std::uint64_t>(trial)});
  const double sr = deg2rad(options.sigma_rot_deg);
  Vec3 w;
  Vec3 t;
  for (int i = 0; i < 3; ++i) w(i) = gaussian(rng, sr);
  for (int i = 0; i < 3; ++i) t(i) = gaussian(rng, options.sigma_t);
  return {Rotation::exp(w), t};
}

namespace {

Vec6 tangent_of(const Pose& p) {
  Vec6 v;
  v.head<3>() = p.rotation.log_unchecked();
  v.tail<3>() = p.translation;
  return v;
}

bool same_solution(const Pose& a, const Pose& b, double tol) {
  const Pose d = compose(invert(a), b);
  return d.rotation.angle() <= tol && (a.translation - b.translation).norm() <= tol;
}

}  // namespace

SweepResult random_init_sweep(const DatasetFeatures& features, Method method, const std::string& a,
                              const std::string& b, const SweepOptions& sweep, const CalibrationOptions& options) {
  if (sweep.trials < 1) throw Error(ErrorCode::kInvalidArgument, "sweep needs at least one trial");
  if (!(sweep.sigma_rot_deg >= 0.0) || !(sweep.sigma_t >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sweep sigmas must be non-negative");
  }
  SweepResult out;
  out.trials.resize(static_cast<std::size_t>(sweep.trials));
  std::vector<Pose> finals(out.trials.size());

  auto run = [&](int t) {
    SweepTrial& trial = out.trials[static_cast<std::size_t>(t)];
    trial.index = t;
    const Pose init = sweep_initial_pose(sweep, t);
    trial.init = tangent_of(init);
    try {
      const PairCalibration r = calibrate_pair(features, method, a, b, init, options);
      finals[static_cast<std::size_t>(t)] = r.a_from_b;
      trial.final = tangent_of(r.a_from_b);
      trial.final_cost = r.report.final_cost;
      trial.iterations = r.report.iterations;
      trial.converged = r.report.converged;
    } catch (const Error& e) {
      trial.failure = e.what();
    }
  };

  unsigned workers = sweep.threads > 0 ? static_cast<unsigned>(sweep.threads) : std::thread::hardware_concurrency();
  workers = std::clamp(workers, 1u, static_cast<unsigned>(sweep.trials));
  if (workers == 1) {
    for (int t = 0; t < sweep.trials; ++t) run(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int t = next++; t < sweep.trials; t = next++) run(t);
      });
    }
    for (std::thread& th : pool) th.join();
  }

  for (SweepTrial& trial : out.trials) {
    if (!trial.failure.empty()) continue;
    const Pose& p = finals[static_cast<std::size_t>(trial.index)];
    for (std::size_t c = 0; c < out.clusters.size(); ++c) {
      if (same_solution(out.clusters[c].representative, p, sweep.cluster_tolerance)) {
        trial.cluster = static_cast<int>(c);
        break;
      }
    }
    if (trial.cluster < 0) {
      trial.cluster = static_cast<int>(out.clusters.size());
      out.clusters.push_back({p, 0});
    }
    ++out.clusters[static_cast<std::size_t>(trial.cluster)].members;
  }
  for (std::size_t c = 0; c < out.clusters.size(); ++c) {
    if (out.clusters[c].members > out.modal_count) {
      out.modal_count = out.clusters[c].members;
      out.modal_cluster = static_cast<int>(c);
    }
  }
  return out;
}

std::map<std::string, NoiseModel> benchmark_noise(const SensorRig& rig, const BenchmarkConfig& config) {
  if (!rig.sensor(config.noisy_lidar).is_lidar()) {
    throw Error(ErrorCode::kInvalidArgument, config.noisy_lidar + " is not a LIDAR");
  }
  std::map<std::string, NoiseModel> noise;
  for (const Sensor& s : rig.sensors) {
    NoiseModel n;
    if (s.is_lidar()) {
      n.lidar_range_sigma = s.name == config.noisy_lidar ? config.noisy_range_sigma : config.range_sigma;
    } else {
      n.pixel_sigma = config.pixel_sigma;
    }
    noise.emplace(s.name, n);
  }
  return noise;
}

Dataset benchmark_dataset(const SensorRig& rig, std::uint64_t seed, const BenchmarkConfig& config) {
  return build_dataset(rig, config.views, benchmark_noise(rig, config), seed);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double standard_deviation(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace extrinsiq
