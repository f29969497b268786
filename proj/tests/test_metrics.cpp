#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "extrinsiq/error.hpp"
#include "extrinsiq/metrics.hpp"
#include "support.hpp"

using namespace extrinsiq;
using namespace extrinsiq::testing;

namespace {

using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

Mat4 homogeneous(const Pose& p) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = p.rotation.matrix();
  m.topRightCorner<3, 1>() = p.translation;
  return m;
}

// Brute force: full projection matrix, raw line coefficients, explicit
// normalisation, nested averaging written out separately.
double oracle_mlre(const Pose& pose, const CameraIntrinsics& k, const std::vector<MlreFrame>& frames,
                   const std::vector<std::array<Vec3, 4>>& raw_lines) {
  const Mat34 proj = k.matrix() * homogeneous(pose).topRows<3>();
  std::vector<double> per_frame;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::vector<double> per_line;
    for (std::size_t j = 0; j < 4; ++j) {
      const Vec3 l = raw_lines[f][j];
      std::vector<double> d;
      for (const Vec3& q : frames[f].edge_points[j]) {
        const Vec3 h = proj * q.homogeneous();
        if (h.z() <= 0) continue;
        const double u = h.x() / h.z();
        const double v = h.y() / h.z();
        d.push_back(std::abs(l.x() * u + l.y() * v + l.z()) / std::hypot(l.x(), l.y()));
      }
      if (d.empty()) continue;
      double s = 0;
      for (double x : d) s += x;
      per_line.push_back(s / static_cast<double>(d.size()));
    }
    if (per_line.empty()) continue;
    double s = 0;
    for (double x : per_line) s += x;
    per_frame.push_back(s / static_cast<double>(per_line.size()));
  }
  double s = 0;
  for (double x : per_frame) s += x;
  return s / static_cast<double>(per_frame.size());
}

CameraIntrinsics simple_camera(double f = 1000.0) {
  CameraIntrinsics k;
  k.fx = k.fy = f;
  k.cx = 500;
  k.cy = 400;
  k.width = 1000;
  k.height = 800;
  return k;
}

Mat3 rx(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 ry(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rz(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

}  // namespace

// ------------------------------------------------------------------- MLRE

TEST(Mlre, MatchesBruteForceOracle) {
  Rng rng = derive_rng(1, {});
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    CameraIntrinsics k;
    k.fx = uniform(rng, 300, 2000);
    k.fy = uniform(rng, 300, 2000);
    k.cx = uniform(rng, 200, 800);
    k.cy = uniform(rng, 200, 600);
    k.skew = uniform(rng, -1, 1);
    const Pose pose = random_pose(rng, 0.3, 0.2);
    const int nframes = 1 + static_cast<int>(uniform(rng, 0, 4));
    std::vector<MlreFrame> frames(static_cast<std::size_t>(nframes));
    std::vector<std::array<Vec3, 4>> raw(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
      frames[f].observation = static_cast<int>(f);
      for (std::size_t j = 0; j < 4; ++j) {
        raw[f][j] = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -500, 500)) * uniform(rng, 0.1, 10);
        frames[f].lines[j] = ImageLine(raw[f][j]);
        const int n = static_cast<int>(uniform(rng, 0, 6));
        for (int i = 0; i < n; ++i) {
          frames[f].edge_points[j].push_back(Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 2, 6)));
        }
      }
    }
    // Guarantee at least one point.
    frames[0].edge_points[0].push_back(Vec3(0.1, 0.2, 3.0));
    const double got = mlre(pose, k, frames).mean_px;
    const double want = oracle_mlre(pose, k, frames, raw);
    worst = std::max(worst, std::abs(got - want));
    EXPECT_NEAR(got, want, 1e-12) << "case " << c;
  }
  RecordProperty("max_abs_difference_px", std::to_string(worst));
}

TEST(Mlre, ZeroAtGroundTruth) {
  const Dataset ds = build_dataset(default_rig(), 30, {}, 2);
  for (const std::string& cam : ds.rig.cameras()) {
    for (const std::string& lid : ds.rig.lidars()) {
      const auto frames = mlre_frames(ds, cam, lid);
      const MlreReport r = mlre(ds.rig.extrinsic(cam, lid), ds.rig.sensor(cam).intrinsics, frames);
      EXPECT_LT(r.mean_px, 1e-9) << cam << "/" << lid;
      EXPECT_GT(r.points, 100);
      EXPECT_EQ(r.skipped, 0);
    }
  }
}

TEST(Mlre, OneCentimetreShiftAtThreeMetres) {
  // Fronto-parallel board 3 m ahead; shift the pose 1 cm along camera x.
  const CameraIntrinsics k = simple_camera();
  MlreFrame f;
  const double z = 3.0;
  // Vertical lines u = 500 +/- 100 and horizontal lines v = 400 +/- 80.
  f.lines = {ImageLine(Vec3(0, 1, -320)), ImageLine(Vec3(1, 0, -600)), ImageLine(Vec3(0, 1, -480)),
             ImageLine(Vec3(1, 0, -400))};
  for (int i = -5; i <= 5; ++i) {
    const double s = i / 5.0;
    f.edge_points[0].push_back(Vec3(0.3 * s, -0.24, z));
    f.edge_points[1].push_back(Vec3(0.3, 0.24 * s, z));
    f.edge_points[2].push_back(Vec3(0.3 * s, 0.24, z));
    f.edge_points[3].push_back(Vec3(-0.3, 0.24 * s, z));
  }
  const std::vector<MlreFrame> frames{f};
  EXPECT_LT(mlre(Pose::identity(), k, frames).mean_px, 1e-12);
  const MlreReport r = mlre(Pose{Rotation(), Vec3(0.01, 0, 0)}, k, frames);
  const double expected = 1000.0 * 0.01 / 3.0;
  for (const LineError& e : r.lines) {
    if (e.edge % 2 == 0) {
      EXPECT_NEAR(e.mean_px, expected, 1e-9);  // vertical
    } else {
      EXPECT_NEAR(e.mean_px, 0.0, 1e-9);
    }
  }
  EXPECT_NEAR(r.mean_px, expected / 2, 1e-9);
}

TEST(Mlre, LineScaleInvariance) {
  Rng rng = derive_rng(3, {});
  const CameraIntrinsics k = simple_camera();
  for (int c = 0; c < 200; ++c) {
    MlreFrame f;
    MlreFrame g;
    for (std::size_t j = 0; j < 4; ++j) {
      const Vec3 l(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -300, 300));
      double s = uniform(rng, 0.01, 100);
      if (uniform(rng, 0, 1) < 0.5) s = -s;
      f.lines[j] = ImageLine(l);
      g.lines[j] = ImageLine(s * l);
      f.edge_points[j] = g.edge_points[j] = {random_vec(rng) + Vec3(0, 0, 4)};
    }
    const Pose p = random_pose(rng, 0.2, 0.2);
    EXPECT_NEAR(mlre(p, k, std::vector<MlreFrame>{f}).mean_px, mlre(p, k, std::vector<MlreFrame>{g}).mean_px, 1e-9);
  }
}

TEST(Mlre, SkipsPointsBehindCamera) {
  const CameraIntrinsics k = simple_camera();
  MlreFrame f;
  f.lines.fill(ImageLine(Vec3(1, 0, -500)));
  f.edge_points[0] = {Vec3(0, 0, 2), Vec3(0, 0, -2)};
  const MlreReport r = mlre(Pose::identity(), k, std::vector<MlreFrame>{f});
  EXPECT_EQ(r.skipped, 1);
  EXPECT_EQ(r.points, 1);
  f.edge_points[0] = {Vec3(0, 0, -2)};
  try {
    (void)mlre(Pose::identity(), k, std::vector<MlreFrame>{f});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonPositiveDepth);
  }
  f.edge_points[0].clear();
  EXPECT_THROW((void)mlre(Pose::identity(), k, std::vector<MlreFrame>{f}), Error);
}

// ----------------------------------------------------------------- stereo

TEST(Stereo, ExactEstimatesGiveZero) {
  const SensorRig rig = default_rig();
  const StereoPair& sp = rig.stereo_pairs.front();
  const StereoConsistencyError e = stereo_consistency(rig.extrinsic(sp.left, "lidar64"),
                                                      rig.extrinsic(sp.right, "lidar64"), sp.factory_left_from_right);
  for (double v : {e.alpha_deg, e.beta_deg, e.gamma_deg, e.x, e.y, e.z}) EXPECT_LT(std::abs(v), 1e-12);
  EXPECT_FALSE(e.near_gimbal);
}

TEST(Stereo, PureZOffset) {
  const SensorRig rig = default_rig();
  const StereoPair& sp = rig.stereo_pairs.front();
  Pose c1 = rig.extrinsic(sp.left, "lidar32");
  c1.translation.z() += 0.01;
  const StereoConsistencyError e =
      stereo_consistency(c1, rig.extrinsic(sp.right, "lidar32"), sp.factory_left_from_right);
  EXPECT_NEAR(e.z, 0.01, 1e-12);
  EXPECT_LT(std::abs(e.x), 1e-12);
  EXPECT_LT(std::abs(e.y), 1e-12);
  for (double v : {e.alpha_deg, e.beta_deg, e.gamma_deg}) EXPECT_LT(std::abs(v), 1e-12);
}

TEST(Stereo, LidarFrameCancels) {
  Rng rng = derive_rng(4, {});
  for (int i = 0; i < 200; ++i) {
    const Pose p = random_pose(rng);
    const Pose rel = random_pose(rng, 0.5, 0.3);
    // c1_from_lidar = rel * c2_from_lidar with c2_from_lidar = p.
    const StereoConsistencyError e = stereo_consistency(compose(rel, p), p, rel);
    for (double v : {e.alpha_deg, e.beta_deg, e.gamma_deg}) EXPECT_LT(std::abs(v), 1e-9);
    EXPECT_LT(Vec3(e.x, e.y, e.z).norm(), 1e-12 * 1e3);
  }
}

TEST(Stereo, EulerConvention) {
  Rng rng = derive_rng(5, {});
  for (int i = 0; i < 500; ++i) {
    const double a = uniform(rng, -3.0, 3.0);
    const double b = uniform(rng, -1.5, 1.5);
    const double c = uniform(rng, -3.0, 3.0);
    const Vec3 e = euler_xyz(rx(a) * ry(b) * rz(c));
    EXPECT_NEAR(e.x(), a, 1e-9);
    EXPECT_NEAR(e.y(), b, 1e-9);
    EXPECT_NEAR(e.z(), c, 1e-9);
  }
  // Single-axis rotations land on their own angle.
  EXPECT_NEAR(euler_xyz(rx(0.3)).x(), 0.3, 1e-15);
  EXPECT_NEAR(euler_xyz(ry(-0.2)).y(), -0.2, 1e-15);
  EXPECT_NEAR(euler_xyz(rz(1.1)).z(), 1.1, 1e-15);
}

TEST(Stereo, GimbalFlag) {
  const Pose e{Rotation::from_matrix(ry(kPi / 2)), Vec3::Zero()};
  EXPECT_TRUE(stereo_consistency(e, Pose::identity(), Pose::identity()).near_gimbal);
}

// ------------------------------------------------------------- pose error

TEST(PoseErrorTest, Examples) {
  Rng rng = derive_rng(6, {});
  const Pose truth = random_pose(rng);
  const PoseError z = pose_error(truth, truth);
  EXPECT_LT(z.rotation_deg, 1e-6);
  EXPECT_LT(z.translation_m, 1e-15);
  const Pose rot = compose(truth, Pose{Rotation::about_axis(Vec3::UnitZ(), deg2rad(1.0)), Vec3::Zero()});
  const PoseError one = pose_error(rot, truth);
  EXPECT_NEAR(one.rotation_deg, 1.0, 1e-9);
  EXPECT_LT(one.translation_m, 1e-12);
}

TEST(PoseErrorTest, MatrixLogOracle) {
  Rng rng = derive_rng(7, {});
  for (int i = 0; i < 300; ++i) {
    const Pose a = random_pose(rng, 2.5);
    const Pose b = random_pose(rng, 2.5);
    const Mat4 d = homogeneous(b).inverse() * homogeneous(a);
    const Mat3 log_r = Mat3(d.topLeftCorner<3, 3>()).log();
    const double angle = Vec3(log_r(2, 1), log_r(0, 2), log_r(1, 0)).norm();
    const PoseError e = pose_error(a, b);
    EXPECT_NEAR(e.rotation_deg, rad2deg(angle), 1e-9);
    const Vec3 t = d.topRightCorner(3, 1);
    EXPECT_NEAR(e.translation_m, t.norm(), 1e-9);
  }
}

TEST(PoseErrorTest, RotationAngleIsSymmetric) {
  Rng rng = derive_rng(8, {});
  for (int i = 0; i < 500; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    EXPECT_NEAR(pose_error(a, b).rotation_deg, pose_error(b, a).rotation_deg, 1e-9);
  }
}

// ------------------------------------------------------------------ sweep

namespace {
const DatasetFeatures& noiseless_features() {
  static const DatasetFeatures f = extract_features(build_dataset(default_rig(), 30, {}, 9));
  return f;
}
}  // namespace

TEST(Sweep, ZeroSigmaTrialsAreIdentical) {
  SweepOptions so;
  so.trials = 8;
  so.sigma_rot_deg = 0;
  so.sigma_t = 0;
  const SweepResult r = random_init_sweep(noiseless_features(), Method::kPpc, "basler", "lidar32", so);
  ASSERT_EQ(r.trials.size(), 8u);
  for (const SweepTrial& t : r.trials) {
    EXPECT_EQ(t.init, Vec6::Zero());
    EXPECT_EQ(t.final, r.trials[0].final);
    EXPECT_EQ(t.cluster, 0);
  }
  EXPECT_EQ(r.clusters.size(), 1u);
}

TEST(Sweep, InitialPosesReproduce) {
  SweepOptions so;
  so.seed = 11;
  for (int t = 0; t < 50; ++t) {
    const Pose a = sweep_initial_pose(so, t);
    const Pose b = sweep_initial_pose(so, t);
    EXPECT_EQ(a.translation, b.translation);
    EXPECT_EQ(a.rotation.matrix(), b.rotation.matrix());
  }
  SweepOptions other = so;
  other.seed = 12;
  EXPECT_NE(sweep_initial_pose(so, 0).translation, sweep_initial_pose(other, 0).translation);
}

TEST(Sweep, InitialPoseSpread) {
  // Sample spread of the translation draws matches sigma_t.
  SweepOptions so;
  so.sigma_t = 0.5;
  std::vector<double> xs;
  for (int t = 0; t < 4000; ++t) xs.push_back(sweep_initial_pose(so, t).translation.x());
  EXPECT_NEAR(standard_deviation(xs), 0.5, 0.03);
  EXPECT_NEAR(mean(xs), 0.0, 0.03);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  SweepOptions one;
  one.trials = 12;
  one.threads = 1;
  one.seed = 3;
  SweepOptions many = one;
  many.threads = 4;
  const SweepResult a = random_init_sweep(noiseless_features(), Method::kMsg, "lidar64", "basler", one);
  const SweepResult b = random_init_sweep(noiseless_features(), Method::kMsg, "lidar64", "basler", many);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].final, b.trials[i].final);
    EXPECT_EQ(a.trials[i].final_cost, b.trials[i].final_cost);
    EXPECT_EQ(a.trials[i].cluster, b.trials[i].cluster);
  }
}

TEST(Sweep, PpcAndPbpcAlwaysReachTheModalSolution) {
  SweepOptions so;
  so.seed = 5;
  for (Method m : {Method::kPpc, Method::kPbpc}) {
    const SweepResult r = random_init_sweep(noiseless_features(), m, "basler", "lidar64", so);
    EXPECT_EQ(r.modal_count, 100) << to_string(m);
    const Pose& rep = r.clusters.at(static_cast<std::size_t>(r.modal_cluster)).representative;
    const PoseError e = pose_error(rep, noiseless_features().rig.extrinsic("basler", "lidar64"));
    EXPECT_LT(e.translation_m, 1e-6);
  }
}

TEST(Sweep, MsgReportsClusters) {
  SweepOptions so;
  so.seed = 5;
  const SweepResult r = random_init_sweep(noiseless_features(), Method::kMsg, "lidar64", "basler", so);
  int total = 0;
  for (const SweepCluster& c : r.clusters) total += c.members;
  int failed = 0;
  for (const SweepTrial& t : r.trials) failed += t.cluster < 0 ? 1 : 0;
  EXPECT_EQ(total + failed, 100);
  EXPECT_GE(r.modal_count, 1);
}

// ------------------------------------------------------------- helpers

TEST(Stats, MeanAndSampleDeviation) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(mean(v), 5.0);
  EXPECT_NEAR(standard_deviation(v), std::sqrt(32.0 / 7.0), 1e-15);
  EXPECT_EQ(standard_deviation(std::vector<double>{3.0}), 0.0);
}

TEST(Benchmark, NoiseConfiguration) {
  const SensorRig rig = default_rig();
  const auto noise = benchmark_noise(rig);
  EXPECT_EQ(noise.at("lidar64").lidar_range_sigma, 0.03);
  EXPECT_EQ(noise.at("lidar32").lidar_range_sigma, 0.01);
  EXPECT_EQ(noise.at("basler").pixel_sigma, 0.5);
  BenchmarkConfig bad;
  bad.noisy_lidar = "basler";
  EXPECT_THROW((void)benchmark_noise(rig, bad), Error);
}
