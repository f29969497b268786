#include <gtest/gtest.h>

#include <filesystem>
#include <functional>

#include "extrinsiq/error.hpp"
#include "extrinsiq/io.hpp"
#include "support.hpp"

using namespace extrinsiq;
using namespace extrinsiq::testing;

namespace fs = std::filesystem;

namespace {

void expect_same_pose(const Pose& a, const Pose& b) {
  EXPECT_EQ(a.rotation.quaternion().coeffs(), b.rotation.quaternion().coeffs());
  EXPECT_EQ(a.translation, b.translation);
}

void expect_same_rig(const SensorRig& a, const SensorRig& b) {
  ASSERT_EQ(a.sensors.size(), b.sensors.size());
  for (std::size_t i = 0; i < a.sensors.size(); ++i) {
    const Sensor& x = a.sensors[i];
    const Sensor& y = b.sensors[i];
    EXPECT_EQ(x.name, y.name);
    EXPECT_EQ(x.kind, y.kind);
    EXPECT_EQ(x.confidence, y.confidence);
    expect_same_pose(x.sensor_from_rig, y.sensor_from_rig);
    if (x.is_lidar()) {
      EXPECT_EQ(x.scan.channel_count, y.scan.channel_count);
      EXPECT_EQ(x.scan.elevation_min, y.scan.elevation_min);
      EXPECT_EQ(x.scan.elevation_max, y.scan.elevation_max);
      EXPECT_EQ(x.scan.azimuth_step, y.scan.azimuth_step);
    } else {
      EXPECT_EQ(x.intrinsics.matrix(), y.intrinsics.matrix());
      EXPECT_EQ(x.intrinsics.width, y.intrinsics.width);
      EXPECT_EQ(x.intrinsics.height, y.intrinsics.height);
    }
  }
  ASSERT_EQ(a.stereo_pairs.size(), b.stereo_pairs.size());
  for (std::size_t i = 0; i < a.stereo_pairs.size(); ++i) {
    EXPECT_EQ(a.stereo_pairs[i].left, b.stereo_pairs[i].left);
    EXPECT_EQ(a.stereo_pairs[i].right, b.stereo_pairs[i].right);
    expect_same_pose(a.stereo_pairs[i].factory_left_from_right, b.stereo_pairs[i].factory_left_from_right);
  }
  EXPECT_EQ(a.target.width, b.target.width);
  EXPECT_EQ(a.target.height, b.target.height);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kInvalidArgument;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("extrinsiq_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST(RigJson, RoundTrip) {
  const SensorRig rig = default_rig();
  const SensorRig back = rig_from_json(rig_to_json(rig));
  expect_same_rig(rig, back);
  EXPECT_EQ(rig_to_json(back), rig_to_json(rig));
}

TEST(RigJson, RandomPosesSurviveExactly) {
  Rng rng = derive_rng(1, {});
  SensorRig rig = default_rig();
  for (int k = 0; k < 50; ++k) {
    for (Sensor& s : rig.sensors) {
      s.sensor_from_rig = random_pose(rng);
      s.confidence = uniform(rng, 0.05, 1.0);
    }
    expect_same_rig(rig, rig_from_json(rig_to_json(rig)));
  }
}

TEST(RigJson, ShippedDefaultMatchesBuiltIn) {
  expect_same_rig(load_rig(EXTRINSIQ_DATA_DIR "/default_rig.json"), default_rig());
}

TEST(RigJson, AcceptsDatasetWrapper) {
  const Dataset ds = build_dataset(default_rig(), 2, {}, 3);
  expect_same_rig(rig_from_json(dataset_to_json(ds)), ds.rig);
}

TEST(RigJson, Errors) {
  EXPECT_EQ(code_of([] { (void)rig_from_json("{not json"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { (void)rig_from_json("[]"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { (void)rig_from_json(R"({"sensors": [{"name": "x"}]})"); }), ErrorCode::kParseError);
  // Wrong kind string.
  std::string text = rig_to_json(default_rig());
  const auto at = text.find("\"lidar\"");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 7, "\"radar\"");
  EXPECT_EQ(code_of([&] { (void)rig_from_json(text); }), ErrorCode::kParseError);
}

TEST(DatasetJson, ReserializesIdentically) {
  const SensorRig rig = default_rig();
  std::map<std::string, NoiseModel> noise = lidar_noise(rig, 0.03, 0.01);
  noise["basler"].pixel_sigma = 0.5;
  noise["lidar32"].clutter_fraction = 0.1;
  const Dataset ds = build_dataset(rig, 6, noise, 4);
  const std::string once = dataset_to_json(ds);
  const Dataset back = dataset_from_json(once);
  EXPECT_EQ(dataset_to_json(back), once);

  ASSERT_EQ(back.observations.size(), ds.observations.size());
  EXPECT_EQ(back.meta.seed, 4u);
  EXPECT_EQ(back.meta.tool_version, ds.meta.tool_version);
  EXPECT_EQ(back.noise_for("lidar64").lidar_range_sigma, 0.03);
  EXPECT_EQ(back.noise_for("basler").pixel_sigma, 0.5);
  EXPECT_EQ(back.noise_for("lidar32").clutter_fraction, 0.1);
  for (std::size_t i = 0; i < ds.observations.size(); ++i) {
    const TargetObservation& a = ds.observations[i];
    const TargetObservation& b = back.observations[i];
    expect_same_pose(a.rig_from_target, b.rig_from_target);
    for (const auto& [name, lo] : a.lidar) {
      const LidarObservation& lb = b.lidar.at(name);
      EXPECT_EQ(lo.planar_points, lb.planar_points);
      ASSERT_EQ(lo.edge_points.size(), lb.edge_points.size());
      for (std::size_t j = 0; j < lo.edge_points.size(); ++j) {
        EXPECT_EQ(lo.edge_points[j].edge, lb.edge_points[j].edge);
        EXPECT_EQ(lo.edge_points[j].xyz, lb.edge_points[j].xyz);
      }
      EXPECT_EQ(lo.clutter_points, lb.clutter_points);
    }
    for (const auto& [name, co] : a.camera) {
      const CameraObservation& cb = b.camera.at(name);
      EXPECT_EQ(co.corners, cb.corners);
      EXPECT_EQ(co.visible, cb.visible);
      EXPECT_EQ(co.plane.normal(), cb.plane.normal());
      for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(co.lines[j].coefficients(), cb.lines[j].coefficients());
    }
  }
}

TEST(DatasetJson, Errors) {
  EXPECT_EQ(code_of([] { (void)dataset_from_json(""); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { (void)dataset_from_json(R"({"rig": {}})"); }), ErrorCode::kParseError);
  const Dataset ds = build_dataset(default_rig(), 1, {}, 5);
  std::string text = dataset_to_json(ds);
  text.resize(text.size() / 2);
  EXPECT_EQ(code_of([&] { (void)dataset_from_json(text); }), ErrorCode::kParseError);
}

TEST(ResultsJson, RoundTrip) {
  Rng rng = derive_rng(6, {});
  std::vector<PairCalibration> pairs;
  for (Method m : {Method::kPpc, Method::kPbpc, Method::kMsg}) {
    PairCalibration p;
    p.sensor_a = "basler";
    p.sensor_b = "lidar64";
    p.method = m;
    p.a_from_b = random_pose(rng);
    p.views = 17;
    p.report.iterations = 9;
    p.report.initial_cost = uniform(rng, 0, 10);
    p.report.final_cost = uniform(rng, 0, 1e-6);
    p.report.gradient_norm = 1e-11;
    p.report.termination = Termination::kParameterTolerance;
    p.report.converged = m != Method::kMsg;
    pairs.push_back(p);
  }
  const std::string text = results_to_json(pairs);
  const auto back = results_from_json(text);
  ASSERT_EQ(back.size(), pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(back[i].sensor_a, pairs[i].sensor_a);
    EXPECT_EQ(back[i].method, pairs[i].method);
    EXPECT_EQ(back[i].views, 17);
    expect_same_pose(back[i].a_from_b, pairs[i].a_from_b);
    EXPECT_EQ(back[i].report.final_cost, pairs[i].report.final_cost);
    EXPECT_EQ(back[i].report.termination, Termination::kParameterTolerance);
    EXPECT_EQ(back[i].report.converged, pairs[i].report.converged);
  }
  EXPECT_EQ(results_to_json(back), text);
  EXPECT_EQ(code_of([] { (void)results_from_json(R"({"pairs": [{"method": "bogus"}]})"); }), ErrorCode::kParseError);
}

TEST(Files, SaveLoadAndMissingFile) {
  TempDir dir;
  const Dataset ds = build_dataset(default_rig(), 3, {}, 7);
  save_dataset(dir.path() / "d.json", ds);
  EXPECT_EQ(dataset_to_json(load_dataset(dir.path() / "d.json")), dataset_to_json(ds));
  write_text_file(dir.path() / "x.txt", "first");
  write_text_file(dir.path() / "x.txt", "second");
  EXPECT_EQ(read_text_file(dir.path() / "x.txt"), "second");
  EXPECT_EQ(code_of([&] { (void)read_text_file(dir.path() / "absent.json"); }), ErrorCode::kIoError);
  EXPECT_EQ(code_of([&] { write_text_file(dir.path() / "no" / "such" / "dir.json", "x"); }), ErrorCode::kIoError);
}
