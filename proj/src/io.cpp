#include "extrinsiq/io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "extrinsiq/error.hpp"

namespace extrinsiq {

using nlohmann::json;

namespace {

json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N)) {
    throw Error(ErrorCode::kParseError, std::string(what) + ": expected an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json pose_json(const Pose& p) {
  const Eigen::Quaterniond& q = p.rotation.quaternion();
  return {{"quaternion", {q.w(), q.x(), q.y(), q.z()}}, {"translation", vec(p.translation)}};
}

Pose pose_from(const json& j) {
  const Eigen::Vector4d q = vec_from<4>(j.at("quaternion"), "quaternion");
  return {Rotation::from_quaternion(q(0), q(1), q(2), q(3)), vec_from<3>(j.at("translation"), "translation")};
}

json points_json(const std::vector<Vec3>& pts) {
  json a = json::array();
  for (const Vec3& p : pts) a.push_back(vec(p));
  return a;
}

std::vector<Vec3> points_from(const json& j) {
  std::vector<Vec3> out;
  out.reserve(j.size());
  for (const json& p : j) out.push_back(vec_from<3>(p, "point"));
  return out;
}

json noise_json(const NoiseModel& n) {
  return {{"lidar_range_sigma", n.lidar_range_sigma},
          {"pixel_sigma", n.pixel_sigma},
          {"clutter_fraction", n.clutter_fraction}};
}

NoiseModel noise_from(const json& j) {
  NoiseModel n;
  n.lidar_range_sigma = j.value("lidar_range_sigma", 0.0);
  n.pixel_sigma = j.value("pixel_sigma", 0.0);
  n.clutter_fraction = j.value("clutter_fraction", 0.0);
  n.validate();
  return n;
}

json rig_json(const SensorRig& rig) {
  json sensors = json::array();
  for (const Sensor& s : rig.sensors) {
    json js{{"name", s.name},
            {"kind", s.is_lidar() ? "lidar" : "camera"},
            {"pose", pose_json(s.sensor_from_rig)},
            {"confidence", s.confidence}};
    if (s.is_lidar()) {
      js["scan"] = {{"channel_count", s.scan.channel_count},
                    {"elevation_min_rad", s.scan.elevation_min},
                    {"elevation_max_rad", s.scan.elevation_max},
                    {"azimuth_step_rad", s.scan.azimuth_step}};
    } else {
      const CameraIntrinsics& k = s.intrinsics;
      js["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy},       {"cx", k.cx},         {"cy", k.cy},
                          {"skew", k.skew}, {"width", k.width}, {"height", k.height}};
    }
    sensors.push_back(std::move(js));
  }
  json stereo = json::array();
  for (const StereoPair& p : rig.stereo_pairs) {
    stereo.push_back({{"left", p.left}, {"right", p.right}, {"factory_left_from_right", pose_json(p.factory_left_from_right)}});
  }
  return {{"sensors", std::move(sensors)},
          {"stereo_pairs", std::move(stereo)},
          {"target", {{"width", rig.target.width}, {"height", rig.target.height}}}};
}

SensorRig rig_from(const json& j) {
  SensorRig rig;
  for (const json& js : j.at("sensors")) {
    Sensor s;
    s.name = js.at("name").get<std::string>();
    const std::string kind = js.at("kind").get<std::string>();
    if (kind == "lidar") {
      s.kind = SensorKind::kLidar;
      const json& sc = js.at("scan");
      s.scan.channel_count = sc.at("channel_count").get<int>();
      s.scan.elevation_min = sc.at("elevation_min_rad").get<double>();
      s.scan.elevation_max = sc.at("elevation_max_rad").get<double>();
      s.scan.azimuth_step = sc.at("azimuth_step_rad").get<double>();
    } else if (kind == "camera") {
      s.kind = SensorKind::kCamera;
      const json& k = js.at("intrinsics");
      s.intrinsics.fx = k.at("fx").get<double>();
      s.intrinsics.fy = k.at("fy").get<double>();
      s.intrinsics.cx = k.at("cx").get<double>();
      s.intrinsics.cy = k.at("cy").get<double>();
      s.intrinsics.skew = k.value("skew", 0.0);
      s.intrinsics.width = k.value("width", 0);
      s.intrinsics.height = k.value("height", 0);
    } else {
      throw Error(ErrorCode::kParseError, "sensor " + s.name + " has unknown kind '" + kind + "'");
    }
    s.sensor_from_rig = pose_from(js.at("pose"));
    s.confidence = js.value("confidence", 1.0);
    rig.sensors.push_back(std::move(s));
  }
  if (j.contains("stereo_pairs")) {
    for (const json& p : j.at("stereo_pairs")) {
      rig.stereo_pairs.push_back(
          {p.at("left").get<std::string>(), p.at("right").get<std::string>(), pose_from(p.at("factory_left_from_right"))});
    }
  }
  if (j.contains("target")) {
    rig.target.width = j.at("target").at("width").get<double>();
    rig.target.height = j.at("target").at("height").get<double>();
  }
  rig.validate();
  return rig;
}

json plane_json(const Plane& p) { return {{"normal", vec(p.normal())}, {"offset_vector", vec(p.origin_offset())}}; }

Plane plane_from(const json& j) {
  return Plane(vec_from<3>(j.at("normal"), "normal"), vec_from<3>(j.at("offset_vector"), "offset_vector"));
}

json observation_json(const TargetObservation& o) {
  json lidar = json::object();
  for (const auto& [name, lo] : o.lidar) {
    json edges = json::array();
    for (const EdgePoint& e : lo.edge_points) edges.push_back({{"edge", e.edge}, {"xyz", vec(e.xyz)}});
    lidar[name] = {{"planar_points", points_json(lo.planar_points)},
                   {"edge_points", std::move(edges)},
                   {"clutter_points", points_json(lo.clutter_points)}};
  }
  json camera = json::object();
  for (const auto& [name, co] : o.camera) {
    json lines = json::array();
    json corners = json::array();
    for (const ImageLine& l : co.lines) lines.push_back(vec(l.coefficients()));
    for (const Vec2& c : co.corners) corners.push_back(vec(c));
    camera[name] = {{"plane", plane_json(co.plane)},
                    {"lines", std::move(lines)},
                    {"corners", std::move(corners)},
                    {"visible", co.visible}};
  }
  return {{"pose_index", o.pose_index},
          {"rig_from_target", pose_json(o.rig_from_target)},
          {"lidar", std::move(lidar)},
          {"camera", std::move(camera)}};
}

TargetObservation observation_from(const json& j) {
  TargetObservation o;
  o.pose_index = j.at("pose_index").get<int>();
  o.rig_from_target = pose_from(j.at("rig_from_target"));
  for (const auto& [name, jl] : j.at("lidar").items()) {
    LidarObservation lo;
    lo.planar_points = points_from(jl.at("planar_points"));
    lo.clutter_points = points_from(jl.at("clutter_points"));
    for (const json& e : jl.at("edge_points")) {
      const int edge = e.at("edge").get<int>();
      if (edge < 1 || edge > 4) throw Error(ErrorCode::kParseError, "edge index must be 1..4");
      lo.edge_points.push_back({edge, vec_from<3>(e.at("xyz"), "xyz")});
    }
    o.lidar.emplace(name, std::move(lo));
  }
  for (const auto& [name, jc] : j.at("camera").items()) {
    CameraObservation co;
    co.plane = plane_from(jc.at("plane"));
    const json& lines = jc.at("lines");
    const json& corners = jc.at("corners");
    if (lines.size() != 4 || corners.size() != 4) throw Error(ErrorCode::kParseError, "camera entry needs 4 lines and 4 corners");
    for (std::size_t i = 0; i < 4; ++i) {
      co.lines[i] = ImageLine(vec_from<3>(lines[i], "line"));
      co.corners[i] = vec_from<2>(corners[i], "corner");
    }
    if (jc.contains("visible")) co.visible = jc.at("visible").get<std::array<bool, 4>>();
    o.camera.emplace(name, std::move(co));
  }
  return o;
}

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

// Wraps nlohmann's type/key errors so callers only see our error codes.
template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError) throw;
    throw Error(ErrorCode::kParseError, e.what());
  }
}

Termination termination_from(const std::string& s) {
  for (Termination t : {Termination::kGradientTolerance, Termination::kParameterTolerance,
                        Termination::kDampingSaturated, Termination::kMaxIterations}) {
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorCode::kParseError, "unknown termination '" + s + "'");
}

}  // namespace

std::string rig_to_json(const SensorRig& rig) { return rig_json(rig).dump(2) + "\n"; }

SensorRig rig_from_json(std::string_view text) {
  const json j = parse(text);
  return guarded([&] { return rig_from(j.contains("rig") ? j.at("rig") : j); });
}

std::string dataset_to_json(const Dataset& ds) {
  json obs = json::array();
  for (const TargetObservation& o : ds.observations) obs.push_back(observation_json(o));
  json noise = json::object();
  for (const auto& [name, n] : ds.meta.noise) noise[name] = noise_json(n);
  json meta{{"seed", ds.meta.seed},
            {"noise", std::move(noise)},
            {"tool_version", ds.meta.tool_version},
            {"range_min", ds.meta.range_min},
            {"range_max", ds.meta.range_max}};
  json j{{"rig", rig_json(ds.rig)}, {"observations", std::move(obs)}, {"meta", std::move(meta)}};
  return j.dump() + "\n";
}

Dataset dataset_from_json(std::string_view text) {
  const json j = parse(text);
  return guarded([&] {
    Dataset ds;
    ds.rig = rig_from(j.at("rig"));
    for (const json& o : j.at("observations")) ds.observations.push_back(observation_from(o));
    const json& m = j.at("meta");
    ds.meta.seed = m.at("seed").get<std::uint64_t>();
    for (const auto& [name, n] : m.at("noise").items()) ds.meta.noise.emplace(name, noise_from(n));
    ds.meta.tool_version = m.value("tool_version", std::string());
    ds.meta.range_min = m.value("range_min", 0.0);
    ds.meta.range_max = m.value("range_max", 0.0);
    return ds;
  });
}

std::string results_to_json(std::span<const PairCalibration> pairs) {
  json arr = json::array();
  for (const PairCalibration& p : pairs) {
    arr.push_back({{"sensor_a", p.sensor_a},
                   {"sensor_b", p.sensor_b},
                   {"method", std::string(to_string(p.method))},
                   {"views", p.views},
                   {"pose", pose_json(p.a_from_b)},
                   {"report",
                    {{"iterations", p.report.iterations},
                     {"initial_cost", p.report.initial_cost},
                     {"final_cost", p.report.final_cost},
                     {"gradient_norm", p.report.gradient_norm},
                     {"termination", std::string(to_string(p.report.termination))},
                     {"converged", p.report.converged}}}});
  }
  return json{{"pairs", std::move(arr)}}.dump(2) + "\n";
}

std::vector<PairCalibration> results_from_json(std::string_view text) {
  const json j = parse(text);
  return guarded([&] {
    std::vector<PairCalibration> out;
    for (const json& p : j.at("pairs")) {
      PairCalibration c;
      c.sensor_a = p.at("sensor_a").get<std::string>();
      c.sensor_b = p.at("sensor_b").get<std::string>();
      c.method = parse_method(p.at("method").get<std::string>());
      c.views = p.value("views", 0);
      c.a_from_b = pose_from(p.at("pose"));
      const json& r = p.at("report");
      c.report.iterations = r.value("iterations", 0);
      c.report.initial_cost = r.value("initial_cost", 0.0);
      c.report.final_cost = r.value("final_cost", 0.0);
      c.report.gradient_norm = r.value("gradient_norm", 0.0);
      c.report.converged = r.value("converged", false);
      if (r.contains("termination")) c.report.termination = termination_from(r.at("termination").get<std::string>());
      out.push_back(std::move(c));
    }
    return out;
  });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

SensorRig load_rig(const std::filesystem::path& path) { return rig_from_json(read_text_file(path)); }
Dataset load_dataset(const std::filesystem::path& path) { return dataset_from_json(read_text_file(path)); }
void save_dataset(const std::filesystem::path& path, const Dataset& ds) { write_text_file(path, dataset_to_json(ds)); }
std::vector<PairCalibration> load_results(const std::filesystem::path& path) {
  return results_from_json(read_text_file(path));
}
void save_results(const std::filesystem::path& path, std::span<const PairCalibration> pairs) {
  write_text_file(path, results_to_json(pairs));
}

}  // namespace extrinsiq
