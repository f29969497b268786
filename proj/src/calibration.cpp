#include "extrinsiq/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include <Eigen/SVD>

#include "extrinsiq/error.hpp"
#include "extrinsiq/residuals.hpp"

namespace extrinsiq {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kPpc: return "ppc";
    case Method::kPbpc: return "pbpc";
    case Method::kMsg: return "msg";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "ppc") return Method::kPpc;
  if (name == "pbpc") return Method::kPbpc;
  if (name == "msg") return Method::kMsg;
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + std::string(name) + "' (expected ppc, pbpc or msg)");
}

namespace {

double smallest_singular_value(const std::vector<Vec3>& normals) {
  if (normals.size() < 3) return 0.0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(normals.size()), 3);
  for (std::size_t i = 0; i < normals.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = normals[i].transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(2);
}

void require_camera_lidar(const SensorRig& rig, const std::string& camera, const std::string& lidar) {
  if (!rig.sensor(camera).is_camera()) throw Error(ErrorCode::kInvalidArgument, camera + " is not a camera");
  if (!rig.sensor(lidar).is_lidar()) throw Error(ErrorCode::kInvalidArgument, lidar + " is not a LIDAR");
}

const CameraFeatures* camera_of(const ObservationFeatures& o, const std::string& name) {
  auto it = o.camera.find(name);
  return it == o.camera.end() ? nullptr : &it->second;
}

const LidarFeatures* lidar_of(const ObservationFeatures& o, const std::string& name) {
  auto it = o.lidar.find(name);
  return it == o.lidar.end() ? nullptr : &it->second;
}

struct PlanePair {
  Plane a;
  Plane b;
};

std::vector<PlanePair> shared_planes(const DatasetFeatures& f, const std::string& a, const std::string& b) {
  std::vector<PlanePair> out;
  for (std::size_t i = 0; i < f.observations.size(); ++i) {
    auto pa = f.plane(i, a);
    auto pb = f.plane(i, b);
    if (pa && pb) out.push_back({*pa, *pb});
  }
  return out;
}

double confidence(const SensorRig& rig, const std::string& s) { return rig.sensor(s).confidence; }

}  // namespace

double confidence_threshold_scale(const SensorRig& rig, const std::string& a, const std::string& b) {
  return 2.0 / (confidence(rig, a) + confidence(rig, b));
}

// ------------------------------------------------------------------ PPC

PairCalibration calibrate_ppc(const DatasetFeatures& features, const std::string& camera, const std::string& lidar,
                              const Pose& init, const CalibrationOptions& options, PlaneSource camera_planes) {
  require_camera_lidar(features.rig, camera, lidar);
  CalibrationProblem problem;
  const int pose = problem.add_pose(init);
  std::vector<Vec3> normals;
  for (std::size_t i = 0; i < features.observations.size(); ++i) {
    const LidarFeatures* lf = lidar_of(features.observations[i], lidar);
    const std::optional<Plane> plane = features.plane(i, camera, camera_planes);
    if (!plane || lf == nullptr || lf->plane_points.empty()) continue;
    normals.push_back(plane->normal());
    const double w = std::sqrt(1.0 / static_cast<double>(lf->plane_points.size()));
    for (const Vec3& p : lf->plane_points) problem.add_residual(make_ppc_block(pose, p, *plane, w));
  }
  if (static_cast<int>(normals.size()) < options.min_ppc_views) {
    throw Error(ErrorCode::kInsufficientViews, "PPC needs at least " + std::to_string(options.min_ppc_views) +
                                                   " views, got " + std::to_string(normals.size()));
  }
  if (smallest_singular_value(normals) <= options.rank_threshold) {
    throw Error(ErrorCode::kInsufficientViews, "target normals do not span three dimensions");
  }
  SolveResult res = solve_nlls(problem, options.solver);
  return {camera, lidar, Method::kPpc, res.poses[0], std::move(res.report), static_cast<int>(normals.size())};
}

// ----------------------------------------------------------------- PBPC

namespace {

struct EdgeSupport {
  int views = 0;
  int lines = 0;
};

EdgeSupport add_pbpc_residuals(const DatasetFeatures& features, const std::string& camera, const std::string& lidar,
                               CalibrationProblem& problem, int pose) {
  const CameraIntrinsics& k = features.rig.sensor(camera).intrinsics;
  EdgeSupport support;
  for (const ObservationFeatures& o : features.observations) {
    const CameraFeatures* cf = camera_of(o, camera);
    const LidarFeatures* lf = lidar_of(o, lidar);
    if (cf == nullptr || lf == nullptr || !lf->edge_points) continue;
    int lines_here = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const std::vector<Vec3>& q = (*lf->edge_points)[j];
      if (q.empty()) continue;
      const Vec3 m = backprojected_plane(k, cf->lines[j]).normal();
      const double w = std::sqrt(1.0 / static_cast<double>(q.size()));
      for (const Vec3& x : q) problem.add_residual(make_pbpc_block(pose, x, m, w));
      ++lines_here;
    }
    if (lines_here > 0) {
      ++support.views;
      support.lines += lines_here;
    }
  }
  return support;
}

}  // namespace

PairCalibration refine_pbpc(const DatasetFeatures& features, const std::string& camera, const std::string& lidar,
                            const Pose& stage1, const CalibrationOptions& options) {
  require_camera_lidar(features.rig, camera, lidar);
  CalibrationProblem problem;
  const int pose = problem.add_pose(stage1);
  const EdgeSupport support = add_pbpc_residuals(features, camera, lidar, problem, pose);
  SolveResult res = solve_nlls(problem, options.solver);
  return {camera, lidar, Method::kPbpc, res.poses[0], std::move(res.report), support.views};
}

PairCalibration calibrate_pbpc(const DatasetFeatures& features, const std::string& camera, const std::string& lidar,
                               const Pose& init, const CalibrationOptions& options) {
  require_camera_lidar(features.rig, camera, lidar);
  {
    CalibrationProblem probe;
    const EdgeSupport support = add_pbpc_residuals(features, camera, lidar, probe, probe.add_pose(init));
    if (support.views < options.min_pbpc_views || support.lines < options.min_pbpc_lines) {
      throw Error(ErrorCode::kInsufficientViews,
                  "PBPC needs at least " + std::to_string(options.min_pbpc_views) + " views and " +
                      std::to_string(options.min_pbpc_lines) + " lines with edge points, got " +
                      std::to_string(support.views) + " views and " + std::to_string(support.lines) + " lines");
    }
  }
  const PairCalibration stage1 = calibrate_ppc(features, camera, lidar, init, options, PlaneSource::kPnp);
  PairCalibration stage2 = refine_pbpc(features, camera, lidar, stage1.a_from_b, options);
  stage2.report.iterations += stage1.report.iterations;
  stage2.report.converged = stage2.report.converged && stage1.report.converged;
  return stage2;
}

// ------------------------------------------------------------------ MSG

namespace {

CalibrationProblem msg_pair_problem(const DatasetFeatures& features, const std::string& a, const std::string& b,
                                    const Pose& init, const CalibrationOptions& options, int* views) {
  if (a == b) throw Error(ErrorCode::kInvalidArgument, "MSG pair needs two distinct sensors");
  const std::vector<PlanePair> pairs = shared_planes(features, a, b);
  std::vector<Vec3> normals;
  for (const PlanePair& p : pairs) normals.push_back(p.a.normal());
  if (static_cast<int>(pairs.size()) < options.min_ppc_views) {
    throw Error(ErrorCode::kInsufficientViews, a + " and " + b + " share " + std::to_string(pairs.size()) +
                                                   " views, need " + std::to_string(options.min_ppc_views));
  }
  if (smallest_singular_value(normals) <= options.rank_threshold) {
    throw Error(ErrorCode::kInsufficientViews, "shared target normals of " + a + " and " + b + " are rank deficient");
  }
  const double w = confidence(features.rig, a) * confidence(features.rig, b);
  CalibrationProblem problem;
  const int pose = problem.add_pose(init);
  for (const PlanePair& p : pairs) problem.add_residual(make_msg_pair_block(pose, p.a, p.b, w));
  *views = static_cast<int>(pairs.size());
  return problem;
}

}  // namespace

PairCalibration calibrate_msg_pairwise(const DatasetFeatures& features, const std::string& a, const std::string& b,
                                       const Pose& init, const CalibrationOptions& options) {
  int views = 0;
  const CalibrationProblem problem = msg_pair_problem(features, a, b, init, options, &views);
  SolveResult res = solve_nlls(problem, options.solver);
  return {a, b, Method::kMsg, res.poses[0], std::move(res.report), views};
}

bool PoseGraph::connected() const {
  if (nodes.empty()) return false;
  std::set<std::string> seen{nodes.front()};
  std::deque<std::string> queue{nodes.front()};
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    for (const PoseGraphEdge& e : edges) {
      const std::string* next = e.a == cur ? &e.b : (e.b == cur ? &e.a : nullptr);
      if (next != nullptr && seen.insert(*next).second) queue.push_back(*next);
    }
  }
  return seen.size() == nodes.size();
}

Pose GlobalCalibration::extrinsic(const std::string& a, const std::string& b) const {
  auto ia = sensor_from_global.find(a);
  auto ib = sensor_from_global.find(b);
  if (ia == sensor_from_global.end() || ib == sensor_from_global.end()) {
    throw Error(ErrorCode::kUnknownSensor, "no global pose for " + (ia == sensor_from_global.end() ? a : b));
  }
  return compose(ia->second, invert(ib->second));
}

GlobalCalibration calibrate_msg_global(const DatasetFeatures& features, const std::vector<std::string>& sensors,
                                       const CalibrationOptions& options) {
  if (sensors.size() < 2) throw Error(ErrorCode::kInvalidArgument, "global calibration needs at least two sensors");
  std::set<std::string> unique(sensors.begin(), sensors.end());
  if (unique.size() != sensors.size()) throw Error(ErrorCode::kInvalidArgument, "duplicate sensor in graph");
  for (const std::string& s : sensors) (void)features.rig.sensor(s);

  GlobalCalibration out;
  out.graph.nodes = sensors;
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    for (std::size_t j = i + 1; j < sensors.size(); ++j) {
      int views = 0;
      CalibrationProblem problem;
      try {
        problem = msg_pair_problem(features, sensors[i], sensors[j], Pose::identity(), options, &views);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kInsufficientViews) continue;
        throw;
      }
      SolveResult res = solve_nlls(problem, options.solver);
      const Mat6 info = information_matrix(problem, res.poses, 0);
      out.graph.edges.push_back({sensors[i], sensors[j], res.poses[0], info});
      out.pairwise.push_back({sensors[i], sensors[j], Method::kMsg, res.poses[0], std::move(res.report), views});
    }
  }
  if (!out.graph.connected()) throw Error(ErrorCode::kDisconnectedGraph, "pairwise results do not connect all sensors");

  // Spanning-tree initialisation from the gauge.
  out.graph.initial[sensors.front()] = Pose::identity();
  std::deque<std::string> queue{sensors.front()};
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    for (const PoseGraphEdge& e : out.graph.edges) {
      if (e.a == cur && !out.graph.initial.count(e.b)) {
        out.graph.initial[e.b] = compose(invert(e.measured_a_from_b), out.graph.initial[cur]);
        queue.push_back(e.b);
      } else if (e.b == cur && !out.graph.initial.count(e.a)) {
        out.graph.initial[e.a] = compose(e.measured_a_from_b, out.graph.initial[cur]);
        queue.push_back(e.a);
      }
    }
  }

  CalibrationProblem problem;
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    index[sensors[i]] = problem.add_pose(out.graph.initial.at(sensors[i]), i == 0);
  }
  for (const PoseGraphEdge& e : out.graph.edges) {
    const double c = confidence(features.rig, e.a) * confidence(features.rig, e.b);
    problem.add_residual(
        make_relative_pose_block(index.at(e.a), index.at(e.b), e.measured_a_from_b, sqrt_information(c * c * e.information)));
  }
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    for (std::size_t j = i + 1; j < sensors.size(); ++j) {
      const double c = confidence(features.rig, sensors[i]) * confidence(features.rig, sensors[j]);
      for (const PlanePair& p : shared_planes(features, sensors[i], sensors[j])) {
        problem.add_residual(make_graph_plane_block(index.at(sensors[i]), index.at(sensors[j]), p.a, p.b, c));
      }
    }
  }
  SolveResult res = solve_nlls(problem, options.solver);
  for (std::size_t i = 0; i < sensors.size(); ++i) out.sensor_from_global[sensors[i]] = res.poses[i];
  out.report = std::move(res.report);
  return out;
}

PairCalibration calibrate_pair(const DatasetFeatures& features, Method method, const std::string& a,
                               const std::string& b, const Pose& init, const CalibrationOptions& options) {
  switch (method) {
    case Method::kPpc: return calibrate_ppc(features, a, b, init, options);
    case Method::kPbpc: return calibrate_pbpc(features, a, b, init, options);
    case Method::kMsg: return calibrate_msg_pairwise(features, a, b, init, options);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown method");
}

// ------------------------------------------------- dataset-level overloads

namespace {

DatasetFeatures features_for(const Dataset& ds, const std::vector<std::string>& sensors, FeatureOptions fo) {
  return extract_features(ds, fo, sensors);
}

}  // namespace

PairCalibration calibrate_ppc(const Dataset& ds, const std::string& camera, const std::string& lidar,
                              const Pose& init, const CalibrationOptions& options) {
  return calibrate_ppc(features_for(ds, {camera, lidar}, options.features), camera, lidar, init, options);
}

PairCalibration calibrate_pbpc(const Dataset& ds, const std::string& camera, const std::string& lidar,
                               const Pose& init, const CalibrationOptions& options) {
  return calibrate_pbpc(features_for(ds, {camera, lidar}, options.features), camera, lidar, init, options);
}

PairCalibration calibrate_msg_pairwise(const Dataset& ds, const std::string& a, const std::string& b,
                                       const Pose& init, const CalibrationOptions& options) {
  FeatureOptions fo = options.features;
  const double scale = confidence_threshold_scale(ds.rig, a, b);
  for (const std::string& s : {a, b}) {
    if (ds.rig.sensor(s).is_lidar()) fo.threshold_scale[s] = scale;
  }
  return calibrate_msg_pairwise(features_for(ds, {a, b}, fo), a, b, init, options);
}

GlobalCalibration calibrate_msg_global(const Dataset& ds, const std::vector<std::string>& sensors,
                                       const CalibrationOptions& options) {
  FeatureOptions fo = options.features;
  for (const std::string& s : sensors) {
    if (ds.rig.sensor(s).is_lidar()) fo.threshold_scale[s] = confidence_threshold_scale(ds.rig, s, s);
  }
  return calibrate_msg_global(features_for(ds, sensors, fo), sensors, options);
}

}  // namespace extrinsiq
