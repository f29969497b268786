#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "extrinsiq/features.hpp"
#include "extrinsiq/nlls.hpp"
#include "extrinsiq/sim.hpp"

namespace extrinsiq {

enum class Method { kPpc, kPbpc, kMsg };

std::string_view to_string(Method m);
/// "ppc", "pbpc" or "msg"; throws InvalidArgument otherwise.
Method parse_method(std::string_view name);

struct CalibrationOptions {
  SolverOptions solver;
  FeatureOptions features;        // used by the Dataset overloads
  double rank_threshold = 1e-6;   // smallest singular value of stacked normals
  int min_ppc_views = 3;
  int min_pbpc_views = 2;
  int min_pbpc_lines = 6;
};

/// One estimated extrinsic a_from_b. For PPC/PBPC a is the camera and b the
/// LIDAR.
struct PairCalibration {
  std::string sensor_a;
  std::string sensor_b;
  Method method = Method::kPpc;
  Pose a_from_b;
  SolveReport report;
  int views = 0;
};

// PPC: LIDAR plane points against camera target planes.
// Throws InsufficientViews (fewer than 3 views or rank-deficient normals).
PairCalibration calibrate_ppc(const DatasetFeatures& features, const std::string& camera, const std::string& lidar,
                              const Pose& init, const CalibrationOptions& options = {},
                              PlaneSource camera_planes = PlaneSource::kDetector);

/// Second PBPC stage alone: LIDAR edge points against back-projected image
/// lines, starting from `stage1`. Without any edge point it returns `stage1`.
PairCalibration refine_pbpc(const DatasetFeatures& features, const std::string& camera, const std::string& lidar,
                            const Pose& stage1, const CalibrationOptions& options = {});

// PBPC: PPC on PnP camera planes from `init`, then refine_pbpc. Throws InsufficientViews when
// fewer than 2 views or 6 lines carry edge points; PPC errors propagate.
PairCalibration calibrate_pbpc(const DatasetFeatures& features, const std::string& camera, const std::string& lidar,
                               const Pose& init, const CalibrationOptions& options = {});

/// Plane-to-plane pairwise calibration between any two sensors; returns a_from_b.
PairCalibration calibrate_msg_pairwise(const DatasetFeatures& features, const std::string& a, const std::string& b,
                                       const Pose& init, const CalibrationOptions& options = {});

struct PoseGraphEdge {
  std::string a;
  std::string b;
  Pose measured_a_from_b;
  Mat6 information = Mat6::Zero();
};

struct PoseGraph {
  std::vector<std::string> nodes;  // nodes.front() is the gauge
  std::vector<PoseGraphEdge> edges;
  std::map<std::string, Pose> initial;  // sensor_from_global

  bool connected() const;
};

struct GlobalCalibration {
  std::map<std::string, Pose> sensor_from_global;
  std::vector<PairCalibration> pairwise;
  PoseGraph graph;
  SolveReport report;

  /// compose(pose_a, invert(pose_b)).
  Pose extrinsic(const std::string& a, const std::string& b) const;
};

/// Pairwise MSG on every co-visible pair, then one pose-graph solve with the
/// first sensor as gauge. Throws DisconnectedGraph.
GlobalCalibration calibrate_msg_global(const DatasetFeatures& features, const std::vector<std::string>& sensors,
                                       const CalibrationOptions& options = {});

/// Dispatch on method; for PPC and PBPC `a` is the camera and `b` the LIDAR.
PairCalibration calibrate_pair(const DatasetFeatures& features, Method method, const std::string& a,
                               const std::string& b, const Pose& init, const CalibrationOptions& options = {});

/// Threshold scale for a pair under the confidence rule 2 / (conf_a + conf_b).
double confidence_threshold_scale(const SensorRig& rig, const std::string& a, const std::string& b);

// Convenience overloads that extract features for the sensors involved.
PairCalibration calibrate_ppc(const Dataset& ds, const std::string& camera, const std::string& lidar,
                              const Pose& init, const CalibrationOptions& options = {});
PairCalibration calibrate_pbpc(const Dataset& ds, const std::string& camera, const std::string& lidar,
                               const Pose& init, const CalibrationOptions& options = {});
PairCalibration calibrate_msg_pairwise(const Dataset& ds, const std::string& a, const std::string& b,
                                       const Pose& init, const CalibrationOptions& options = {});
GlobalCalibration calibrate_msg_global(const Dataset& ds, const std::vector<std::string>& sensors,
                                       const CalibrationOptions& options = {});

}  // namespace extrinsiq
