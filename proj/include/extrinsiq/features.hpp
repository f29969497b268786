#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "extrinsiq/geometry.hpp"
#include "extrinsiq/random.hpp"
#include "extrinsiq/sim.hpp"

namespace extrinsiq {

struct PlaneFit {
  Plane plane;  // normal toward the sensor origin, origin_offset = inlier centroid
  std::vector<std::size_t> inliers;
  double rms = 0.0;  // meters
};

/// Maximal-consensus plane refined by least squares over its inliers.
/// Throws NoConsensus for < 3 points or when the best inlier ratio is < 0.2.
PlaneFit ransac_plane(std::span<const Vec3> points, double threshold, int max_iters, Rng& rng);

struct EdgeLineFit {
  int edge = 1;  // 1..4, target corner-order convention
  Vec3 point = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  std::vector<std::size_t> inliers;  // indices into the candidate list
};

struct EdgeOptions {
  double threshold = 0.01;        // meters, in-plane distance to a line
  int max_iters = 500;
  Vec3 up = Vec3::UnitZ();        // sensor "up" used to orient the board
};

/// Plane inliers at the end of a scan-line run: their azimuth neighbours on
/// the same ring are missing or not plane inliers.
std::vector<std::size_t> boundary_candidates(std::span<const Vec3> points, const ScanPattern& pattern,
                                             const PlaneFit& plane);

/// Four board edges by sequential RANSAC on in-plane coordinates (candidates
/// are intersected with the plane along their rays from the sensor origin), associated
/// with the target convention: lines are ordered counterclockwise (seen from
/// the sensor) and the longer edge whose midpoint is higher is edge 3 (top).
/// Throws MissingEdge when any edge has fewer than 3 inliers.
std::array<EdgeLineFit, 4> extract_edge_lines(std::span<const Vec3> candidates, const PlaneFit& plane,
                                              const TargetModel& target, const EdgeOptions& options, Rng& rng);

struct PnpResult {
  Pose camera_from_target;
  Plane plane;  // target plane in the camera frame, normal toward the camera
  double rms_reprojection = 0.0;  // pixels
};

/// Board pose from its four corners (target order). Homography initialisation
/// followed by Gauss-Newton on the corner reprojection error.
/// Throws DegenerateConfiguration (collinear corners, chirality violation) or
/// DidNotConverge.
PnpResult planar_pnp(const std::array<Vec2, 4>& corners, const TargetModel& target, const CameraIntrinsics& k);

/// Line j joins corner j and corner j+1 (mod 4). Throws CoincidentPoints.
std::array<ImageLine, 4> image_lines_from_corners(const std::array<Vec2, 4>& corners);

// ---------------------------------------------------------------------------
// Per-dataset feature extraction.

struct LidarFeatures {
  PlaneFit plane;
  std::vector<Vec3> plane_points;  // inlier points, P_im
  /// Q_ijn grouped by edge index (0-based slot j-1); present when all four
  /// edges were recovered.
  std::optional<std::array<std::vector<Vec3>, 4>> edge_points;
  std::string edge_failure;
};

struct CameraFeatures {
  Plane plane;  // detector plane reported with the observation
  std::optional<PnpResult> pnp;  // re-estimated from the observed corners
  std::string pnp_failure;
  std::array<ImageLine, 4> lines;
  std::array<Vec2, 4> corners;
};

/// Which camera plane a method consumes.
enum class PlaneSource { kDetector, kPnp };

struct FeatureOptions {
  int plane_iterations = 1000;
  double min_threshold = 0.01;   // meters
  double sigma_multiplier = 3.0; // threshold = max(min, multiplier * range sigma)
  /// Per-sensor threshold scale (e.g. from sensor confidences); 1 when absent.
  std::map<std::string, double> threshold_scale;
  std::uint64_t seed = 0x66656174ULL;
};

struct ObservationFeatures {
  int pose_index = 0;
  std::map<std::string, LidarFeatures> lidar;
  std::map<std::string, CameraFeatures> camera;
  std::map<std::string, std::string> failures;  // sensor -> reason features are missing

  bool has(const std::string& sensor) const { return lidar.count(sensor) || camera.count(sensor); }
};

struct DatasetFeatures {
  SensorRig rig;
  std::vector<ObservationFeatures> observations;

  /// Target plane seen by `sensor` in observation i. LIDARs always use their
  /// RANSAC plane; `source` picks the camera plane.
  std::optional<Plane> plane(std::size_t i, const std::string& sensor,
                             PlaneSource source = PlaneSource::kDetector) const;
};

double plane_threshold(const Dataset& ds, const std::string& lidar, const FeatureOptions& options);
/// In-plane edge threshold. Candidates are moved onto the plane along their
/// rays, which removes range noise, so this does not grow with sigma.
double edge_threshold(const std::string& lidar, const FeatureOptions& options);

/// Extracts features for `sensors` (all sensors when empty). Feature code
/// never reads the simulator's point labels.
DatasetFeatures extract_features(const Dataset& ds, const FeatureOptions& options = {},
                                 const std::vector<std::string>& sensors = {});

}  // namespace extrinsiq
