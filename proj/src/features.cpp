#include "extrinsiq/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "extrinsiq/error.hpp"

namespace extrinsiq {

// ------------------------------------------------------------- plane RANSAC

namespace {

struct LsqPlane {
  Vec3 normal;
  Vec3 centroid;
};

LsqPlane fit_plane_lsq(std::span<const Vec3> points, const std::vector<std::size_t>& idx) {
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i : idx) centroid += points[i];
  centroid /= static_cast<double>(idx.size());
  Mat3 scatter = Mat3::Zero();
  for (std::size_t i : idx) {
    const Vec3 d = points[i] - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  return {eig.eigenvectors().col(0), centroid};
}

std::vector<std::size_t> plane_inliers(std::span<const Vec3> points, const Vec3& n, const Vec3& p0, double thr) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (std::abs(n.dot(points[i] - p0)) <= thr) out.push_back(i);
  }
  return out;
}

}  // namespace

PlaneFit ransac_plane(std::span<const Vec3> points, double threshold, int max_iters, Rng& rng) {
  if (points.size() < 3) throw Error(ErrorCode::kNoConsensus, "plane fit needs at least 3 points");
  if (!(threshold > 0.0)) throw Error(ErrorCode::kInvalidArgument, "RANSAC threshold must be positive");

  const std::size_t n = points.size();
  std::size_t best_count = 0;
  Vec3 best_n = Vec3::UnitZ();
  Vec3 best_p = points[0];
  double needed = static_cast<double>(max_iters);
  for (int it = 0; it < max_iters && it < needed; ++it) {
    const std::size_t a = uniform_index(rng, n);
    const std::size_t b = uniform_index(rng, n);
    const std::size_t c = uniform_index(rng, n);
    const Vec3 cross = (points[b] - points[a]).cross(points[c] - points[a]);
    const double len = cross.norm();
    if (len < 1e-12) continue;
    const Vec3 normal = cross / len;
    std::size_t count = 0;
    for (const Vec3& p : points) {
      if (std::abs(normal.dot(p - points[a])) <= threshold) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best_n = normal;
      best_p = points[a];
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double miss = 1.0 - w * w * w;
      needed = miss <= 0.0 ? 0.0 : std::max(50.0, std::log(1e-4) / std::log(miss));
    }
  }
  if (static_cast<double>(best_count) < 0.2 * static_cast<double>(n) || best_count < 3) {
    throw Error(ErrorCode::kNoConsensus, "no plane supported by 20% of the points");
  }

  std::vector<std::size_t> inliers = plane_inliers(points, best_n, best_p, threshold);
  LsqPlane lsq{best_n, best_p};
  for (int round = 0; round < 5; ++round) {
    lsq = fit_plane_lsq(points, inliers);
    std::vector<std::size_t> next = plane_inliers(points, lsq.normal, lsq.centroid, threshold);
    if (next.size() < 3) throw Error(ErrorCode::kNoConsensus, "plane refinement lost its support");
    const bool stable = next == inliers;
    inliers = std::move(next);
    if (stable) break;
  }

  Vec3 normal = lsq.normal;
  if (normal.dot(lsq.centroid) > 0.0) normal = -normal;  // toward the sensor origin
  PlaneFit fit{Plane(normal, lsq.centroid), std::move(inliers), 0.0};
  double ss = 0.0;
  for (std::size_t i : fit.inliers) ss += std::pow(fit.plane.signed_distance(points[i]), 2);
  fit.rms = std::sqrt(ss / static_cast<double>(fit.inliers.size()));
  return fit;
}

// ------------------------------------------------------- boundary candidates

std::vector<std::size_t> boundary_candidates(std::span<const Vec3> points, const ScanPattern& pattern,
                                             const PlaneFit& plane) {
  pattern.validate();
  std::vector<char> is_inlier(points.size(), 0);
  for (std::size_t i : plane.inliers) is_inlier.at(i) = 1;
  // A neighbour still counts as board when it is only slightly outside the
  // inlier band; otherwise one noisy interior return opens a false boundary.
  double band = 0.0;
  for (std::size_t i : plane.inliers) band = std::max(band, std::abs(plane.plane.signed_distance(points[i])));
  std::vector<char> on_board(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    on_board[i] = is_inlier[i] || std::abs(plane.plane.signed_distance(points[i])) <= 2.0 * band;
  }

  struct Return {
    int ring;
    double azimuth;
    std::size_t index;
  };
  std::vector<Return> returns;
  returns.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3& p = points[i];
    const double elevation = std::atan2(p.z(), p.head<2>().norm());
    returns.push_back({pattern.nearest_ring(elevation), std::atan2(p.y(), p.x()), i});
  }
  std::sort(returns.begin(), returns.end(), [](const Return& a, const Return& b) {
    return a.ring != b.ring ? a.ring < b.ring : (a.azimuth != b.azimuth ? a.azimuth < b.azimuth : a.index < b.index);
  });

  // Neighbours along a scan line are at most one grid step apart; exact
  // boundary returns sit between grid azimuths, hence the 2.5-step window.
  const double max_gap = 2.5 * pattern.azimuth_step;
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < returns.size(); ++s) {
    const Return& r = returns[s];
    if (!is_inlier[r.index]) continue;
    auto neighbour_inlier = [&](std::size_t t) {
      const Return& q = returns[t];
      return q.ring == r.ring && std::abs(q.azimuth - r.azimuth) <= max_gap && on_board[q.index];
    };
    const bool prev_ok = s > 0 && neighbour_inlier(s - 1);
    const bool next_ok = s + 1 < returns.size() && neighbour_inlier(s + 1);
    if (!prev_ok || !next_ok) out.push_back(r.index);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ------------------------------------------------------------- edge lines

namespace {

struct Line2 {
  Eigen::Vector2d point;
  Eigen::Vector2d direction;  // unit
  double distance(const Eigen::Vector2d& x) const {
    const Eigen::Vector2d d = x - point;
    return std::abs(d.x() * direction.y() - d.y() * direction.x());
  }
};

Line2 fit_line_lsq(const std::vector<Eigen::Vector2d>& pts, const std::vector<std::size_t>& idx) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (std::size_t i : idx) c += pts[i];
  c /= static_cast<double>(idx.size());
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (std::size_t i : idx) scatter += (pts[i] - c) * (pts[i] - c).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  return {c, eig.eigenvectors().col(1)};
}

Eigen::Vector2d intersect(const Line2& a, const Line2& b) {
  Eigen::Matrix2d m;
  m << a.direction, -b.direction;
  const Eigen::Vector2d s = m.colPivHouseholderQr().solve(b.point - a.point);
  return a.point + s(0) * a.direction;
}

}  // namespace

std::array<EdgeLineFit, 4> extract_edge_lines(std::span<const Vec3> candidates, const PlaneFit& plane,
                                              const TargetModel& target, const EdgeOptions& options, Rng& rng) {
  target.validate();
  const Vec3 n = plane.plane.normal();
  Vec3 v_axis = options.up - options.up.dot(n) * n;
  if (v_axis.norm() < 1e-6) throw Error(ErrorCode::kDegenerateConfiguration, "board faces the up direction");
  v_axis.normalize();
  const Vec3 u_axis = v_axis.cross(n);  // right, as seen from the sensor
  const Vec3 origin = plane.plane.origin_offset();

  std::vector<Eigen::Vector2d> pts;
  pts.reserve(candidates.size());
  // Range noise moves a return along its ray, so pull candidates onto the
  // plane along the ray rather than orthogonally.
  const double rho = plane.plane.offset();
  for (const Vec3& p : candidates) {
    const double along = n.dot(p);
    const Vec3 q = std::abs(along) > 1e-9 * p.norm() ? Vec3(p * (rho / along)) : Vec3(p - (along - rho) * n);
    pts.emplace_back(u_axis.dot(q - origin), v_axis.dot(q - origin));
  }

  const double thr = options.threshold;
  std::vector<std::size_t> remaining(pts.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<Line2> lines;

  for (int k = 0; k < 4; ++k) {
    if (remaining.size() < 3) throw Error(ErrorCode::kMissingEdge, "fewer than 3 boundary points left for edge search");
    std::size_t best_count = 0;
    Line2 best{};
    for (int it = 0; it < options.max_iters; ++it) {
      const std::size_t a = remaining[uniform_index(rng, remaining.size())];
      const std::size_t b = remaining[uniform_index(rng, remaining.size())];
      const Eigen::Vector2d d = pts[b] - pts[a];
      if (d.norm() < 1e-9) continue;
      const Line2 cand{pts[a], d.normalized()};
      std::size_t count = 0;
      for (std::size_t i : remaining) {
        if (cand.distance(pts[i]) <= thr) ++count;
      }
      if (count > best_count) {
        best_count = count;
        best = cand;
      }
    }
    if (best_count < 3) throw Error(ErrorCode::kMissingEdge, "an edge has fewer than 3 supporting points");
    std::vector<std::size_t> inl;
    for (std::size_t i : remaining) {
      if (best.distance(pts[i]) <= thr) inl.push_back(i);
    }
    Line2 refined = fit_line_lsq(pts, inl);
    inl.clear();
    std::vector<std::size_t> rest;
    for (std::size_t i : remaining) (refined.distance(pts[i]) <= thr ? inl : rest).push_back(i);
    if (inl.size() < 3) throw Error(ErrorCode::kMissingEdge, "an edge has fewer than 3 supporting points");
    lines.push_back(fit_line_lsq(pts, inl));
    remaining = std::move(rest);
  }

  // Assign every candidate to its nearest line, then refit.
  std::array<std::vector<std::size_t>, 4> members;
  for (int round = 0; round < 2; ++round) {
    for (auto& m : members) m.clear();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::size_t best = 4;
      double best_d = thr;
      for (std::size_t k = 0; k < 4; ++k) {
        const double d = lines[k].distance(pts[i]);
        if (d <= best_d) {
          best_d = d;
          best = k;
        }
      }
      if (best < 4) members[best].push_back(i);
    }
    for (std::size_t k = 0; k < 4; ++k) {
      if (members[k].size() < 3) throw Error(ErrorCode::kMissingEdge, "an edge has fewer than 3 supporting points");
      if (round == 0) lines[k] = fit_line_lsq(pts, members[k]);
    }
  }

  // Midpoint of each line's support, ordered counterclockwise around the board.
  std::array<Eigen::Vector2d, 4> mids;
  Eigen::Vector2d centre = Eigen::Vector2d::Zero();
  for (std::size_t k = 0; k < 4; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i : members[k]) {
      const double s = lines[k].direction.dot(pts[i] - lines[k].point);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    mids[k] = lines[k].point + 0.5 * (lo + hi) * lines[k].direction;
    centre += 0.25 * mids[k];
  }
  std::array<std::size_t, 4> order = {0, 1, 2, 3};
  std::array<double, 4> angle{};
  for (std::size_t k = 0; k < 4; ++k) angle[k] = std::atan2(mids[k].y() - centre.y(), mids[k].x() - centre.x());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return angle[a] < angle[b]; });

  // Side lengths from the corners between consecutive lines.
  std::array<double, 4> length{};
  for (std::size_t p = 0; p < 4; ++p) {
    const Line2& prev = lines[order[(p + 3) % 4]];
    const Line2& cur = lines[order[p]];
    const Line2& next = lines[order[(p + 1) % 4]];
    length[p] = (intersect(cur, next) - intersect(prev, cur)).norm();
  }

  {
    std::array<double, 2> pair_len = {0.5 * (length[0] + length[2]), 0.5 * (length[1] + length[3])};
    const double lo_dim = std::min(target.width, target.height);
    const double hi_dim = std::max(target.width, target.height);
    const double lo_len = std::min(pair_len[0], pair_len[1]);
    const double hi_len = std::max(pair_len[0], pair_len[1]);
    for (double l : length) {
      if (!(l > 0.5 * lo_dim && l < 1.5 * hi_dim)) {
        throw Error(ErrorCode::kMissingEdge, "recovered lines do not outline the target");
      }
    }
    if (std::abs(lo_len - lo_dim) > 0.25 * lo_dim || std::abs(hi_len - hi_dim) > 0.25 * hi_dim) {
      throw Error(ErrorCode::kMissingEdge, "recovered lines do not outline the target");
    }
  }

  // Position (in CCW order) of the top edge. When the board is wider than
  // tall the long pair is {bottom, top}; otherwise {right, left} and the
  // higher one of those is the right edge (edge 2).
  std::size_t top_pos = 0;
  int top_edge = 3;
  const bool square = std::abs(target.width - target.height) < 1e-9 * std::max(target.width, target.height);
  if (square) {
    for (std::size_t p = 1; p < 4; ++p) {
      const auto& a = mids[order[p]];
      const auto& b = mids[order[top_pos]];
      if (a.y() > b.y() + 1e-9 || (std::abs(a.y() - b.y()) <= 1e-9 && a.x() < b.x())) top_pos = p;
    }
  } else {
    const std::size_t pair = (length[0] + length[2] > length[1] + length[3]) ? 0 : 1;
    const std::size_t a = pair;
    const std::size_t b = pair + 2;
    const std::size_t higher = mids[order[a]].y() >= mids[order[b]].y() ? a : b;
    top_pos = higher;
    top_edge = target.width >= target.height ? 3 : 2;
  }

  std::array<EdgeLineFit, 4> out;
  for (std::size_t p = 0; p < 4; ++p) {
    const std::size_t k = order[(top_pos + p) % 4];
    const int edge = (top_edge - 1 + static_cast<int>(p)) % 4 + 1;
    EdgeLineFit& fit = out[static_cast<std::size_t>(edge - 1)];
    fit.edge = edge;
    fit.point = origin + lines[k].point.x() * u_axis + lines[k].point.y() * v_axis;
    fit.direction = (lines[k].direction.x() * u_axis + lines[k].direction.y() * v_axis).normalized();
    fit.inliers = members[k];
  }
  return out;
}

// ------------------------------------------------------------------- PnP

namespace {

Mat3 homography_dlt(const std::array<Vec2, 4>& board, const std::array<Vec2, 4>& image) {
  // Hartley normalisation of both point sets.
  auto normaliser = [](const std::array<Vec2, 4>& pts) {
    Vec2 c = Vec2::Zero();
    for (const Vec2& p : pts) c += 0.25 * p;
    double mean = 0.0;
    for (const Vec2& p : pts) mean += 0.25 * (p - c).norm();
    const double s = std::sqrt(2.0) / mean;
    Mat3 t;
    t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
    return t;
  };
  const Mat3 tb = normaliser(board);
  const Mat3 ti = normaliser(image);
  Eigen::Matrix<double, 8, 9> a;
  for (int i = 0; i < 4; ++i) {
    const Vec3 x = tb * Vec3(board[i].x(), board[i].y(), 1.0);
    const Vec3 y = ti * Vec3(image[i].x(), image[i].y(), 1.0);
    a.row(2 * i) << 0.0, 0.0, 0.0, -y.z() * x.transpose(), y.y() * x.transpose();
    a.row(2 * i + 1) << y.z() * x.transpose(), 0.0, 0.0, 0.0, -y.x() * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return ti.inverse() * hn * tb;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

// Corner residuals and Jacobian (8 x 6) under left perturbation.
double reprojection(const Pose& pose, const std::array<Vec3, 4>& board, const std::array<Vec2, 4>& px,
                    const CameraIntrinsics& k, Eigen::Matrix<double, 8, 1>* r, Eigen::Matrix<double, 8, 6>* j) {
  double cost = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec3 rx = pose.rotation * board[i];
    const Vec3 x = rx + pose.translation;
    if (!(x.z() > 1e-9)) return std::numeric_limits<double>::infinity();
    const Vec2 p = project_camera_point(k, x);
    r->segment<2>(2 * i) = p - px[i];
    cost += r->segment<2>(2 * i).squaredNorm();
    if (j != nullptr) {
      const double iz = 1.0 / x.z();
      Eigen::Matrix<double, 2, 3> dp;
      dp << k.fx * iz, k.skew * iz, -(k.fx * x.x() + k.skew * x.y()) * iz * iz, 0.0, k.fy * iz,
          -k.fy * x.y() * iz * iz;
      j->block<2, 3>(2 * i, 0) = -dp * skew(rx);
      j->block<2, 3>(2 * i, 3) = dp;
    }
  }
  return cost;
}

}  // namespace

std::array<ImageLine, 4> image_lines_from_corners(const std::array<Vec2, 4>& corners) {
  std::array<ImageLine, 4> out;
  for (std::size_t j = 0; j < 4; ++j) out[j] = ImageLine::through(corners[j], corners[(j + 1) % 4]);
  return out;
}

PnpResult planar_pnp(const std::array<Vec2, 4>& corners, const TargetModel& target, const CameraIntrinsics& k) {
  target.validate();
  k.validate();
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      for (int c = b + 1; c < 4; ++c) {
        const Vec2 u = corners[b] - corners[a];
        const Vec2 v = corners[c] - corners[a];
        const double area = std::abs(u.x() * v.y() - u.y() * v.x());
        if (area < 1e-6 * std::max(1.0, u.norm() * v.norm())) {
          throw Error(ErrorCode::kDegenerateConfiguration, "three target corners are collinear");
        }
      }
    }
  }

  const std::array<Vec3, 4> board = target.corners();
  std::array<Vec2, 4> board2;
  for (int i = 0; i < 4; ++i) board2[i] = board[i].head<2>();

  const Mat3 a = k.matrix().inverse() * homography_dlt(board2, corners);
  double scale = 2.0 / (a.col(0).norm() + a.col(1).norm());
  if (a(2, 2) * scale < 0.0) scale = -scale;
  Mat3 r0;
  r0.col(0) = scale * a.col(0);
  r0.col(1) = scale * a.col(1);
  r0.col(2) = r0.col(0).cross(r0.col(1));
  Pose pose{Rotation::from_matrix(nearest_rotation(r0)), scale * a.col(2)};

  Eigen::Matrix<double, 8, 1> r;
  Eigen::Matrix<double, 8, 6> j;
  double cost = reprojection(pose, board, corners, k, &r, &j);
  if (!std::isfinite(cost)) throw Error(ErrorCode::kDegenerateConfiguration, "homography places the board behind the camera");

  double lambda = 1e-6;
  bool converged = false;
  for (int it = 0; it < 100 && !converged; ++it) {
    const Mat6 h = j.transpose() * j;
    const Vec6 g = j.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-12 * std::max(1.0, cost)) {
      converged = true;
      break;
    }
    Mat6 damped = h;
    damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
    const Vec6 step = -damped.ldlt().solve(g);
    const Pose trial{Rotation::exp(step.head<3>()) * pose.rotation, pose.translation + step.tail<3>()};
    Eigen::Matrix<double, 8, 1> r2;
    Eigen::Matrix<double, 8, 6> j2;
    const double cost2 = reprojection(trial, board, corners, k, &r2, &j2);
    if (cost2 < cost) {
      const double rel = (cost - cost2) / std::max(cost, 1e-300);
      pose = trial;
      r = r2;
      j = j2;
      cost = cost2;
      lambda = std::max(lambda * 0.1, 1e-12);
      if (step.norm() < 1e-14 * (1.0 + pose.translation.norm()) || rel < 1e-15) converged = true;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) converged = true;  // no descent direction left
    }
  }
  if (!converged) throw Error(ErrorCode::kDidNotConverge, "corner reprojection refinement did not settle");

  const Vec3 normal = pose.rotation * Vec3::UnitZ();
  for (const Vec3& c : board) {
    if (!(transform_point(pose, c).z() > 0.0)) {
      throw Error(ErrorCode::kDegenerateConfiguration, "recovered board lies behind the camera");
    }
  }
  if (!(normal.dot(pose.translation) < 0.0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "corner order violates chirality (board seen from behind)");
  }
  return {pose, Plane(normal, pose.translation), std::sqrt(cost / 4.0)};
}

// ------------------------------------------------------- dataset features

std::optional<Plane> DatasetFeatures::plane(std::size_t i, const std::string& sensor, PlaneSource source) const {
  const ObservationFeatures& obs = observations.at(i);
  if (auto it = obs.lidar.find(sensor); it != obs.lidar.end()) return it->second.plane.plane;
  if (auto it = obs.camera.find(sensor); it != obs.camera.end()) {
    if (source == PlaneSource::kDetector) return it->second.plane;
    if (it->second.pnp) return it->second.pnp->plane;
  }
  return std::nullopt;
}

namespace {

double scale_for(const FeatureOptions& options, const std::string& sensor) {
  auto it = options.threshold_scale.find(sensor);
  return it == options.threshold_scale.end() ? 1.0 : it->second;
}

}  // namespace

double plane_threshold(const Dataset& ds, const std::string& lidar, const FeatureOptions& options) {
  return std::max(options.min_threshold, options.sigma_multiplier * ds.noise_for(lidar).lidar_range_sigma) *
         scale_for(options, lidar);
}

double edge_threshold(const std::string& lidar, const FeatureOptions& options) {
  return options.min_threshold * scale_for(options, lidar);
}

DatasetFeatures extract_features(const Dataset& ds, const FeatureOptions& options,
                                 const std::vector<std::string>& sensors) {
  DatasetFeatures out;
  out.rig = ds.rig;
  const std::vector<std::string> wanted = sensors.empty() ? ds.rig.names() : sensors;
  for (const std::string& name : wanted) (void)ds.rig.sensor(name);

  for (std::size_t i = 0; i < ds.observations.size(); ++i) {
    const TargetObservation& obs = ds.observations[i];
    ObservationFeatures of;
    of.pose_index = obs.pose_index;
    for (std::size_t s = 0; s < ds.rig.sensors.size(); ++s) {
      const Sensor& sensor = ds.rig.sensors[s];
      if (std::find(wanted.begin(), wanted.end(), sensor.name) == wanted.end()) continue;
      Rng rng = derive_rng(options.seed, {i, s});
      try {
        if (sensor.is_lidar()) {
          auto it = obs.lidar.find(sensor.name);
          if (it == obs.lidar.end()) continue;
          const std::vector<Vec3> points = it->second.all_points();
          const double thr = plane_threshold(ds, sensor.name, options);
          LidarFeatures lf;
          lf.plane = ransac_plane(points, thr, options.plane_iterations, rng);
          for (std::size_t idx : lf.plane.inliers) lf.plane_points.push_back(points[idx]);
          const std::vector<std::size_t> cand_idx = boundary_candidates(points, sensor.scan, lf.plane);
          std::vector<Vec3> cand;
          for (std::size_t idx : cand_idx) cand.push_back(points[idx]);
          try {
            EdgeOptions eo;
            eo.threshold = edge_threshold(sensor.name, options);
            const auto edges = extract_edge_lines(cand, lf.plane, ds.rig.target, eo, rng);
            std::array<std::vector<Vec3>, 4> grouped;
            for (const EdgeLineFit& e : edges) {
              for (std::size_t idx : e.inliers) grouped[static_cast<std::size_t>(e.edge - 1)].push_back(cand[idx]);
            }
            lf.edge_points = std::move(grouped);
          } catch (const Error& e) {
            lf.edge_failure = e.what();
          }
          of.lidar.emplace(sensor.name, std::move(lf));
        } else {
          auto it = obs.camera.find(sensor.name);
          if (it == obs.camera.end()) continue;
          const CameraObservation& co = it->second;
          CameraFeatures cf{co.plane, std::nullopt, {}, co.lines, co.corners};
          try {
            cf.pnp = planar_pnp(co.corners, ds.rig.target, sensor.intrinsics);
          } catch (const Error& e) {
            cf.pnp_failure = e.what();
          }
          of.camera.emplace(sensor.name, std::move(cf));
        }
      } catch (const Error& e) {
        of.failures.emplace(sensor.name, e.what());
      }
    }
    out.observations.push_back(std::move(of));
  }
  return out;
}

}  // namespace extrinsiq
