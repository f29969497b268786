#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "extrinsiq/geometry.hpp"

namespace extrinsiq {

// Tangent ordering for every pose parameter block: [dw; dt], with the update
// R <- exp(dw) * R, t <- t + dt.
inline constexpr int kPoseDof = 6;

/// Plus on the pose manifold.
Pose retract(const Pose& pose, const Vec6& delta);

struct RobustLoss {
  enum class Kind { kNone, kHuber };
  Kind kind = Kind::kNone;
  double delta = 0.01;  // Huber knee on the residual-block norm

  static RobustLoss none() { return {}; }
  static RobustLoss huber(double delta) { return {Kind::kHuber, delta}; }
};

class ResidualBlock {
 public:
  virtual ~ResidualBlock() = default;

  virtual int dimension() const = 0;
  /// Indices of the pose parameter blocks this residual reads, in order.
  virtual const std::vector<int>& parameters() const = 0;
  /// residuals: dimension() values. jacobians: either empty or one row-major
  /// dimension() x 6 buffer per parameter; a null entry skips that block.
  virtual void evaluate(std::span<const Pose* const> poses, double* residuals,
                        std::span<double* const> jacobians) const = 0;
};

class CalibrationProblem {
 public:
  int add_pose(const Pose& initial, bool fixed = false);
  void set_fixed(int index, bool fixed);
  bool is_fixed(int index) const { return fixed_.at(static_cast<std::size_t>(index)); }

  /// Takes ownership. Throws InvalidArgument on unknown parameter indices.
  void add_residual(std::unique_ptr<ResidualBlock> block, std::optional<RobustLoss> loss = std::nullopt);

  const std::vector<Pose>& poses() const { return poses_; }
  void set_pose(int index, const Pose& pose) { poses_.at(static_cast<std::size_t>(index)) = pose; }
  std::size_t num_poses() const { return poses_.size(); }
  std::size_t num_blocks() const { return blocks_.size(); }
  const ResidualBlock& block(std::size_t i) const { return *blocks_.at(i); }
  const std::optional<RobustLoss>& block_loss(std::size_t i) const { return losses_.at(i); }

  /// Sum of (robustified) squared residual norms at the given poses.
  double cost(const std::vector<Pose>& poses, const RobustLoss& default_loss = {}) const;

 private:
  std::vector<Pose> poses_;
  std::vector<bool> fixed_;
  std::vector<std::unique_ptr<ResidualBlock>> blocks_;
  std::vector<std::optional<RobustLoss>> losses_;
};

struct SolverOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-10;
  double parameter_tolerance = 1e-12;
  double initial_damping = 1e-4;
  double damping_up = 10.0;
  double damping_down = 0.1;
  RobustLoss loss;  // used by blocks without their own loss

  void validate() const;
};

enum class Termination {
  kGradientTolerance,
  kParameterTolerance,
  kDampingSaturated,  // no decrease possible even for vanishing steps
  kMaxIterations,
};

std::string_view to_string(Termination t);

struct SolveReport {
  bool converged = false;
  int iterations = 0;  // LM iterations, rejected steps included
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double gradient_norm = 0.0;  // max-abs gradient at the returned poses
  Termination termination = Termination::kMaxIterations;
  std::vector<double> cost_history;  // initial cost then every accepted cost
};

struct SolveResult {
  std::vector<Pose> poses;
  SolveReport report;
};

/// Levenberg-Marquardt with diagonal (Marquardt) damping. Throws
/// NumericalFailure on a non-finite cost or Jacobian at an accepted state.
SolveResult solve_nlls(const CalibrationProblem& problem, const SolverOptions& options = {});

/// Gauss-Newton information J^T J of one pose block (losses ignored).
Mat6 information_matrix(const CalibrationProblem& problem, const std::vector<Pose>& poses, int index);

struct JacobianCheck {
  std::vector<double> block_error;  // per residual block, max over its parameters
  double max_error = 0.0;
};

/// Relative Frobenius error between analytic and central-difference
/// Jacobians (step h along each tangent coordinate).
JacobianCheck check_jacobians(const CalibrationProblem& problem, const std::vector<Pose>& poses, double h = 1e-6);

}  // namespace extrinsiq
