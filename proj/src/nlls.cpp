#include "extrinsiq/nlls.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "extrinsiq/error.hpp"

namespace extrinsiq {

using RowJacobian = Eigen::Matrix<double, Eigen::Dynamic, kPoseDof, Eigen::RowMajor>;

Pose retract(const Pose& pose, const Vec6& delta) {
  return {Rotation::exp(delta.head<3>()) * pose.rotation, pose.translation + delta.tail<3>()};
}

int CalibrationProblem::add_pose(const Pose& initial, bool fixed) {
  poses_.push_back(initial);
  fixed_.push_back(fixed);
  return static_cast<int>(poses_.size()) - 1;
}

void CalibrationProblem::set_fixed(int index, bool fixed) { fixed_.at(static_cast<std::size_t>(index)) = fixed; }

void CalibrationProblem::add_residual(std::unique_ptr<ResidualBlock> block, std::optional<RobustLoss> loss) {
  if (!block || block->dimension() <= 0) throw Error(ErrorCode::kInvalidArgument, "empty residual block");
  for (int p : block->parameters()) {
    if (p < 0 || static_cast<std::size_t>(p) >= poses_.size()) {
      throw Error(ErrorCode::kInvalidArgument, "residual references unknown parameter block " + std::to_string(p));
    }
  }
  blocks_.push_back(std::move(block));
  losses_.push_back(loss);
}

void SolverOptions::validate() const {
  if (max_iterations < 0) throw Error(ErrorCode::kInvalidArgument, "max_iterations must be >= 0");
  if (!(gradient_tolerance > 0.0) || !(parameter_tolerance > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "solver tolerances must be positive");
  }
  if (!(initial_damping > 0.0) || !(damping_up > 1.0) || !(damping_down > 0.0 && damping_down < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid damping schedule");
  }
  if (loss.kind == RobustLoss::Kind::kHuber && !(loss.delta > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "Huber delta must be positive");
  }
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kGradientTolerance: return "gradient_tolerance";
    case Termination::kParameterTolerance: return "parameter_tolerance";
    case Termination::kDampingSaturated: return "damping_saturated";
    case Termination::kMaxIterations: return "max_iterations";
  }
  return "unknown";
}

namespace {

// Squared norm s -> (rho(s), sqrt(rho'(s))).
std::pair<double, double> apply_loss(const RobustLoss& loss, double s) {
  if (loss.kind == RobustLoss::Kind::kHuber && s > loss.delta * loss.delta) {
    const double root = std::sqrt(s);
    return {2.0 * loss.delta * root - loss.delta * loss.delta, std::sqrt(loss.delta / root)};
  }
  return {s, 1.0};
}

class Evaluator {
 public:
  Evaluator(const CalibrationProblem& problem, const RobustLoss& default_loss)
      : problem_(problem), default_loss_(default_loss), offset_(problem.num_poses(), -1) {
    for (std::size_t i = 0; i < problem.num_poses(); ++i) {
      if (!problem.is_fixed(static_cast<int>(i))) {
        offset_[i] = free_dim_;
        free_dim_ += kPoseDof;
      }
    }
  }

  int free_dim() const { return free_dim_; }
  int offset(std::size_t pose) const { return offset_[pose]; }

  // Cost only, or cost plus the (loss-scaled) normal equations.
  double evaluate(const std::vector<Pose>& poses, Eigen::MatrixXd* h, Eigen::VectorXd* g) const {
    if (h != nullptr) {
      h->setZero(free_dim_, free_dim_);
      g->setZero(free_dim_);
    }
    double cost = 0.0;
    std::vector<const Pose*> args;
    std::vector<double*> jac_ptrs;
    Eigen::VectorXd r;
    std::vector<RowJacobian> jacs;
    for (std::size_t b = 0; b < problem_.num_blocks(); ++b) {
      const ResidualBlock& block = problem_.block(b);
      const auto& params = block.parameters();
      const int dim = block.dimension();
      args.clear();
      for (int p : params) args.push_back(&poses[static_cast<std::size_t>(p)]);
      r.resize(dim);
      jac_ptrs.assign(params.size(), nullptr);
      if (h != nullptr) {
        jacs.resize(params.size());
        for (std::size_t k = 0; k < params.size(); ++k) {
          if (offset_[static_cast<std::size_t>(params[k])] < 0) continue;
          jacs[k].resize(dim, kPoseDof);
          jac_ptrs[k] = jacs[k].data();
        }
      }
      block.evaluate(args, r.data(), h != nullptr ? std::span<double* const>(jac_ptrs) : std::span<double* const>());
      const RobustLoss& loss = problem_.block_loss(b).value_or(default_loss_);
      const auto [rho, w] = apply_loss(loss, r.squaredNorm());
      cost += rho;
      if (h == nullptr) continue;
      r *= w;
      for (std::size_t a = 0; a < params.size(); ++a) {
        const int oa = offset_[static_cast<std::size_t>(params[a])];
        if (oa < 0) continue;
        jacs[a] *= w;
        g->segment<kPoseDof>(oa) += jacs[a].transpose() * r;
        for (std::size_t c = 0; c < params.size(); ++c) {
          const int oc = offset_[static_cast<std::size_t>(params[c])];
          if (oc < 0) continue;
          h->block<kPoseDof, kPoseDof>(oa, oc) += jacs[a].transpose() * jacs[c];
        }
      }
    }
    return cost;
  }

 private:
  const CalibrationProblem& problem_;
  RobustLoss default_loss_;
  std::vector<int> offset_;
  int free_dim_ = 0;
};

std::vector<Pose> step_poses(const std::vector<Pose>& poses, const Evaluator& ev, const Eigen::VectorXd& delta) {
  std::vector<Pose> out = poses;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const int o = ev.offset(i);
    if (o >= 0) out[i] = retract(poses[i], delta.segment<kPoseDof>(o));
  }
  return out;
}

double state_norm(const std::vector<Pose>& poses, const Evaluator& ev) {
  double s = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (ev.offset(i) < 0) continue;
    s += poses[i].rotation.log_unchecked().squaredNorm() + poses[i].translation.squaredNorm();
  }
  return std::sqrt(s);
}

}  // namespace

double CalibrationProblem::cost(const std::vector<Pose>& poses, const RobustLoss& default_loss) const {
  return Evaluator(*this, default_loss).evaluate(poses, nullptr, nullptr);
}

SolveResult solve_nlls(const CalibrationProblem& problem, const SolverOptions& options) {
  options.validate();
  const Evaluator ev(problem, options.loss);
  SolveResult out{problem.poses(), {}};
  SolveReport& rep = out.report;

  Eigen::MatrixXd h;
  Eigen::VectorXd g;
  double cost = ev.evaluate(out.poses, &h, &g);
  if (!std::isfinite(cost) || !h.allFinite() || !g.allFinite()) {
    throw Error(ErrorCode::kNumericalFailure, "non-finite cost or Jacobian at the initial state");
  }
  rep.initial_cost = cost;
  rep.cost_history.push_back(cost);

  if (ev.free_dim() == 0) {
    rep.converged = true;
    rep.final_cost = cost;
    rep.termination = Termination::kParameterTolerance;
    return out;
  }

  double lambda = options.initial_damping;
  while (true) {
    rep.gradient_norm = g.lpNorm<Eigen::Infinity>();
    if (rep.gradient_norm <= options.gradient_tolerance) {
      rep.converged = true;
      rep.termination = Termination::kGradientTolerance;
      break;
    }
    if (rep.iterations >= options.max_iterations) {
      rep.termination = Termination::kMaxIterations;
      break;
    }
    ++rep.iterations;

    Eigen::MatrixXd damped = h;
    damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
    const Eigen::VectorXd delta = -ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
      lambda *= options.damping_up;
      continue;
    }
    if (delta.norm() <= options.parameter_tolerance * (state_norm(out.poses, ev) + options.parameter_tolerance)) {
      rep.converged = true;
      rep.termination = Termination::kParameterTolerance;
      break;
    }

    const std::vector<Pose> trial = step_poses(out.poses, ev, delta);
    const double trial_cost = ev.evaluate(trial, nullptr, nullptr);
    if (std::isfinite(trial_cost) && trial_cost < cost) {
      Eigen::MatrixXd h2;
      Eigen::VectorXd g2;
      const double relinearized = ev.evaluate(trial, &h2, &g2);
      if (!h2.allFinite() || !g2.allFinite() || !std::isfinite(relinearized)) {
        throw Error(ErrorCode::kNumericalFailure, "non-finite Jacobian at an accepted state");
      }
      out.poses = trial;
      cost = relinearized;
      h = std::move(h2);
      g = std::move(g2);
      rep.cost_history.push_back(cost);
      lambda = std::max(lambda * options.damping_down, 1e-300);
    } else {
      lambda *= options.damping_up;
      if (lambda > 1e32) {
        rep.converged = true;
        rep.termination = Termination::kDampingSaturated;
        break;
      }
    }
  }
  rep.final_cost = cost;
  return out;
}

Mat6 information_matrix(const CalibrationProblem& problem, const std::vector<Pose>& poses, int index) {
  Mat6 info = Mat6::Zero();
  std::vector<const Pose*> args;
  std::vector<double*> ptrs;
  std::vector<RowJacobian> jacs;
  Eigen::VectorXd r;
  for (std::size_t b = 0; b < problem.num_blocks(); ++b) {
    const ResidualBlock& block = problem.block(b);
    const auto& params = block.parameters();
    args.clear();
    for (int p : params) args.push_back(&poses.at(static_cast<std::size_t>(p)));
    r.resize(block.dimension());
    jacs.assign(params.size(), RowJacobian::Zero(block.dimension(), kPoseDof));
    ptrs.assign(params.size(), nullptr);
    bool touches = false;
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (params[k] == index) {
        ptrs[k] = jacs[k].data();
        touches = true;
      }
    }
    if (!touches) continue;
    block.evaluate(args, r.data(), ptrs);
    RowJacobian j = RowJacobian::Zero(block.dimension(), kPoseDof);
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (params[k] == index) j += jacs[k];
    }
    info += j.transpose() * j;
  }
  return info;
}

JacobianCheck check_jacobians(const CalibrationProblem& problem, const std::vector<Pose>& poses, double h) {
  JacobianCheck out;
  std::vector<const Pose*> args;
  for (std::size_t b = 0; b < problem.num_blocks(); ++b) {
    const ResidualBlock& block = problem.block(b);
    const auto& params = block.parameters();
    const int dim = block.dimension();
    std::vector<RowJacobian> analytic(params.size(), RowJacobian::Zero(dim, kPoseDof));
    std::vector<double*> ptrs;
    for (auto& j : analytic) ptrs.push_back(j.data());
    Eigen::VectorXd r(dim);
    std::vector<Pose> local(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) local[k] = poses.at(static_cast<std::size_t>(params[k]));
    auto eval = [&](const std::vector<Pose>& state, double* res, std::span<double* const> jac) {
      args.clear();
      for (const Pose& p : state) args.push_back(&p);
      block.evaluate(args, res, jac);
    };
    eval(local, r.data(), ptrs);

    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      RowJacobian numeric(dim, kPoseDof);
      Eigen::VectorXd rp(dim);
      Eigen::VectorXd rm(dim);
      for (int c = 0; c < kPoseDof; ++c) {
        std::vector<Pose> plus = local;
        std::vector<Pose> minus = local;
        plus[k] = retract(local[k], h * Vec6::Unit(c));
        minus[k] = retract(local[k], -h * Vec6::Unit(c));
        eval(plus, rp.data(), {});
        eval(minus, rm.data(), {});
        numeric.col(c) = (rp - rm) / (2.0 * h);
      }
      const double scale = std::max({numeric.norm(), analytic[k].norm(), 1e-8});
      worst = std::max(worst, (analytic[k] - numeric).norm() / scale);
    }
    out.block_error.push_back(worst);
    out.max_error = std::max(out.max_error, worst);
  }
  return out;
}

}  // namespace extrinsiq
