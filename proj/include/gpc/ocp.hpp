#pragma once

// Finite-horizon tracking/avoidance cost and its box-constrained
// quasi-Newton SQP minimizer.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

#include "gpc/dynamics.hpp"
#include "gpc/trajectory.hpp"

namespace gpc {

using StateVector = Eigen::Matrix<double, 5, 1>;

/// Sigmoid collision penalty parameters for one obstacle.
struct CollisionWeights {
  double scale = 20.0;     // Q_c
  double steepness = 8.0;  // k [1/m]
};

struct CostWeights {
  StateVector state_weights = (StateVector() << 10.0, 10.0, 0.0, 0.0, 0.0).finished();  // diag Q_x
  std::vector<CollisionWeights> collision = {CollisionWeights{}};  // one entry per obstacle
  int horizon = 15;    // N
  double dt = 0.05;    // [s]
  double delay = 0.02; // delta [s]

  void validate() const;
  /// Weights for obstacle j; the last entry is reused when fewer are given.
  const CollisionWeights& collisionFor(std::size_t j) const;
};

/// An obstacle at a given instant together with its penalty parameters.
struct ObstacleTerm {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double scale = 0.0;
  double steepness = 1.0;
  double threshold = 0.3;
};

/// Columns are steps; rows are (right, left) torques.
using ControlSequence = Eigen::Matrix<double, 2, Eigen::Dynamic>;

struct TorqueBounds {
  double lower = -5.0;
  double upper = 5.0;
};

double trackingCost(const StateVector& x, const StateVector& reference, const StateVector& weights);

double collisionCost(const Eigen::Vector2d& position, std::span<const ObstacleTerm> obstacles);

/// Sum over k = 1..N of tracking + collision cost of the propagated states
/// x_k = F(x_{k-1}, u_{k-1}); refs[k-1] and the obstacle predictions at
/// k * dt are paired with x_k.
double rolloutCost(const State& x0, const ControlSequence& u, const ReferenceWindow& refs,
                   std::span<const ObstacleState> obstacles, const CostWeights& w,
                   const RobotParams& plant);

struct SolverOptions {
  double gtol = 1e-6;
  double xtol = 1e-9;
  double ftol = 0.0;  // relative objective decrease; 0 disables
  int max_iterations = 100;
};

enum class SolveStatus { Converged, NotConverged };

struct SolveReport {
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  SolveStatus status = SolveStatus::NotConverged;
  double wall_time = 0.0;  // [s]
  double gradient_norm = 0.0;  // projected, infinity norm
  int cost_evaluations = 0;
};

struct OcpSolution {
  ControlSequence controls;
  SolveReport report;
  Eigen::MatrixXd hessian;  // final quasi-Newton curvature, usable as a warm start
};

/// Problem data for one receding-horizon solve.
class RolloutObjective {
 public:
  RolloutObjective(const State& x0, const ReferenceWindow& refs,
                   std::span<const ObstacleState> obstacles, const CostWeights& w,
                   const RobotParams& plant);

  int dimension() const { return 2 * horizon_; }
  double value(const Eigen::VectorXd& u) const;
  /// Central differences with step 1e-6 (1 + |u_i|). Only the part of the
  /// rollout after the perturbed step is re-simulated.
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const;

 private:
  double stageCost(int k, const State& x) const;

  State x0_;
  ReferenceWindow refs_;
  std::vector<std::vector<ObstacleTerm>> obstacle_terms_;  // per step
  StateVector state_weights_;
  double dt_;
  int horizon_;
  RobotParams plant_;
};

OcpSolution solveOcp(const State& x0, const ReferenceWindow& refs,
                     std::span<const ObstacleState> obstacles, const CostWeights& w,
                     const ControlSequence& u_init, const TorqueBounds& bounds,
                     const SolverOptions& options, const RobotParams& plant,
                     const Eigen::MatrixXd* warm_hessian = nullptr);

/// Curvature warm start for the next receding-horizon solve: the block of
/// the dropped first step is removed and the last step's block repeated.
Eigen::MatrixXd shiftHessian(const Eigen::MatrixXd& hessian);

struct BoxProblem {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct BoxSolution {
  Eigen::VectorXd x;
  SolveReport report;
  Eigen::MatrixXd hessian;
};

/// Minimizes f over lower <= x <= upper. Each iteration builds a quadratic
/// model with a damped-BFGS Hessian, solves the box-constrained subproblem
/// with an active-set method and backtracks along the resulting step.
/// Throws NonFiniteCost when f is NaN or infinite at an iterate.
/// `initial_hessian`, when given, must be symmetric positive definite.
BoxSolution minimizeBoxConstrained(const BoxProblem& problem, const Eigen::VectorXd& x0,
                                   const SolverOptions& options,
                                   const Eigen::MatrixXd* initial_hessian = nullptr);

/// Minimizes g^T p + 1/2 p^T H p over lower <= p <= upper for symmetric
/// positive definite H (primal active-set method).
Eigen::VectorXd solveBoxQp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// Gradient with components pinned at an active bound zeroed out.
Eigen::VectorXd projectedGradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                  const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

Eigen::VectorXd flatten(const ControlSequence& u);
ControlSequence unflatten(const Eigen::VectorXd& u);

}  // namespace gpc
