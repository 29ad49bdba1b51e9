#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "gpc/episode.hpp"
#include "gpc/ocp.hpp"

namespace gpc {

struct MpcConfig {
  RobotParams plant;
  CostWeights weights;
  TorqueBounds bounds;
  SolverOptions solver;
};

struct SimulationOptions {
  double dt = 0.01;              // simulator step [s]
  double control_period = 0.05;  // controller update period [s], a multiple of dt
  // Start moving along the reference at its speed instead of at rest.
  bool start_moving = false;
  // Actuator disturbance: zero-mean Gaussian torque per wheel, redrawn at
  // every control instant and added to the commanded torques. The sequence
  // depends only on disturbance_seed and the environment id, so every
  // controller sees the same one on a given environment.
  double disturbance_std = 0.0;  // [N m]
  std::uint64_t disturbance_seed = 0;

  int holdSteps() const;
  void validate() const;
};

/// Stage cost J_x + J_c of the state at time t against the reference head
/// and the obstacle's actual position. Shared by MPC logging and the GPC
/// running cost.
double stageCost(const State& s, const Environment& env, double t, const CostWeights& w);

/// Robot on the reference at t = 0, facing along it. At rest, or moving
/// with the reference's speed and turn rate when `moving` is set.
State initialState(const Environment& env, const RobotParams& plant = {}, bool moving = false);

/// Disturbance torques for each control step of an episode.
std::vector<Torques> disturbanceSequence(const SimulationOptions& sim, int env_id, int count);

struct MpcStepOutput {
  Torques applied;
  ControlSequence predicted;
  Eigen::MatrixXd hessian;
  double stage_cost = 0.0;
  double solve_time = 0.0;  // [s]
  SolveReport report;
};

struct WarmStart {
  ControlSequence controls;
  Eigen::MatrixXd hessian;
};

/// One receding-horizon solve at time t. The reference window covers
/// t + dt .. t + N dt; the obstacle is predicted from its state at t.
MpcStepOutput mpcStep(const State& s, const Environment& env, double t, const MpcConfig& cfg,
                      const std::optional<WarmStart>& warm_start);

/// Warm start for the following control instant.
WarmStart nextWarmStart(const MpcStepOutput& out);

/// Drops the first column and repeats the last one.
ControlSequence shiftWarmStart(const ControlSequence& u);

/// What a controller decided at a control instant.
struct ControlDecision {
  Torques torques;
  double compute_time = 0.0;
  Quality quality = Quality::Ok;
  ControllerKind controller = ControllerKind::Mpc;
  int iterations = 0;
  std::optional<Torques> shadow;
  std::optional<double> variance;
};

/// Called at every control instant with (state, time, control step index).
using ControlPolicy = std::function<ControlDecision(const State&, double, int)>;

/// Closed-loop simulation at options.dt with zero-order hold between control
/// instants. A plant error aborts the episode and is recorded in the footer.
EpisodeLog simulateEpisode(const Environment& env, double duration, const SimulationOptions& sim,
                           const MpcConfig& cfg, EpisodeHeader header, const ControlPolicy& policy);

EpisodeLog runMpcEpisode(const Environment& env, double duration, const MpcConfig& cfg,
                         const SimulationOptions& sim);

}  // namespace gpc
