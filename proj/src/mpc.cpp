#include "gpc/mpc.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "gpc/errors.hpp"

namespace gpc {

int SimulationOptions::holdSteps() const {
  return std::max(1, static_cast<int>(std::lround(control_period / dt)));
}

void SimulationOptions::validate() const {
  if (!(dt > 0.0) || !(control_period >= dt)) {
    throw ConfigError("simulation needs dt > 0 and control_period >= dt");
  }
  if (!(disturbance_std >= 0.0)) throw ConfigError("disturbance_std must be >= 0");
  if (std::abs(holdSteps() * dt - control_period) > 1e-9) {
    throw ConfigError("control_period must be a multiple of the simulator dt");
  }
}

double stageCost(const State& s, const Environment& env, double t, const CostWeights& w) {
  const CurvePoint ref = samplePath(env.reference, t);
  const StateVector xr = (StateVector() << ref.x, ref.y, ref.heading, 0.0, 0.0).finished();
  const ObstacleState obstacle = obstacleAt(env, t);
  const CollisionWeights& cw = w.collisionFor(0);
  const ObstacleTerm term{obstacle.position, cw.scale, cw.steepness, obstacle.threshold};
  return trackingCost(s.q, xr, w.state_weights) +
         collisionCost(s.q.head<2>(), std::span<const ObstacleTerm>(&term, 1));
}

State initialState(const Environment& env, const RobotParams& plant, bool moving) {
  const CurvePoint p = samplePath(env.reference, 0.0);
  State s;
  s.q << p.x, p.y, p.heading, 0.0, 0.0;
  if (!moving) return s;
  const double speed = pathVelocity(env.reference, 0.0).norm();
  if (speed < 1e-9) return s;
  // Central difference of the heading; headings are wrapped so take the
  // shortest angle.
  constexpr double h = 1e-5;
  const double dh = std::remainder(samplePath(env.reference, h).heading -
                                       samplePath(env.reference, -h).heading,
                                   2.0 * std::numbers::pi);
  s.qdot = velocityFromBodyRates(p.heading, speed, dh / (2.0 * h), plant);
  return s;
}

std::vector<Torques> disturbanceSequence(const SimulationOptions& sim, int env_id, int count) {
  std::vector<Torques> out(static_cast<std::size_t>(std::max(count, 0)));
  if (sim.disturbance_std <= 0.0) return out;
  std::seed_seq seq{static_cast<std::uint32_t>(sim.disturbance_seed),
                    static_cast<std::uint32_t>(sim.disturbance_seed >> 32),
                    static_cast<std::uint32_t>(env_id)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, sim.disturbance_std);
  for (Torques& w : out) {
    w.right = normal(rng);
    w.left = normal(rng);
  }
  return out;
}

MpcStepOutput mpcStep(const State& s, const Environment& env, double t, const MpcConfig& cfg,
                      const std::optional<WarmStart>& warm_start) {
  const auto start = std::chrono::steady_clock::now();
  const CostWeights& w = cfg.weights;
  const ReferenceWindow refs = referenceWindow(env.reference, t + w.dt, w.horizon, w.dt);
  const ObstacleState obstacle = obstacleAt(env, t);

  ControlSequence u_init = ControlSequence::Zero(2, w.horizon);
  const Eigen::MatrixXd* hessian = nullptr;
  if (warm_start && warm_start->controls.cols() == w.horizon) {
    u_init = warm_start->controls.cwiseMax(cfg.bounds.lower).cwiseMin(cfg.bounds.upper);
    if (warm_start->hessian.rows() == 2 * w.horizon) hessian = &warm_start->hessian;
  }
  OcpSolution solution = solveOcp(s, refs, std::span<const ObstacleState>(&obstacle, 1), w, u_init,
                                  cfg.bounds, cfg.solver, cfg.plant, hessian);

  MpcStepOutput out;
  out.applied = Torques{solution.controls(0, 0), solution.controls(1, 0)};
  out.predicted = std::move(solution.controls);
  out.hessian = std::move(solution.hessian);
  out.report = solution.report;
  out.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.stage_cost = stageCost(s, env, t, w);
  return out;
}

WarmStart nextWarmStart(const MpcStepOutput& out) {
  return {shiftWarmStart(out.predicted), shiftHessian(out.hessian)};
}

ControlSequence shiftWarmStart(const ControlSequence& u) {
  ControlSequence shifted(2, u.cols());
  if (u.cols() == 0) return shifted;
  shifted.leftCols(u.cols() - 1) = u.rightCols(u.cols() - 1);
  shifted.col(u.cols() - 1) = u.col(u.cols() - 1);
  return shifted;
}

EpisodeLog simulateEpisode(const Environment& env, double duration, const SimulationOptions& sim,
                           const MpcConfig& cfg, EpisodeHeader header, const ControlPolicy& policy) {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("episode duration must be positive");
  }
  sim.validate();
  header.environment = env;
  header.horizon = cfg.weights.horizon;
  header.control_dt = cfg.weights.dt;
  header.sim_dt = sim.dt;

  EpisodeLog log;
  log.header = std::move(header);
  const int steps = static_cast<int>(std::lround(duration / sim.dt));
  const int hold = sim.holdSteps();
  log.records.reserve(steps);

  State state = initialState(env, cfg.plant, sim.start_moving);
  const std::vector<Torques> disturbance =
      disturbanceSequence(sim, env.id, (steps + hold - 1) / hold);
  ControlDecision decision;
  for (int k = 0; k < steps; ++k) {
    const double t = k * sim.dt;
    const bool fresh = k % hold == 0;
    try {
      if (fresh) decision = policy(state, t, k / hold);

      SampleRecord r;
      r.t = t;
      r.q = state.q;
      r.qdot = state.qdot;
      const ObstacleState obstacle = obstacleAt(env, t);
      r.obstacle_position = obstacle.position;
      r.obstacle_velocity = obstacle.velocity;
      r.obstacle_threshold = obstacle.threshold;
      const CurvePoint head = samplePath(env.reference, t);
      r.reference_head = Eigen::Vector3d(head.x, head.y, head.heading);
      r.window_digest = windowDigest(
          referenceWindow(env.reference, t + cfg.weights.dt, cfg.weights.horizon, cfg.weights.dt));
      r.control = decision.torques;
      r.disturbance = disturbance[k / hold];
      r.stage_cost = stageCost(state, env, t, cfg.weights);
      r.solve_time = fresh ? decision.compute_time : 0.0;
      r.quality = decision.quality;
      r.fresh = fresh;
      r.controller = decision.controller;
      r.solver_iterations = fresh ? decision.iterations : 0;
      r.shadow_control = decision.shadow;
      r.gp_variance = decision.variance;
      log.records.push_back(std::move(r));

      const Torques& w = disturbance[k / hold];
      state = stepRk4(state, Torques{decision.torques.right + w.right, decision.torques.left + w.left},
                      sim.dt, cfg.plant);
      if (!state.q.allFinite() || !state.qdot.allFinite()) {
        throw Error("plant state became non-finite");
      }
    } catch (const Error& e) {
      log.footer.aborted = true;
      log.footer.reason = e.what();
      break;
    }
  }
  return log;
}

EpisodeLog runMpcEpisode(const Environment& env, double duration, const MpcConfig& cfg,
                         const SimulationOptions& sim) {
  std::optional<WarmStart> warm;
  ControlPolicy policy = [&](const State& s, double t, int) {
    const MpcStepOutput out = mpcStep(s, env, t, cfg, warm);
    warm = nextWarmStart(out);
    ControlDecision d;
    d.torques = out.applied;
    d.compute_time = out.solve_time;
    d.quality = out.report.converged ? Quality::Ok : Quality::NotConverged;
    d.controller = ControllerKind::Mpc;
    d.iterations = out.report.iterations;
    return d;
  };
  EpisodeHeader header;
  header.kind = EpisodeKind::Mpc;
  header.episode_id = "mpc-" + std::to_string(env.id);
  return simulateEpisode(env, duration, sim, cfg, std::move(header), policy);
}

}  // namespace gpc
