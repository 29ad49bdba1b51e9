#include "gpc/gpc.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace gpc {

namespace {

Eigen::Vector2d toFrame(double heading, const Eigen::Vector2d& v) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return {c * v.x() + s * v.y(), -s * v.x() + c * v.y()};
}

double secondsSince(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void FeatureOptions::validate() const {
  if (!(proximity_radius >= 0.0) || !(proximity_falloff > 0.0)) {
    throw ConfigError("feature proximity radius must be >= 0 and falloff > 0");
  }
}

double wrapAngle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(angle, two_pi);
  if (wrapped <= -std::numbers::pi) wrapped += two_pi;
  return wrapped;
}

double proximityWeight(double distance, const FeatureOptions& options) {
  if (distance <= options.proximity_radius) return 1.0;
  const double z = (distance - options.proximity_radius) / options.proximity_falloff;
  return std::exp(-z * z);
}

FeatureVector buildFeatures(const State& s, const ObstacleState& obstacle,
                            const ReferenceWindow& refs, const FeatureOptions& options) {
  if (refs.size() < 2) {
    throw DimensionMismatch("feature window needs at least two reference points");
  }
  const double theta = s.q(2);
  const Eigen::Vector2d position = s.q.head<2>();
  const Eigen::Vector2d velocity = s.qdot.head<2>();
  const auto& head = refs.states.front();

  FeatureVector f;
  f.segment<2>(kErrorForward) = toFrame(theta, head.head<2>() - position);
  f(kHeadingError) = wrapAngle(theta - head(2));
  f.segment<2>(kForwardSpeed) = toFrame(theta, velocity);
  f(kYawRate) = s.qdot(2);

  const Eigen::Vector2d offset = obstacle.position - position;
  const double weight = proximityWeight(offset.norm(), options);
  f.segment<2>(kObstacleForward) = weight * toFrame(theta, offset);
  f.segment<2>(kObstacleVelForward) = weight * toFrame(theta, obstacle.velocity - velocity);

  const auto& mid = refs.states[(refs.size() - 1) / 2];
  const auto& end = refs.states.back();
  f(kRefMidAlong) = toFrame(head(2), mid.head<2>() - head.head<2>()).x();
  f(kRefEndLateral) = toFrame(head(2), end.head<2>() - head.head<2>()).y();
  return f;
}

ReferenceWindow featureWindow(const Path& reference, double t, const CostWeights& w) {
  return referenceWindow(reference, t, w.horizon + 1, w.dt);
}

FeatureVector featuresAt(const State& s, const Environment& env, double t, const CostWeights& w,
                         const FeatureOptions& options) {
  return buildFeatures(s, obstacleAt(env, t), featureWindow(env.reference, t, w), options);
}

GpcOutput gpcStep(const GpModel& model, const FeatureVector& features, const TorqueBounds& bounds) {
  if (model.outputDimension() != 2) {
    throw DimensionMismatch("a torque model needs two outputs");
  }
  const GpPrediction p = model.predict(features);
  GpcOutput out;
  out.mean = p.mean;
  out.torques.right = std::clamp(p.mean(0), bounds.lower, bounds.upper);
  out.torques.left = std::clamp(p.mean(1), bounds.lower, bounds.upper);
  out.variance = p.variance;
  return out;
}

GpcController::GpcController(GpModel model, TorqueBounds bounds, CostWeights weights,
                             FeatureOptions features)
    : model_(std::move(model)),
      bounds_(bounds),
      weights_(std::move(weights)),
      features_(features) {
  if (model_.inputDimension() != kFeatureDimension || model_.outputDimension() != 2) {
    throw DimensionMismatch("controller model must map 12 features to 2 torques");
  }
  features_.validate();
}

GpcOutput GpcController::operator()(const State& s, const Environment& env, double t) const {
  return gpcStep(model_, featuresAt(s, env, t, weights_, features_), bounds_);
}

bool switchDecision(double cost, const SwitchStats& stats) { return cost < stats.threshold(); }

SwitchWindow::SwitchWindow(int window) : window_(window) {
  if (window < 1) throw ConfigError("switch window must be at least one step");
}

bool SwitchWindow::update(bool condition) {
  streak_ = condition ? streak_ + 1 : 0;
  return streak_ >= window_;
}

void SupervisorOptions::validate() const {
  if (window < 1) throw ConfigError("switch window must be at least one step");
  if (!(variance_threshold > 0.0)) throw ConfigError("variance threshold must be positive");
}

EpisodeLog runGpcEpisode(const Environment& env, double duration, const MpcConfig& cfg,
                         const SimulationOptions& sim, const GpcController& gpc) {
  ControlPolicy policy = [&](const State& s, double t, int) {
    const auto start = std::chrono::steady_clock::now();
    const GpcOutput out = gpc(s, env, t);
    ControlDecision d;
    d.compute_time = secondsSince(start);
    d.torques = out.torques;
    d.controller = ControllerKind::Gpc;
    d.variance = out.variance;
    return d;
  };
  EpisodeHeader header;
  header.kind = EpisodeKind::Gpc;
  header.episode_id = "gpc-" + std::to_string(env.id);
  return simulateEpisode(env, duration, sim, cfg, std::move(header), policy);
}

EpisodeLog runSupervisedEpisode(const Environment& env, double duration, const MpcConfig& cfg,
                                const SimulationOptions& sim, const GpcController& gpc,
                                const SwitchStats& stats, const SupervisorOptions& options) {
  options.validate();
  std::optional<WarmStart> warm;
  SwitchWindow window(options.window);
  bool gpc_active = false;
  std::optional<int> switched_at;
  int reverts = 0;

  ControlPolicy policy = [&](const State& s, double t, int step) {
    const auto start = std::chrono::steady_clock::now();
    const GpcOutput shadow = gpc(s, env, t);
    const double gpc_time = secondsSince(start);

    if (gpc_active && shadow.variance > options.variance_threshold) {
      gpc_active = false;
      window.reset();
      warm.reset();
      ++reverts;
    }
    ControlDecision d;
    d.variance = shadow.variance;
    if (gpc_active) {
      d.torques = shadow.torques;
      d.compute_time = gpc_time;
      d.controller = ControllerKind::Gpc;
      return d;
    }

    const MpcStepOutput out = mpcStep(s, env, t, cfg, warm);
    warm = nextWarmStart(out);
    d.torques = out.applied;
    d.compute_time = out.solve_time;
    d.quality = out.report.converged ? Quality::Ok : Quality::NotConverged;
    d.controller = ControllerKind::Mpc;
    d.iterations = out.report.iterations;
    d.shadow = shadow.torques;

    if (window.update(switchDecision(runningCost(s, env, t, cfg.weights), stats))) {
      gpc_active = true;
      if (!switched_at) switched_at = step + 1;
    }
    return d;
  };

  EpisodeHeader header;
  header.kind = EpisodeKind::Supervised;
  header.episode_id = "supervised-" + std::to_string(env.id);
  EpisodeLog log = simulateEpisode(env, duration, sim, cfg, std::move(header), policy);
  log.footer.switched_at = switched_at;
  log.footer.reverts = reverts;
  return log;
}

}  // namespace gpc
