#pragma once

// Learned controller: a GP maps a rigid-motion invariant encoding of
// (robot state, obstacle state, reference window) to wheel torques.

#include <Eigen/Dense>

#include "gpc/gp.hpp"
#include "gpc/mpc.hpp"

namespace gpc {

inline constexpr int kFeatureDimension = 12;
using FeatureVector = Eigen::Matrix<double, kFeatureDimension, 1>;

/// Feature layout. Positions and velocities are expressed in the robot frame;
/// the reference offsets are expressed in the frame of the reference head.
enum FeatureIndex : int {
  kErrorForward = 0,   // reference head minus robot, robot frame
  kErrorLateral = 1,
  kHeadingError = 2,   // wrap(theta - theta_r)
  kForwardSpeed = 3,
  kLateralSpeed = 4,
  kYawRate = 5,
  kObstacleForward = 6,  // weighted obstacle position relative to the robot
  kObstacleLateral = 7,
  kObstacleVelForward = 8,  // weighted obstacle velocity relative to the robot
  kObstacleVelLateral = 9,
  kRefMidAlong = 10,   // along-track offset of the mid-window reference point
  kRefEndLateral = 11, // lateral offset of the last reference point
};

struct FeatureOptions {
  // Obstacle terms are scaled by 1 inside this radius and decay as a
  // Gaussian of width `proximity_falloff` beyond it, so far obstacles all
  // look alike to the regressor.
  double proximity_radius = 1.5;   // [m]
  double proximity_falloff = 0.5;  // [m]

  void validate() const;
};

/// Angle wrapped into (-pi, pi].
double wrapAngle(double angle);

double proximityWeight(double distance, const FeatureOptions& options);

/// Needs at least two reference points; the first is the head at the
/// current time.
FeatureVector buildFeatures(const State& s, const ObstacleState& obstacle,
                            const ReferenceWindow& refs, const FeatureOptions& options = {});

/// The N + 1 reference points t, t + dt, ..., t + N dt used for features.
ReferenceWindow featureWindow(const Path& reference, double t, const CostWeights& w);

FeatureVector featuresAt(const State& s, const Environment& env, double t, const CostWeights& w,
                         const FeatureOptions& options = {});

struct GpcOutput {
  Torques torques;        // clamped to the torque bounds
  Eigen::Vector2d mean;   // raw posterior mean (right, left)
  double variance = 0.0;
};

GpcOutput gpcStep(const GpModel& model, const FeatureVector& features, const TorqueBounds& bounds);

class GpcController {
 public:
  GpcController(GpModel model, TorqueBounds bounds, CostWeights weights,
                FeatureOptions features = {});

  GpcOutput operator()(const State& s, const Environment& env, double t) const;

  const GpModel& model() const { return model_; }
  const TorqueBounds& bounds() const { return bounds_; }
  const FeatureOptions& featureOptions() const { return features_; }

 private:
  GpModel model_;
  TorqueBounds bounds_;
  CostWeights weights_;
  FeatureOptions features_;
};

/// C_g: the stage cost of the current state, shared with the MPC logger.
inline double runningCost(const State& s, const Environment& env, double t, const CostWeights& w) {
  return stageCost(s, env, t, w);
}

struct SwitchStats {
  double mean = 0.0;    // mu_m
  double stddev = 0.0;  // sigma_m
  double alpha = 0.5;

  double threshold() const { return mean - alpha * stddev; }
};

/// True iff cost < mean - alpha * stddev.
bool switchDecision(double cost, const SwitchStats& stats);

/// Counts consecutive satisfied decisions; fires once `window` is reached.
class SwitchWindow {
 public:
  explicit SwitchWindow(int window);

  bool update(bool condition);
  void reset() { streak_ = 0; }
  int streak() const { return streak_; }

 private:
  int window_;
  int streak_ = 0;
};

struct SupervisorOptions {
  int window = 10;                  // consecutive control steps
  double variance_threshold = 0.5;  // GP variance that hands control back to MPC

  void validate() const;
};

/// Closed loop driven by the GPC alone.
EpisodeLog runGpcEpisode(const Environment& env, double duration, const MpcConfig& cfg,
                         const SimulationOptions& sim, const GpcController& gpc);

/// Starts under MPC with the GPC evaluated in shadow mode. Control passes to
/// the GPC from the control step after the switching criterion held for
/// `window` consecutive control steps, and returns to MPC whenever the GP
/// variance exceeds the guard threshold.
EpisodeLog runSupervisedEpisode(const Environment& env, double duration, const MpcConfig& cfg,
                                const SimulationOptions& sim, const GpcController& gpc,
                                const SwitchStats& stats, const SupervisorOptions& options);

}  // namespace gpc
