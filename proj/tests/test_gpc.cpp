#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gpc/errors.hpp"
#include "gpc/gpc.hpp"

using namespace gpc;

namespace {

constexpr double kPi = std::numbers::pi;

// A model that predicts (right, left) torques everywhere: one training
// point and a length scale far beyond any feature range.
GpModel constantModel(double right, double left) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, kFeatureDimension);
  Eigen::MatrixXd y(1, 2);
  y << right, left;
  GpFitOptions raw;
  raw.standardize = false;
  return GpModel::fit(x, y, RbfHyperparams::isotropic(kFeatureDimension, 1e6, 1e-9), raw);
}

Environment testEnvironment() {
  Environment env;
  env.id = 4;
  CurveSpec ellipse;
  ellipse.family = CurveFamily::Ellipse;
  ellipse.a = 4.0;
  ellipse.b = 1.0;
  ellipse.speed = 0.4;
  env.reference = ellipse;
  env.obstacle = LinearMotion{Eigen::Vector2d(20.0, 20.0), Eigen::Vector2d::Zero(), 0.0};
  return env;
}

ReferenceWindow window(std::initializer_list<std::array<double, 3>> points) {
  ReferenceWindow w;
  double t = 0.0;
  for (const auto& p : points) {
    w.times.push_back(t);
    t += 0.05;
    w.states.push_back((Vector5<double>() << p[0], p[1], p[2], 0.0, 0.0).finished());
  }
  return w;
}

Eigen::Vector2d rotate(const Eigen::Vector2d& v, double angle) {
  return Eigen::Rotation2Dd(angle) * v;
}

}  // namespace

TEST(Gpc, WrapAngleExamples) {
  EXPECT_NEAR(wrapAngle(3.0 * kPi / 2.0), -kPi / 2.0, 1e-15);
  EXPECT_NEAR(wrapAngle(-3.0 * kPi / 2.0), kPi / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(wrapAngle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrapAngle(-kPi), kPi);
  EXPECT_NEAR(wrapAngle(7.0 * kPi + 0.1), -kPi + 0.1, 1e-12);
  EXPECT_EQ(wrapAngle(0.25), 0.25);
}

TEST(Gpc, FeatureExamples) {
  // Robot at the origin facing +y, reference head one meter ahead of it.
  State s;
  s.q << 0.0, 0.0, kPi / 2.0, 0.0, 0.0;
  s.qdot = velocityFromBodyRates(kPi / 2.0, 0.5, 0.1, RobotParams{});
  ObstacleState o;
  o.position = Eigen::Vector2d(1.0, 1.0);
  o.velocity = Eigen::Vector2d(0.0, -0.5);
  const ReferenceWindow refs = window({{0.0, 1.0, 0.0}, {1.0, 1.0, 0.0}, {2.0, 1.5, 0.0}});
  const FeatureVector f = buildFeatures(s, o, refs);
  EXPECT_NEAR(f(kErrorForward), 1.0, 1e-15);
  EXPECT_NEAR(f(kErrorLateral), 0.0, 1e-15);
  EXPECT_NEAR(f(kHeadingError), kPi / 2.0, 1e-15);
  EXPECT_NEAR(f(kForwardSpeed), 0.5, 1e-15);
  EXPECT_NEAR(f(kLateralSpeed), 0.0, 1e-15);
  EXPECT_NEAR(f(kYawRate), 0.1, 1e-15);
  // Obstacle within the proximity radius: ahead one meter, one to the right.
  EXPECT_NEAR(f(kObstacleForward), 1.0, 1e-15);
  EXPECT_NEAR(f(kObstacleLateral), -1.0, 1e-15);
  EXPECT_NEAR(f(kObstacleVelForward), -1.0, 1e-15);
  EXPECT_NEAR(f(kObstacleVelLateral), 0.0, 1e-15);
  EXPECT_NEAR(f(kRefMidAlong), 1.0, 1e-15);
  EXPECT_NEAR(f(kRefEndLateral), 0.5, 1e-15);
}

TEST(Gpc, ProximityWeightDecaysBeyondRadius) {
  const FeatureOptions o;
  EXPECT_EQ(proximityWeight(0.0, o), 1.0);
  EXPECT_EQ(proximityWeight(o.proximity_radius, o), 1.0);
  EXPECT_NEAR(proximityWeight(o.proximity_radius + o.proximity_falloff, o), std::exp(-1.0), 1e-15);
  double last = 1.0;
  for (double d = o.proximity_radius; d < 10.0; d += 0.1) {
    const double w = proximityWeight(d, o);
    EXPECT_LE(w, last);
    last = w;
  }
  EXPECT_LT(proximityWeight(20.0, o), 1e-100);
}

TEST(Gpc, FeaturesAreInvariantToRigidMotion) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    State s;
    s.q << u(rng), u(rng), 3.0 * u(rng), u(rng), u(rng);
    s.qdot = velocityFromBodyRates(s.q(2), u(rng), u(rng), RobotParams{});
    ObstacleState o;
    o.position = s.q.head<2>() + Eigen::Vector2d(u(rng), u(rng));
    o.velocity = Eigen::Vector2d(u(rng), u(rng));
    ReferenceWindow refs;
    for (int k = 0; k < 16; ++k) {
      refs.times.push_back(0.05 * k);
      refs.states.push_back(
          (Vector5<double>() << 0.1 * k + u(rng), 0.05 * k * k * 0.01, 3.0 * u(rng), 0, 0)
              .finished());
    }
    const double angle = trial == 0 ? kPi / 2.0 : 3.0 * u(rng);
    const Eigen::Vector2d shift(5.0 * u(rng), 5.0 * u(rng));

    State s2 = s;
    s2.q.head<2>() = rotate(s.q.head<2>(), angle) + shift;
    s2.q(2) = s.q(2) + angle;
    s2.qdot.head<2>() = rotate(s.qdot.head<2>(), angle);
    ObstacleState o2 = o;
    o2.position = rotate(o.position, angle) + shift;
    o2.velocity = rotate(o.velocity, angle);
    ReferenceWindow refs2 = refs;
    for (auto& r : refs2.states) {
      r.head<2>() = rotate(r.head<2>(), angle) + shift;
      r(2) += angle;
    }
    const FeatureVector a = buildFeatures(s, o, refs);
    const FeatureVector b = buildFeatures(s2, o2, refs2);
    for (int i = 0; i < kFeatureDimension; ++i) {
      if (i == kHeadingError) {
        EXPECT_NEAR(wrapAngle(a(i) - b(i)), 0.0, 1e-12);
      } else {
        EXPECT_NEAR(a(i), b(i), 1e-12) << "feature " << i;
      }
    }
  }
}

TEST(Gpc, FeatureWindowNeedsTwoPoints) {
  const ReferenceWindow one = window({{0.0, 0.0, 0.0}});
  EXPECT_THROW(buildFeatures(State{}, ObstacleState{}, one), DimensionMismatch);
  CostWeights w;
  EXPECT_EQ(featureWindow(LinearMotion{}, 0.0, w).size(), static_cast<std::size_t>(w.horizon + 1));
}

TEST(Gpc, ConstantModelYieldsConstantTorques) {
  const GpModel m = constantModel(0.3, -0.2);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int q = 0; q < 20; ++q) {
    FeatureVector f;
    for (int i = 0; i < kFeatureDimension; ++i) f(i) = u(rng);
    const GpcOutput out = gpcStep(m, f, TorqueBounds{});
    EXPECT_NEAR(out.torques.right, 0.3, 1e-6);
    EXPECT_NEAR(out.torques.left, -0.2, 1e-6);
    EXPECT_LE(out.variance, 1e-6);
  }
}

TEST(Gpc, FarQueryGivesZeroTorqueAndUnitVariance) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, kFeatureDimension);
  Eigen::MatrixXd y(1, 2);
  y << 1.0, 1.0;
  const GpModel m = GpModel::fit(x, y, RbfHyperparams::isotropic(kFeatureDimension, 1.0, 1e-4));
  const GpcOutput out = gpcStep(m, FeatureVector::Constant(1e4), TorqueBounds{});
  EXPECT_EQ(out.torques.right, 0.0);
  EXPECT_EQ(out.torques.left, 0.0);
  EXPECT_EQ(out.variance, 1.0);
}

TEST(Gpc, OutputIsClampedButMeanIsNot) {
  const GpModel m = constantModel(9.0, -9.0);
  const GpcOutput out = gpcStep(m, FeatureVector::Zero(), TorqueBounds{-5.0, 5.0});
  EXPECT_EQ(out.torques.right, 5.0);
  EXPECT_EQ(out.torques.left, -5.0);
  EXPECT_NEAR(out.mean(0), 9.0, 1e-6);
  EXPECT_NEAR(out.mean(1), -9.0, 1e-6);
}

TEST(Gpc, ControllerRejectsWrongModelShape) {
  const GpModel small = GpModel::fit(Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd::Zero(1, 2),
                                     RbfHyperparams::isotropic(3));
  EXPECT_THROW(GpcController(small, TorqueBounds{}, CostWeights{}), DimensionMismatch);
  const GpModel one_output = GpModel::fit(Eigen::MatrixXd::Zero(1, kFeatureDimension),
                                          Eigen::MatrixXd::Zero(1, 1),
                                          RbfHyperparams::isotropic(kFeatureDimension));
  EXPECT_THROW(gpcStep(one_output, FeatureVector::Zero(), TorqueBounds{}), DimensionMismatch);
}

TEST(Gpc, SwitchDecisionExamples) {
  EXPECT_FALSE(switchDecision(90.0, SwitchStats{100.0, 20.0, 0.5}));  // boundary is strict
  EXPECT_TRUE(switchDecision(85.0, SwitchStats{100.0, 20.0, 0.5}));
  EXPECT_TRUE(switchDecision(99.0, SwitchStats{100.0, 20.0, 0.0}));
  EXPECT_FALSE(switchDecision(100.0, SwitchStats{100.0, 20.0, 0.0}));
}

TEST(Gpc, SwitchDecisionIsMonotoneInCost) {
  const SwitchStats stats{3.0, 2.0, 0.5};
  bool seen_false = false;
  for (double c = -5.0; c < 10.0; c += 0.01) {
    const bool d = switchDecision(c, stats);
    if (!d) seen_false = true;
    if (seen_false) {
      EXPECT_FALSE(d) << c;
    }
  }
}

TEST(Gpc, SwitchWindowCountsConsecutiveSteps) {
  SwitchWindow w(3);
  EXPECT_FALSE(w.update(true));
  EXPECT_FALSE(w.update(true));
  EXPECT_FALSE(w.update(false));
  EXPECT_EQ(w.streak(), 0);
  EXPECT_FALSE(w.update(true));
  EXPECT_FALSE(w.update(true));
  EXPECT_TRUE(w.update(true));
  EXPECT_TRUE(w.update(true));
  w.reset();
  EXPECT_EQ(w.streak(), 0);
  EXPECT_THROW(SwitchWindow(0), ConfigError);
}

TEST(Gpc, RunningCostExample) {
  Environment env;
  env.reference = LinearMotion{};
  env.obstacle = LinearMotion{Eigen::Vector2d(1e3, 1e3), Eigen::Vector2d::Zero(), 0.0};
  CostWeights w;
  w.state_weights = (StateVector() << 1.0, 1.0, 0.0, 0.0, 0.0).finished();
  State s;
  s.q << 1.0, -1.0, 0.7, 0.0, 0.0;
  EXPECT_DOUBLE_EQ(runningCost(s, env, 0.0, w), 2.0);
}

TEST(Gpc, RunningCostIsNonNegative) {
  const Environment env = testEnvironment();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    State s;
    s.q << u(rng), u(rng), u(rng), u(rng), u(rng);
    EXPECT_GE(runningCost(s, env, std::abs(u(rng)), CostWeights{}), 0.0);
  }
}

TEST(Gpc, SupervisorThatNeverSwitchesMatchesMpc) {
  const Environment env = testEnvironment();
  const MpcConfig cfg;
  SimulationOptions sim;
  sim.start_moving = true;
  const GpcController gpc(constantModel(1.0, 1.0), cfg.bounds, cfg.weights);
  const SwitchStats never{-1e9, 1.0, 0.5};
  const EpisodeLog sup =
      runSupervisedEpisode(env, 2.0, cfg, sim, gpc, never, SupervisorOptions{});
  const EpisodeLog mpc = runMpcEpisode(env, 2.0, cfg, sim);
  EXPECT_FALSE(sup.footer.switched_at.has_value());
  ASSERT_EQ(sup.records.size(), mpc.records.size());
  for (std::size_t i = 0; i < sup.records.size(); ++i) {
    EXPECT_EQ(sup.records[i].q, mpc.records[i].q);
    EXPECT_EQ(sup.records[i].control.right, mpc.records[i].control.right);
    EXPECT_EQ(sup.records[i].controller, ControllerKind::Mpc);
    if (sup.records[i].fresh) {
      ASSERT_TRUE(sup.records[i].shadow_control.has_value());
      EXPECT_NEAR(sup.records[i].shadow_control->right, 1.0, 1e-6);
    }
  }
}

TEST(Gpc, SupervisorWithUnitWindowSwitchesAfterFirstStep) {
  const Environment env = testEnvironment();
  const MpcConfig cfg;
  const GpcController gpc(constantModel(0.1, 0.1), cfg.bounds, cfg.weights);
  const SwitchStats always{1e300, 0.0, 0.5};
  SupervisorOptions options;
  options.window = 1;
  const EpisodeLog log = runSupervisedEpisode(env, 1.0, cfg, SimulationOptions{}, gpc, always,
                                              options);
  ASSERT_TRUE(log.footer.switched_at.has_value());
  EXPECT_EQ(*log.footer.switched_at, 1);
  EXPECT_EQ(log.footer.reverts, 0);
  const int hold = SimulationOptions{}.holdSteps();
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto expected = i < static_cast<std::size_t>(hold) ? ControllerKind::Mpc
                                                             : ControllerKind::Gpc;
    EXPECT_EQ(log.records[i].controller, expected) << i;
  }
  EXPECT_NEAR(log.records.back().control.right, 0.1, 1e-6);
}

TEST(Gpc, VarianceGuardHandsBackToMpc) {
  const Environment env = testEnvironment();
  const MpcConfig cfg;
  // Trained on the zero feature only, so every real state is far away.
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, kFeatureDimension);
  const GpModel far = GpModel::fit(x, Eigen::MatrixXd::Zero(1, 2),
                                   RbfHyperparams::isotropic(kFeatureDimension, 1e-3, 1e-4));
  const GpcController gpc(far, cfg.bounds, cfg.weights);
  SupervisorOptions options;
  options.window = 1;
  const EpisodeLog log = runSupervisedEpisode(env, 1.0, cfg, SimulationOptions{}, gpc,
                                              SwitchStats{1e300, 0.0, 0.5}, options);
  EXPECT_GT(log.footer.reverts, 0);
  for (const auto& r : log.records) {
    if (r.controller == ControllerKind::Gpc) {
      ASSERT_TRUE(r.gp_variance.has_value());
      EXPECT_LE(*r.gp_variance, options.variance_threshold);
    }
  }
}

TEST(Gpc, PureGpcEpisodeLogsVariance) {
  const Environment env = testEnvironment();
  const MpcConfig cfg;
  const GpcController gpc(constantModel(0.0, 0.0), cfg.bounds, cfg.weights);
  const EpisodeLog log = runGpcEpisode(env, 0.5, cfg, SimulationOptions{}, gpc);
  ASSERT_EQ(log.records.size(), 50u);
  for (const auto& r : log.records) {
    EXPECT_EQ(r.controller, ControllerKind::Gpc);
    ASSERT_TRUE(r.gp_variance.has_value());
  }
}
