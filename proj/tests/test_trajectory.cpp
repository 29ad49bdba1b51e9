#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "gpc/errors.hpp"
#include "gpc/trajectory.hpp"

using namespace gpc;

namespace {

constexpr double kPi = std::numbers::pi;

CurveSpec makeCurve(CurveFamily family) {
  CurveSpec s;
  s.family = family;
  s.name = toString(family);
  return s;
}

}  // namespace

TEST(Trajectory, UnitCircleStartsAtPlusXHeadingUp) {
  const CurvePoint p = sampleCurve(makeCurve(CurveFamily::Ellipse), 0.0);
  EXPECT_NEAR(p.x, 1.0, 1e-12);
  EXPECT_NEAR(p.y, 0.0, 1e-12);
  EXPECT_NEAR(p.heading, kPi / 2.0, 1e-12);
}

TEST(Trajectory, SineStartsWithUnitSlope) {
  const CurvePoint p = sampleCurve(makeCurve(CurveFamily::Sine), 0.0);
  EXPECT_NEAR(p.x, 0.0, 1e-12);
  EXPECT_NEAR(p.y, 0.0, 1e-12);
  EXPECT_NEAR(p.heading, kPi / 4.0, 1e-12);
}

TEST(Trajectory, LemniscateSatisfiesImplicitEquation) {
  const CurveSpec spec = makeCurve(CurveFamily::LemniscateOfGerono);
  for (double t = 0.0; t < 40.0; t += 0.37) {
    const CurvePoint p = sampleCurve(spec, t);
    const double residual = std::pow(p.x, 4) - p.x * p.x + p.y * p.y;
    EXPECT_LE(std::abs(residual), 1e-9) << "t=" << t;
  }
}

TEST(Trajectory, EllipseSatisfiesImplicitEquation) {
  CurveSpec spec = makeCurve(CurveFamily::Ellipse);
  spec.a = 16.0;
  spec.b = 4.0;
  for (double t = 0.0; t < 60.0; t += 0.41) {
    const CurvePoint p = sampleCurve(spec, t);
    EXPECT_NEAR(p.x * p.x / spec.a + p.y * p.y / spec.b, 1.0, 1e-9);
  }
}

TEST(Trajectory, CycloidSatisfiesClosedForm) {
  CurveSpec spec = makeCurve(CurveFamily::Cycloid);
  spec.radius = 1.6;
  const double r = spec.radius;
  for (double t = 0.05; t < 30.0; t += 0.53) {
    const CurvePoint p = sampleCurve(spec, t);
    ASSERT_GE(p.y, -1e-12);
    ASSERT_LE(p.y, 2.0 * r + 1e-12);
    // x = r acos(1 - y/r) - sqrt(y (2r - y)) on the rising half of each arch,
    // mirrored on the falling half.
    const double base = r * std::acos(std::clamp(1.0 - p.y / r, -1.0, 1.0)) -
                        std::sqrt(std::max(0.0, p.y * (2.0 * r - p.y)));
    const double arch = 2.0 * kPi * r;
    const double local = p.x - arch * std::floor(p.x / arch);
    const double residual = std::min(std::abs(local - base), std::abs(arch - local - base));
    EXPECT_LE(residual, 1e-9) << "t=" << t;
  }
}

TEST(Trajectory, HeadingFollowsTangent) {
  CurveSpec spec = makeCurve(CurveFamily::Sine);
  spec.amplitude = 0.7;
  spec.frequency = 1.3;
  for (double t = 0.0; t < 10.0; t += 0.5) {
    const CurvePoint p = sampleCurve(spec, t);
    const Eigen::Vector2d v = curveVelocity(spec, t);
    EXPECT_NEAR(std::remainder(p.heading - std::atan2(v.y(), v.x()), 2.0 * kPi), 0.0, 1e-12);
  }
}

TEST(Trajectory, VelocityMatchesFiniteDifference) {
  for (CurveFamily f : {CurveFamily::Ellipse, CurveFamily::Sine, CurveFamily::Cycloid,
                        CurveFamily::LemniscateOfGerono}) {
    const CurveSpec spec = makeCurve(f);
    const double t = 1.7;
    const double h = 1e-6;
    const CurvePoint a = sampleCurve(spec, t + h);
    const CurvePoint b = sampleCurve(spec, t - h);
    const Eigen::Vector2d numeric((a.x - b.x) / (2 * h), (a.y - b.y) / (2 * h));
    EXPECT_LE((curveVelocity(spec, t) - numeric).norm(), 1e-6) << toString(f);
  }
}

TEST(Trajectory, AverageSpeedMatchesSpec) {
  for (CurveFamily f : {CurveFamily::Ellipse, CurveFamily::Sine, CurveFamily::Cycloid,
                        CurveFamily::LemniscateOfGerono}) {
    CurveSpec spec = makeCurve(f);
    spec.speed = 0.4;
    // One full period of the parameter, then the path length divided by time.
    const double period = (f == CurveFamily::Sine ? 2.0 * kPi / spec.frequency : 2.0 * kPi) /
                          parameterRate(spec);
    const int steps = 20000;
    double length = 0.0;
    CurvePoint prev = sampleCurve(spec, 0.0);
    for (int k = 1; k <= steps; ++k) {
      const CurvePoint p = sampleCurve(spec, period * k / steps);
      length += std::hypot(p.x - prev.x, p.y - prev.y);
      prev = p;
    }
    EXPECT_NEAR(length / period, 0.4, 1e-4) << toString(f);
  }
}

TEST(Trajectory, PhaseShiftEquivariance) {
  CurveSpec spec = makeCurve(CurveFamily::LemniscateOfGerono);
  spec.scale = 3.0;
  CurveSpec shifted = spec;
  shifted.phase = 2.5;
  for (double t = 0.0; t < 10.0; t += 0.7) {
    const CurvePoint a = sampleCurve(shifted, t);
    const CurvePoint b = sampleCurve(spec, t + 2.5);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.heading, b.heading);
  }
}

TEST(Trajectory, OriginTranslatesCurve) {
  CurveSpec spec = makeCurve(CurveFamily::Ellipse);
  CurveSpec moved = spec;
  moved.origin = Eigen::Vector2d(2.0, -3.0);
  const CurvePoint a = sampleCurve(spec, 1.2);
  const CurvePoint b = sampleCurve(moved, 1.2);
  EXPECT_NEAR(b.x - a.x, 2.0, 1e-12);
  EXPECT_NEAR(b.y - a.y, -3.0, 1e-12);
  EXPECT_EQ(a.heading, b.heading);
}

TEST(Trajectory, SingleSampleWindow) {
  const CurveSpec spec = makeCurve(CurveFamily::Cycloid);
  const ReferenceWindow w = referenceWindow(spec, 0.8, 1, 0.05);
  ASSERT_EQ(w.size(), 1u);
  const CurvePoint p = sampleCurve(spec, 0.8);
  EXPECT_EQ(w.states[0](0), p.x);
  EXPECT_EQ(w.states[0](1), p.y);
  EXPECT_EQ(w.states[0](2), p.heading);
  EXPECT_EQ(w.states[0](3), 0.0);
  EXPECT_EQ(w.states[0](4), 0.0);
}

TEST(Trajectory, WindowTimesAndOverlap) {
  const CurveSpec spec = makeCurve(CurveFamily::Sine);
  const double dt = 0.05;
  const ReferenceWindow a = referenceWindow(spec, 1.0, 15, dt);
  const ReferenceWindow b = referenceWindow(spec, 1.0 + dt, 15, dt);
  ASSERT_EQ(a.size(), 15u);
  for (int k = 0; k < 15; ++k) EXPECT_DOUBLE_EQ(a.times[k], 1.0 + k * dt);
  for (int k = 1; k < 15; ++k) EXPECT_LE((a.states[k] - b.states[k - 1]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Trajectory, WindowRejectsBadArguments) {
  const CurveSpec spec = makeCurve(CurveFamily::Sine);
  EXPECT_THROW(referenceWindow(spec, 0.0, 0, 0.05), std::invalid_argument);
  EXPECT_THROW(referenceWindow(spec, 0.0, 3, 0.0), std::invalid_argument);
}

TEST(Trajectory, ObstaclePredictionExamples) {
  ObstacleState still;
  still.position = Eigen::Vector2d(0.3, -0.2);
  for (double t : {0.0, 1.0, 5.0}) {
    EXPECT_EQ(predictObstacle(still, 0.0, t, 0.02), still.position);
  }
  ObstacleState moving;
  moving.velocity = Eigen::Vector2d(1.0, 0.5);
  EXPECT_EQ(predictObstacle(moving, 2.0, 2.0, 0.0), moving.position);
  const Eigen::Vector2d p = predictObstacle(moving, 0.0, 1.0, 0.2);
  EXPECT_NEAR(p.x(), 1.2, 1e-15);
  EXPECT_NEAR(p.y(), 0.6, 1e-15);
}

TEST(Trajectory, ObstaclePredictionIsAffine) {
  ObstacleState o;
  o.position = Eigen::Vector2d(1.0, 2.0);
  o.velocity = Eigen::Vector2d(-0.3, 0.7);
  const Eigen::Vector2d a = predictObstacle(o, 0.0, 0.4, 0.02);
  const Eigen::Vector2d b = predictObstacle(o, 0.0, 1.2, 0.02);
  const Eigen::Vector2d mid = predictObstacle(o, 0.0, 0.8, 0.02);
  EXPECT_LE((mid - 0.5 * (a + b)).norm(), 1e-14);
}

TEST(Trajectory, LinearMotionPath) {
  LinearMotion line;
  line.origin = Eigen::Vector2d(1.0, 1.0);
  line.velocity = Eigen::Vector2d(0.0, 2.0);
  const CurvePoint p = samplePath(line, 0.5);
  EXPECT_DOUBLE_EQ(p.x, 1.0);
  EXPECT_DOUBLE_EQ(p.y, 2.0);
  EXPECT_NEAR(p.heading, kPi / 2.0, 1e-15);

  LinearMotion fixed;
  fixed.heading = 0.25;
  EXPECT_EQ(samplePath(fixed, 3.0).heading, 0.25);
  EXPECT_EQ(pathVelocity(fixed, 3.0), Eigen::Vector2d::Zero());
}

TEST(Trajectory, CurveValidationAndNames) {
  CurveSpec spec = makeCurve(CurveFamily::Ellipse);
  EXPECT_NO_THROW(spec.validate());
  spec.b = -1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = makeCurve(CurveFamily::Sine);
  spec.speed = 0.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  for (CurveFamily f : {CurveFamily::Ellipse, CurveFamily::Sine, CurveFamily::Cycloid,
                        CurveFamily::LemniscateOfGerono}) {
    EXPECT_EQ(curveFamilyFromString(toString(f)), f);
  }
  EXPECT_THROW(curveFamilyFromString("spiral"), ConfigError);
}

TEST(Trajectory, CurveCsvHasOneRowPerSample) {
  std::ostringstream out;
  writeCurveCsv(out, makeCurve(CurveFamily::Ellipse), 1.0, 0.1);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x,y,theta");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 11);
}
