#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace gpc {

enum class CurveFamily { LemniscateOfGerono, Ellipse, Sine, Cycloid };

std::string toString(CurveFamily family);
CurveFamily curveFamilyFromString(const std::string& name);

/// One reference curve of the catalogue.
///
/// Shapes, all offset by `origin`:
///   lemniscate  x = s cos u,  y = s sin u cos u      (s = scale)
///   ellipse     x^2/a + y^2/b = 1                    (a, b are squared semi-axes)
///   sine        y = amplitude sin(frequency x)
///   cycloid     x = r (u - sin u), y = r (1 - cos u)
///
/// The curve parameter u advances at a constant rate chosen so that the
/// average speed over one period equals `speed`. `phase` shifts time.
struct CurveSpec {
  std::string name;
  CurveFamily family = CurveFamily::Ellipse;
  double a = 1.0;
  double b = 1.0;
  double radius = 1.0;
  double amplitude = 1.0;
  double frequency = 1.0;
  double scale = 1.0;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  double speed = 0.5;
  double phase = 0.0;

  void validate() const;
};

/// Straight-line motion at constant velocity. Zero velocity gives a fixed
/// point with the given heading.
struct LinearMotion {
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double heading = 0.0;
};

using Path = std::variant<CurveSpec, LinearMotion>;

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// Parameter rate du/dt for the curve.
double parameterRate(const CurveSpec& spec);

CurvePoint sampleCurve(const CurveSpec& spec, double t);
Eigen::Vector2d curveVelocity(const CurveSpec& spec, double t);

CurvePoint samplePath(const Path& path, double t);
Eigen::Vector2d pathVelocity(const Path& path, double t);

/// Reference states at t0, t0 + dt, ... Each state is [x, y, theta, 0, 0].
struct ReferenceWindow {
  std::vector<double> times;
  std::vector<Eigen::Matrix<double, 5, 1>> states;

  std::size_t size() const { return states.size(); }
};

ReferenceWindow referenceWindow(const Path& path, double t0, int count, double dt);

struct ObstacleState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double threshold = 0.3;  // r_th [m]
};

/// Constant-velocity prediction p(t0) + v(t0) (t - t0 + delay).
Eigen::Vector2d predictObstacle(const ObstacleState& o, double t0, double t, double delay);

/// Writes rows "t,x,y,theta" sampled every dt over [0, duration].
void writeCurveCsv(std::ostream& out, const Path& path, double duration, double dt);

}  // namespace gpc
