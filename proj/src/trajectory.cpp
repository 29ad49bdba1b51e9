#include "gpc/trajectory.hpp"

#include <boost/math/quadrature/trapezoidal.hpp>

#include <cmath>
#include <numbers>
#include <ostream>

#include "gpc/errors.hpp"

namespace gpc {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct CurveGeometry {
  Eigen::Vector2d point;
  Eigen::Vector2d first;   // d/du
  Eigen::Vector2d second;  // d^2/du^2
};

CurveGeometry geometry(const CurveSpec& spec, double u) {
  const double s = std::sin(u);
  const double c = std::cos(u);
  CurveGeometry g;
  switch (spec.family) {
    case CurveFamily::LemniscateOfGerono: {
      const double k = spec.scale;
      g.point = {k * c, k * s * c};
      g.first = {-k * s, k * std::cos(2.0 * u)};
      g.second = {-k * c, -2.0 * k * std::sin(2.0 * u)};
      break;
    }
    case CurveFamily::Ellipse: {
      const double ax = std::sqrt(spec.a);
      const double by = std::sqrt(spec.b);
      g.point = {ax * c, by * s};
      g.first = {-ax * s, by * c};
      g.second = {-ax * c, -by * s};
      break;
    }
    case CurveFamily::Sine: {
      const double amp = spec.amplitude;
      const double f = spec.frequency;
      g.point = {u, amp * std::sin(f * u)};
      g.first = {1.0, amp * f * std::cos(f * u)};
      g.second = {0.0, -amp * f * f * std::sin(f * u)};
      break;
    }
    case CurveFamily::Cycloid: {
      const double r = spec.radius;
      g.point = {r * (u - s), r * (1.0 - c)};
      g.first = {r * (1.0 - c), r * s};
      g.second = {r * s, r * c};
      break;
    }
  }
  g.point += spec.origin;
  return g;
}

// Arc length per unit of parameter, averaged over one period.
double meanParametricSpeed(const CurveSpec& spec) {
  switch (spec.family) {
    case CurveFamily::Cycloid:
      return 4.0 * spec.radius / std::numbers::pi;
    case CurveFamily::Ellipse: {
      const double major = std::sqrt(std::max(spec.a, spec.b));
      const double minor = std::sqrt(std::min(spec.a, spec.b));
      const double ecc = std::sqrt(1.0 - (minor * minor) / (major * major));
      return 4.0 * major * std::comp_ellint_2(ecc) / kTwoPi;
    }
    case CurveFamily::LemniscateOfGerono:
    case CurveFamily::Sine: {
      const double period =
          spec.family == CurveFamily::Sine ? kTwoPi / spec.frequency : kTwoPi;
      auto speed = [&spec](double u) { return geometry(spec, u).first.norm(); };
      using boost::math::quadrature::trapezoidal;
      return trapezoidal(speed, 0.0, period, 1e-12) / period;
    }
  }
  return 1.0;
}

double parameterAt(const CurveSpec& spec, double t) {
  return parameterRate(spec) * (t + spec.phase);
}

}  // namespace

std::string toString(CurveFamily family) {
  switch (family) {
    case CurveFamily::LemniscateOfGerono:
      return "lemniscate";
    case CurveFamily::Ellipse:
      return "ellipse";
    case CurveFamily::Sine:
      return "sine";
    case CurveFamily::Cycloid:
      return "cycloid";
  }
  return "unknown";
}

CurveFamily curveFamilyFromString(const std::string& name) {
  if (name == "lemniscate") return CurveFamily::LemniscateOfGerono;
  if (name == "ellipse") return CurveFamily::Ellipse;
  if (name == "sine") return CurveFamily::Sine;
  if (name == "cycloid") return CurveFamily::Cycloid;
  throw ConfigError("unknown curve family '" + name + "'");
}

void CurveSpec::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  bool ok = positive(speed) && std::isfinite(phase) && origin.allFinite();
  switch (family) {
    case CurveFamily::LemniscateOfGerono:
      ok = ok && positive(scale);
      break;
    case CurveFamily::Ellipse:
      ok = ok && positive(a) && positive(b);
      break;
    case CurveFamily::Sine:
      ok = ok && positive(amplitude) && positive(frequency);
      break;
    case CurveFamily::Cycloid:
      ok = ok && positive(radius);
      break;
  }
  if (!ok) {
    throw ConfigError("curve '" + name + "': shape parameters and speed must be positive");
  }
}

double parameterRate(const CurveSpec& spec) { return spec.speed / meanParametricSpeed(spec); }

CurvePoint sampleCurve(const CurveSpec& spec, double t) {
  const CurveGeometry g = geometry(spec, parameterAt(spec, t));
  // At a cusp the tangent vanishes; the limiting direction is along the
  // second derivative.
  const Eigen::Vector2d dir = g.first.norm() > 1e-12 ? g.first : g.second;
  return {g.point.x(), g.point.y(), std::atan2(dir.y(), dir.x())};
}

Eigen::Vector2d curveVelocity(const CurveSpec& spec, double t) {
  return parameterRate(spec) * geometry(spec, parameterAt(spec, t)).first;
}

CurvePoint samplePath(const Path& path, double t) {
  if (const auto* curve = std::get_if<CurveSpec>(&path)) {
    return sampleCurve(*curve, t);
  }
  const auto& line = std::get<LinearMotion>(path);
  const Eigen::Vector2d p = line.origin + line.velocity * t;
  const double heading = line.velocity.norm() > 0.0
                             ? std::atan2(line.velocity.y(), line.velocity.x())
                             : line.heading;
  return {p.x(), p.y(), heading};
}

Eigen::Vector2d pathVelocity(const Path& path, double t) {
  if (const auto* curve = std::get_if<CurveSpec>(&path)) {
    return curveVelocity(*curve, t);
  }
  return std::get<LinearMotion>(path).velocity;
}

ReferenceWindow referenceWindow(const Path& path, double t0, int count, double dt) {
  if (count < 1 || !(dt > 0.0)) {
    throw std::invalid_argument("referenceWindow needs count >= 1 and dt > 0");
  }
  ReferenceWindow w;
  w.times.reserve(count);
  w.states.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double t = t0 + k * dt;
    const CurvePoint p = samplePath(path, t);
    Eigen::Matrix<double, 5, 1> state;
    state << p.x, p.y, p.heading, 0.0, 0.0;
    w.times.push_back(t);
    w.states.push_back(state);
  }
  return w;
}

Eigen::Vector2d predictObstacle(const ObstacleState& o, double t0, double t, double delay) {
  return o.position + o.velocity * (t - t0 + delay);
}

void writeCurveCsv(std::ostream& out, const Path& path, double duration, double dt) {
  out << "t,x,y,theta\n";
  const int steps = static_cast<int>(std::floor(duration / dt + 1e-9));
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const CurvePoint p = samplePath(path, t);
    out << t << ',' << p.x << ',' << p.y << ',' << p.heading << '\n';
  }
}

}  // namespace gpc
