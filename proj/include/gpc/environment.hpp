#pragma once

#include <string>

#include "gpc/trajectory.hpp"

namespace gpc {

/// A robot reference path paired with one moving obstacle.
struct Environment {
  int id = 0;
  std::string name;
  Path reference;
  Path obstacle;
  double obstacle_threshold = 0.3;  // r_th [m]
  double duration = 20.0;           // [s]
};

inline ObstacleState obstacleAt(const Environment& env, double t) {
  const CurvePoint p = samplePath(env.obstacle, t);
  return ObstacleState{Eigen::Vector2d(p.x, p.y), pathVelocity(env.obstacle, t),
                       env.obstacle_threshold};
}

}  // namespace gpc
