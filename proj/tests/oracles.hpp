#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the code under test except to
// evaluate the plain objective.

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "gpc/ocp.hpp"

namespace oracle {

struct GpOracle {
  Eigen::VectorXd mean;
  double variance = 0.0;
};

/// Posterior by explicit inversion of K + noise I, on inputs already scaled
/// the same way the model scales them.
inline GpOracle denseInverseGp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                               const Eigen::VectorXd& length_scales, double noise,
                               const Eigen::VectorXd& query) {
  const Eigen::Index n = x.rows();
  auto k = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < a.size(); ++d) {
      const double z = (a(d) - b(d)) / length_scales(d);
      s += z * z;
    }
    return std::exp(-0.5 * s);
  };
  Eigen::MatrixXd kxx(n, n);
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ks(i) = k(x.row(i).transpose(), query);
    for (Eigen::Index j = 0; j < n; ++j) kxx(i, j) = k(x.row(i).transpose(), x.row(j).transpose());
  }
  kxx.diagonal().array() += noise;
  const Eigen::MatrixXd inv = kxx.fullPivLu().inverse();
  GpOracle out;
  out.mean = (ks.transpose() * inv * y).transpose();
  out.variance = 1.0 - ks.dot(inv * ks);
  return out;
}

/// Every sequence on the grid {lo, 0, hi} per torque; returns the best cost.
inline double bruteForceGrid(const gpc::State& x0, const gpc::ReferenceWindow& refs,
                             std::span<const gpc::ObstacleState> obstacles,
                             const gpc::CostWeights& w, const gpc::RobotParams& plant,
                             const double levels[3], gpc::ControlSequence* best_u = nullptr) {
  const int dims = 2 * w.horizon;
  int count = 1;
  for (int i = 0; i < dims; ++i) count *= 3;
  double best = std::numeric_limits<double>::infinity();
  gpc::ControlSequence u(2, w.horizon);
  for (int code = 0; code < count; ++code) {
    int c = code;
    for (int i = 0; i < dims; ++i) {
      u(i % 2, i / 2) = levels[c % 3];
      c /= 3;
    }
    const double v = gpc::rolloutCost(x0, u, refs, obstacles, w, plant);
    if (v < best) {
      best = v;
      if (best_u) *best_u = u;
    }
  }
  return best;
}

}  // namespace oracle
