#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gpc/dynamics.hpp"
#include "gpc/environment.hpp"

namespace gpc {

enum class Quality { Ok, NotConverged };
enum class ControllerKind { Mpc, Gpc };

/// One simulator step of a closed-loop episode.
struct SampleRecord {
  double t = 0.0;
  Vector5<double> q = Vector5<double>::Zero();
  Vector5<double> qdot = Vector5<double>::Zero();
  Eigen::Vector2d obstacle_position = Eigen::Vector2d::Zero();
  Eigen::Vector2d obstacle_velocity = Eigen::Vector2d::Zero();
  double obstacle_threshold = 0.0;
  Eigen::Vector3d reference_head = Eigen::Vector3d::Zero();  // x_r, y_r, theta_r at t
  std::string window_digest;
  Torques control;      // controller output
  Torques disturbance;  // added to `control` by the plant
  double stage_cost = 0.0;
  double solve_time = 0.0;  // [s] wall time of the control computation, 0 on hold steps
  Quality quality = Quality::Ok;
  bool fresh = true;  // control computed from this record's state (not a held value)
  ControllerKind controller = ControllerKind::Mpc;
  int solver_iterations = 0;
  std::optional<Torques> shadow_control;  // GPC output evaluated alongside MPC
  std::optional<double> gp_variance;
};

enum class EpisodeKind { Mpc, Gpc, Supervised };

struct EpisodeHeader {
  int schema_version = 1;
  std::string config_hash;
  std::string episode_id;
  EpisodeKind kind = EpisodeKind::Mpc;
  Environment environment;
  int horizon = 15;          // reference window length used by the controllers
  double control_dt = 0.05;  // [s] reference window spacing and control period
  double sim_dt = 0.01;      // [s]
};

struct EpisodeFooter {
  bool aborted = false;
  std::string reason;
  std::optional<int> switched_at;  // control-step index at which GPC first actuated
  int reverts = 0;                 // OOD guard hand-backs to MPC
};

struct EpisodeLog {
  EpisodeHeader header;
  std::vector<SampleRecord> records;
  EpisodeFooter footer;

  double totalCost() const;
  double minObstacleDistance() const;
  double meanTrackingError() const;
};

std::string toString(Quality q);
std::string toString(ControllerKind c);
std::string toString(EpisodeKind k);

/// 64-bit FNV-1a over raw bytes, rendered as 16 hex digits.
std::string digestBytes(const void* data, std::size_t size);
std::string windowDigest(const ReferenceWindow& window);

}  // namespace gpc
