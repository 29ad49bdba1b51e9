#pragma once

// Experiment configuration and the JSON encodings shared by config files,
// episode headers and run manifests.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gpc/gp.hpp"
#include "gpc/gpc.hpp"
#include "gpc/mpc.hpp"

namespace gpc {

struct GpTrainingOptions {
  RbfHyperparams initial = RbfHyperparams::isotropic(kFeatureDimension, 1.0, 1e-6);
  GpFitOptions fit;
  bool fresh_only = true;  // train on control instants only
  bool fit_hyperparameters = true;
  HyperparameterSearch search;
  Eigen::Index max_rows = 2000;
  double top_cost_fraction = 0.05;
};

struct ExperimentOptions {
  int train_environments = 6;
  int test_environments = 4;
  bool full_sweep = false;  // evaluate all ordered pairs instead of the split
  int parallelism = 1;
};

struct ExperimentConfig {
  std::uint64_t seed = 7;
  MpcConfig mpc;
  SimulationOptions simulation;
  double duration = 20.0;            // [s]
  double obstacle_threshold = 0.3;   // r_th [m]
  FeatureOptions features;
  GpTrainingOptions gp;
  double alpha = 0.5;
  SupervisorOptions supervisor;
  ExperimentOptions experiment;
  std::vector<CurveSpec> catalogue;

  void validate() const;
  /// Digest of the canonical JSON encoding.
  std::string hash() const;
  /// Simulation options with the disturbance stream keyed to the seed.
  SimulationOptions episodeSimulation() const;
};

/// Independent sub-seed for a named purpose.
std::uint64_t deriveSeed(std::uint64_t seed, const std::string& tag);

/// Built-in configuration: default parameters and a ten-curve catalogue.
ExperimentConfig defaultConfig();

ExperimentConfig loadConfig(const std::filesystem::path& path);
void saveConfig(const std::filesystem::path& path, const ExperimentConfig& config);

void to_json(nlohmann::json& j, const RobotParams& p);
void from_json(const nlohmann::json& j, RobotParams& p);
void to_json(nlohmann::json& j, const CurveSpec& c);
void from_json(const nlohmann::json& j, CurveSpec& c);
void to_json(nlohmann::json& j, const Path& p);
void from_json(const nlohmann::json& j, Path& p);
void to_json(nlohmann::json& j, const Environment& e);
void from_json(const nlohmann::json& j, Environment& e);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

}  // namespace gpc
