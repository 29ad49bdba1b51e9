#include "gpc/config.hpp"

#include <fstream>
#include <sstream>

#include "gpc/episode.hpp"

namespace gpc {

namespace {

using nlohmann::json;

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

template <int N>
Eigen::Matrix<double, N, 1> fixedVec(const json& j, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != N) {
    throw ConfigError(std::string(what) + " must have " + std::to_string(N) + " entries");
  }
  return Eigen::Map<const Eigen::Matrix<double, N, 1>>(v.data());
}

// Reads `key` into `out` when present, keeping the default otherwise.
template <typename T>
void readIfPresent(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const RobotParams& p) {
  j = json{{"chassisMass", p.chassis_mass},
           {"wheelMass", p.wheel_mass},
           {"totalMass", p.total_mass},
           {"chassisOffset", p.chassis_offset},
           {"wheelRadius", p.wheel_radius},
           {"halfTrack", p.half_track},
           {"chassisYawInertia", p.chassis_yaw_inertia},
           {"totalYawInertia", p.total_yaw_inertia},
           {"wheelSpinInertia", p.wheel_spin_inertia}};
}

void from_json(const json& j, RobotParams& p) {
  readIfPresent(j, "chassisMass", p.chassis_mass);
  readIfPresent(j, "wheelMass", p.wheel_mass);
  if (j.contains("totalMass")) {
    p.total_mass = j.at("totalMass").get<double>();
  } else {
    p.total_mass = p.chassis_mass + 2.0 * p.wheel_mass;
  }
  readIfPresent(j, "chassisOffset", p.chassis_offset);
  readIfPresent(j, "wheelRadius", p.wheel_radius);
  readIfPresent(j, "halfTrack", p.half_track);
  readIfPresent(j, "chassisYawInertia", p.chassis_yaw_inertia);
  readIfPresent(j, "totalYawInertia", p.total_yaw_inertia);
  readIfPresent(j, "wheelSpinInertia", p.wheel_spin_inertia);
}

void to_json(json& j, const CurveSpec& c) {
  j = json{{"name", c.name},     {"family", toString(c.family)},
           {"origin", vec(c.origin)}, {"speed", c.speed},
           {"phase", c.phase}};
  switch (c.family) {
    case CurveFamily::LemniscateOfGerono:
      j["scale"] = c.scale;
      break;
    case CurveFamily::Ellipse:
      j["a"] = c.a;
      j["b"] = c.b;
      break;
    case CurveFamily::Sine:
      j["amplitude"] = c.amplitude;
      j["frequency"] = c.frequency;
      break;
    case CurveFamily::Cycloid:
      j["radius"] = c.radius;
      break;
  }
}

void from_json(const json& j, CurveSpec& c) {
  c = CurveSpec{};
  readIfPresent(j, "name", c.name);
  c.family = curveFamilyFromString(j.at("family").get<std::string>());
  readIfPresent(j, "a", c.a);
  readIfPresent(j, "b", c.b);
  readIfPresent(j, "radius", c.radius);
  readIfPresent(j, "amplitude", c.amplitude);
  readIfPresent(j, "frequency", c.frequency);
  readIfPresent(j, "scale", c.scale);
  if (j.contains("origin")) c.origin = fixedVec<2>(j.at("origin"), "origin");
  readIfPresent(j, "speed", c.speed);
  readIfPresent(j, "phase", c.phase);
  c.validate();
}

void to_json(json& j, const Path& p) {
  if (const auto* curve = std::get_if<CurveSpec>(&p)) {
    j = *curve;
    j["type"] = "curve";
  } else {
    const auto& line = std::get<LinearMotion>(p);
    j = json{{"type", "linear"},
             {"origin", vec(line.origin)},
             {"velocity", vec(line.velocity)},
             {"heading", line.heading}};
  }
}

void from_json(const json& j, Path& p) {
  const std::string type = j.value("type", "curve");
  if (type == "curve") {
    p = j.get<CurveSpec>();
  } else if (type == "linear") {
    LinearMotion line;
    if (j.contains("origin")) line.origin = fixedVec<2>(j.at("origin"), "origin");
    if (j.contains("velocity")) line.velocity = fixedVec<2>(j.at("velocity"), "velocity");
    readIfPresent(j, "heading", line.heading);
    p = line;
  } else {
    throw ConfigError("unknown path type '" + type + "'");
  }
}

void to_json(json& j, const Environment& e) {
  j = json{{"id", e.id},
           {"name", e.name},
           {"reference", e.reference},
           {"obstacle", e.obstacle},
           {"obstacleThreshold", e.obstacle_threshold},
           {"duration", e.duration}};
}

void from_json(const json& j, Environment& e) {
  e = Environment{};
  readIfPresent(j, "id", e.id);
  readIfPresent(j, "name", e.name);
  e.reference = j.at("reference").get<Path>();
  e.obstacle = j.at("obstacle").get<Path>();
  readIfPresent(j, "obstacleThreshold", e.obstacle_threshold);
  readIfPresent(j, "duration", e.duration);
}

void to_json(json& j, const ExperimentConfig& c) {
  const CostWeights& w = c.mpc.weights;
  json collision = json::array();
  for (const auto& cw : w.collision) {
    collision.push_back({{"scale", cw.scale}, {"steepness", cw.steepness}});
  }
  const GpTrainingOptions& gp = c.gp;
  j = json{
      {"seed", c.seed},
      {"robot", c.mpc.plant},
      {"cost",
       {{"stateWeights", vec(w.state_weights)},
        {"collision", collision},
        {"horizon", w.horizon},
        {"dt", w.dt},
        {"delay", w.delay}}},
      {"torqueBounds", {{"lower", c.mpc.bounds.lower}, {"upper", c.mpc.bounds.upper}}},
      {"solver",
       {{"gtol", c.mpc.solver.gtol},
        {"xtol", c.mpc.solver.xtol},
        {"ftol", c.mpc.solver.ftol},
        {"maxIterations", c.mpc.solver.max_iterations}}},
      {"simulation",
       {{"dt", c.simulation.dt},
        {"controlPeriod", c.simulation.control_period},
        {"startMoving", c.simulation.start_moving},
        {"disturbanceStd", c.simulation.disturbance_std},
        {"duration", c.duration}}},
      {"obstacleThreshold", c.obstacle_threshold},
      {"features",
       {{"proximityRadius", c.features.proximity_radius},
        {"proximityFalloff", c.features.proximity_falloff}}},
      {"gp",
       {{"lengthScales", vec(gp.initial.length_scales)},
        {"noise", gp.initial.noise},
        {"standardize", gp.fit.standardize},
        {"jitterGrowth", gp.fit.jitter_growth},
        {"jitterCap", gp.fit.jitter_cap},
        {"freshOnly", gp.fresh_only},
        {"fitHyperparameters", gp.fit_hyperparameters},
        {"fitNoise", gp.search.fit_noise},
        {"minNoise", gp.search.min_noise},
        {"maxNoise", gp.search.max_noise},
        {"restarts", gp.search.restarts},
        {"maxSweeps", gp.search.max_sweeps},
        {"searchSubsample", gp.search.subsample},
        {"maxRows", gp.max_rows},
        {"topCostFraction", gp.top_cost_fraction}}},
      {"switching",
       {{"alpha", c.alpha},
        {"window", c.supervisor.window},
        {"varianceThreshold", c.supervisor.variance_threshold}}},
      {"experiment",
       {{"trainEnvironments", c.experiment.train_environments},
        {"testEnvironments", c.experiment.test_environments},
        {"fullSweep", c.experiment.full_sweep},
        {"parallelism", c.experiment.parallelism}}},
      {"catalogue", c.catalogue}};
}

void from_json(const json& j, ExperimentConfig& c) {
  c = defaultConfig();
  readIfPresent(j, "seed", c.seed);
  if (j.contains("robot")) c.mpc.plant = j.at("robot").get<RobotParams>();
  if (j.contains("cost")) {
    const json& cost = j.at("cost");
    CostWeights& w = c.mpc.weights;
    if (cost.contains("stateWeights")) {
      w.state_weights = fixedVec<5>(cost.at("stateWeights"), "stateWeights");
    }
    if (cost.contains("collision")) {
      w.collision.clear();
      for (const auto& cw : cost.at("collision")) {
        CollisionWeights weights;
        readIfPresent(cw, "scale", weights.scale);
        readIfPresent(cw, "steepness", weights.steepness);
        w.collision.push_back(weights);
      }
    }
    readIfPresent(cost, "horizon", w.horizon);
    readIfPresent(cost, "dt", w.dt);
    readIfPresent(cost, "delay", w.delay);
  }
  if (j.contains("torqueBounds")) {
    readIfPresent(j.at("torqueBounds"), "lower", c.mpc.bounds.lower);
    readIfPresent(j.at("torqueBounds"), "upper", c.mpc.bounds.upper);
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    readIfPresent(s, "gtol", c.mpc.solver.gtol);
    readIfPresent(s, "xtol", c.mpc.solver.xtol);
    readIfPresent(s, "ftol", c.mpc.solver.ftol);
    readIfPresent(s, "maxIterations", c.mpc.solver.max_iterations);
  }
  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    readIfPresent(s, "dt", c.simulation.dt);
    readIfPresent(s, "controlPeriod", c.simulation.control_period);
    readIfPresent(s, "startMoving", c.simulation.start_moving);
    readIfPresent(s, "disturbanceStd", c.simulation.disturbance_std);
    readIfPresent(s, "duration", c.duration);
  }
  readIfPresent(j, "obstacleThreshold", c.obstacle_threshold);
  if (j.contains("features")) {
    readIfPresent(j.at("features"), "proximityRadius", c.features.proximity_radius);
    readIfPresent(j.at("features"), "proximityFalloff", c.features.proximity_falloff);
  }
  if (j.contains("gp")) {
    const json& g = j.at("gp");
    GpTrainingOptions& gp = c.gp;
    if (g.contains("lengthScales")) {
      const auto v = g.at("lengthScales").get<std::vector<double>>();
      if (v.size() == 1) {
        gp.initial.length_scales = Eigen::VectorXd::Constant(kFeatureDimension, v[0]);
      } else {
        gp.initial.length_scales =
            Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
    }
    readIfPresent(g, "noise", gp.initial.noise);
    readIfPresent(g, "standardize", gp.fit.standardize);
    readIfPresent(g, "jitterGrowth", gp.fit.jitter_growth);
    readIfPresent(g, "jitterCap", gp.fit.jitter_cap);
    readIfPresent(g, "freshOnly", gp.fresh_only);
    readIfPresent(g, "fitHyperparameters", gp.fit_hyperparameters);
    readIfPresent(g, "fitNoise", gp.search.fit_noise);
    readIfPresent(g, "minNoise", gp.search.min_noise);
    readIfPresent(g, "maxNoise", gp.search.max_noise);
    readIfPresent(g, "restarts", gp.search.restarts);
    readIfPresent(g, "maxSweeps", gp.search.max_sweeps);
    readIfPresent(g, "searchSubsample", gp.search.subsample);
    readIfPresent(g, "maxRows", gp.max_rows);
    readIfPresent(g, "topCostFraction", gp.top_cost_fraction);
  }
  if (j.contains("switching")) {
    const json& s = j.at("switching");
    readIfPresent(s, "alpha", c.alpha);
    readIfPresent(s, "window", c.supervisor.window);
    readIfPresent(s, "varianceThreshold", c.supervisor.variance_threshold);
  }
  if (j.contains("experiment")) {
    const json& e = j.at("experiment");
    readIfPresent(e, "trainEnvironments", c.experiment.train_environments);
    readIfPresent(e, "testEnvironments", c.experiment.test_environments);
    readIfPresent(e, "fullSweep", c.experiment.full_sweep);
    readIfPresent(e, "parallelism", c.experiment.parallelism);
  }
  if (j.contains("catalogue")) c.catalogue = j.at("catalogue").get<std::vector<CurveSpec>>();
}

void ExperimentConfig::validate() const {
  mpc.plant.validate();
  mpc.weights.validate();
  if (!(mpc.bounds.lower < mpc.bounds.upper)) {
    throw ConfigError("torque bounds need lower < upper");
  }
  if (!(mpc.solver.gtol >= 0.0) || !(mpc.solver.xtol >= 0.0) || !(mpc.solver.ftol >= 0.0) ||
      mpc.solver.max_iterations < 1) {
    throw ConfigError("solver tolerances must be >= 0 and maxIterations >= 1");
  }
  simulation.validate();
  if (std::abs(mpc.weights.dt - simulation.control_period) > 1e-12) {
    throw ConfigError("cost dt must equal the control period");
  }
  if (!(duration > 0.0)) throw ConfigError("episode duration must be positive");
  if (!(obstacle_threshold > 0.0)) throw ConfigError("obstacle threshold must be positive");
  features.validate();
  gp.initial.validate(kFeatureDimension);
  if (gp.max_rows < 1) throw ConfigError("gp.maxRows must be at least 1");
  if (!(gp.top_cost_fraction >= 0.0 && gp.top_cost_fraction <= 1.0)) {
    throw ConfigError("gp.topCostFraction must lie in [0, 1]");
  }
  if (!(alpha >= 0.0)) throw ConfigError("switching alpha must be >= 0");
  supervisor.validate();
  if (experiment.train_environments < 1 || experiment.test_environments < 0 ||
      experiment.parallelism < 1) {
    throw ConfigError("experiment needs >= 1 training environment and parallelism >= 1");
  }
  for (const auto& c : catalogue) c.validate();
}

std::string ExperimentConfig::hash() const {
  const std::string canonical = nlohmann::json(*this).dump();
  return digestBytes(canonical.data(), canonical.size());
}

SimulationOptions ExperimentConfig::episodeSimulation() const {
  SimulationOptions s = simulation;
  s.disturbance_seed = deriveSeed(seed, "disturbance");
  return s;
}

std::uint64_t deriveSeed(std::uint64_t seed, const std::string& tag) {
  std::string bytes(reinterpret_cast<const char*>(&seed), sizeof(seed));
  bytes += tag;
  return std::stoull(digestBytes(bytes.data(), bytes.size()), nullptr, 16);
}

ExperimentConfig defaultConfig() {
  ExperimentConfig c;
  c.mpc.solver.ftol = 1e-8;
  c.simulation.start_moving = true;
  c.simulation.disturbance_std = 0.2;
  c.mpc.weights.collision = {CollisionWeights{20.0, 4.0}};
  c.gp.search.fit_noise = true;

  auto curve = [](std::string name, CurveFamily family) {
    CurveSpec s;
    s.name = std::move(name);
    s.family = family;
    return s;
  };
  CurveSpec e1 = curve("ellipse-wide", CurveFamily::Ellipse);
  e1.a = 16.0;
  e1.b = 4.0;
  e1.origin = {5.0, 0.0};
  e1.speed = 0.5;
  CurveSpec e2 = curve("circle", CurveFamily::Ellipse);
  e2.a = 6.25;
  e2.b = 6.25;
  e2.origin = {5.0, 0.5};
  e2.speed = 0.4;
  e2.phase = 10.0;
  CurveSpec e3 = curve("ellipse-tall", CurveFamily::Ellipse);
  e3.a = 4.0;
  e3.b = 9.0;
  e3.origin = {4.0, -0.5};
  e3.speed = 0.45;
  e3.phase = 20.0;
  CurveSpec l1 = curve("lemniscate-large", CurveFamily::LemniscateOfGerono);
  l1.scale = 4.0;
  l1.origin = {5.0, 0.0};
  l1.speed = 0.5;
  l1.phase = 8.0;
  CurveSpec l2 = curve("lemniscate-small", CurveFamily::LemniscateOfGerono);
  l2.scale = 2.5;
  l2.origin = {5.0, 1.0};
  l2.speed = 0.35;
  l2.phase = 20.0;
  CurveSpec s1 = curve("sine-gentle", CurveFamily::Sine);
  s1.amplitude = 1.0;
  s1.frequency = 0.6;
  s1.origin = {0.0, 0.0};
  s1.speed = 0.5;
  CurveSpec s2 = curve("sine-tight", CurveFamily::Sine);
  s2.amplitude = 0.6;
  s2.frequency = 1.2;
  s2.origin = {0.0, -1.0};
  s2.speed = 0.4;
  CurveSpec s3 = curve("sine-broad", CurveFamily::Sine);
  s3.amplitude = 1.5;
  s3.frequency = 0.5;
  s3.origin = {0.0, 1.0};
  s3.speed = 0.45;
  s3.phase = 2.0;
  CurveSpec c1 = curve("cycloid-large", CurveFamily::Cycloid);
  c1.radius = 1.6;
  c1.origin = {0.0, -2.0};
  c1.speed = 0.5;
  c1.phase = 2.5;
  CurveSpec c2 = curve("cycloid-small", CurveFamily::Cycloid);
  c2.radius = 1.2;
  c2.origin = {1.0, -1.5};
  c2.speed = 0.4;
  c2.phase = 2.5;
  c.catalogue = {e1, e2, e3, l1, l2, s1, s2, s3, c1, c2};
  return c;
}

ExperimentConfig loadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  ExperimentConfig c;
  try {
    c = nlohmann::json::parse(in).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

void saveConfig(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path.string());
  out << nlohmann::json(config).dump(2) << '\n';
  if (!out) throw IoError("failed writing config " + path.string());
}

}  // namespace gpc
