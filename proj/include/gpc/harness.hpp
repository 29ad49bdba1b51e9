#pragma once

// Experiment orchestration: environment matrix, data collection, training,
// evaluation and comparison reports. Everything is reproducible from the
// seed in the configuration.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gpc/config.hpp"
#include "gpc/dataset.hpp"

namespace gpc {

/// All ordered pairs (reference, obstacle) of distinct catalogue curves.
/// Environment ids follow the pair order: reference-major.
std::vector<Environment> generateEnvironments(const std::vector<CurveSpec>& catalogue,
                                              double obstacle_threshold, double duration);

/// Same as above but insists on the ten-curve catalogue.
std::vector<Environment> generateEnvironmentMatrix(const std::vector<CurveSpec>& catalogue,
                                                   double obstacle_threshold, double duration);

struct DataSplit {
  std::uint64_t seed = 0;
  std::vector<int> train;  // environment ids
  std::vector<int> test;
};

/// Seeded disjoint draw of `train` and `test` environment ids from
/// [0, environment_count). A negative `test` takes every remaining id.
DataSplit splitEnvironments(int environment_count, int train, int test, std::uint64_t seed);

enum class EnvironmentSet { Train, Test, All };
EnvironmentSet environmentSetFromString(const std::string& name);

/// Directory layout of a run.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path failures() const { return root / "failures.json"; }
  std::filesystem::path modelPointer() const { return root / "model.json"; }
  std::filesystem::path episodes(EpisodeKind kind) const { return root / toString(kind); }
  std::filesystem::path episode(EpisodeKind kind, int env_id) const;
  std::filesystem::path traces() const { return root / "traces"; }
  std::filesystem::path trace(int env_id) const;
};

struct RunManifest {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<Environment> environments;
  DataSplit split;

  std::vector<int> ids(EnvironmentSet set) const;
  const Environment& environment(int id) const;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

struct Failure {
  std::string stage;
  int env_id = -1;
  std::string message;
};

/// Runs `task(i)` for i in [0, count) on up to `parallelism` threads.
/// Exceptions are collected per item instead of stopping the pool.
std::vector<std::optional<std::string>> runPool(std::size_t count, int parallelism,
                                                const std::function<void(std::size_t)>& task);

struct CollectSummary {
  RunManifest manifest;
  std::vector<Failure> failures;
};

/// MPC episodes for every environment in the split.
CollectSummary collect(const ExperimentConfig& config, const std::filesystem::path& out);

struct TrainSummary {
  Eigen::Index rows = 0;
  RbfHyperparams hyperparams;
  double effective_noise = 0.0;
  SwitchStats stats;
};

/// Builds the training set from the training-split MPC logs, fits the GP and
/// writes `model` plus `model`.stats.json.
TrainSummary train(const std::filesystem::path& runs, const std::filesystem::path& model);

std::filesystem::path statsPath(const std::filesystem::path& model);
SwitchStats loadSwitchStats(const std::filesystem::path& model);
/// The run directory a model was trained from.
std::filesystem::path runsForModel(const std::filesystem::path& model);

/// Per-step comparison of the GPC evaluated on the states of an MPC episode.
struct ShadowTrace {
  std::vector<double> t;
  std::vector<Torques> mpc;
  std::vector<Torques> gpc;
  std::vector<double> variance;

  double rmsError() const;
  double mpcRms() const;
  double fractionBelow(double variance_threshold) const;
};

ShadowTrace shadowTrace(const EpisodeLog& mpc_log, const GpcController& gpc);
void writeTraceCsv(std::ostream& out, const ShadowTrace& trace);
ShadowTrace readTraceCsv(std::istream& in);

struct EvaluateSummary {
  std::vector<int> env_ids;
  std::vector<Failure> failures;
};

/// Pure-GPC and supervised episodes plus shadow traces for the selected
/// environments.
EvaluateSummary evaluate(const std::filesystem::path& runs, const std::filesystem::path& model,
                         EnvironmentSet set);

struct HistogramBucket {
  double lower = 0.0;
  double upper = 0.0;
  int count = 0;
};

/// Non-empty buckets [k w, (k + 1) w) in increasing order.
std::vector<HistogramBucket> histogram(const std::vector<double>& values, double width);

struct TimingStats {
  double mean = 0.0;  // [ms]
  double stddev = 0.0;
  double cv = 0.0;  // stddev / mean
};
TimingStats timingStats(const std::vector<double>& seconds);

struct EnvironmentComparison {
  int env_id = 0;
  bool in_training = false;
  double mpc_cost = 0.0;
  std::optional<double> gpc_cost;
  std::optional<double> supervised_cost;
  std::optional<int> switched_at;
  int reverts = 0;
  std::optional<TimingStats> mpc_timing;
  std::optional<TimingStats> gpc_timing;
  std::optional<double> shadow_rms_ratio;       // RMS(GPC - MPC) / RMS(MPC)
  std::optional<double> variance_below_guard;   // fraction of steps
  double mpc_min_distance = 0.0;
};

struct ComparisonReport {
  std::uint64_t seed = 0;
  std::vector<int> train;
  std::vector<int> test;
  std::vector<MetricsRow> metrics;
  std::vector<EnvironmentComparison> environments;
  std::map<std::string, std::vector<HistogramBucket>> solve_time_histograms;  // per controller
  std::map<std::string, TimingStats> timing;                                   // pooled
};

ComparisonReport compare(const std::filesystem::path& runs, double histogram_width_ms = 1.0);

/// Writes metrics.csv, summary.json and solve_time_histogram.csv. With
/// `with_timing` false every wall-time value is left out.
void writeReport(const ComparisonReport& report, const std::filesystem::path& out,
                 bool with_timing = true);
nlohmann::json reportJson(const ComparisonReport& report, bool with_timing = true);

/// Plot-ready CSV series: trajectory overlays, torque traces, variance traces.
std::vector<std::filesystem::path> exportPlots(const std::filesystem::path& runs,
                                               const std::filesystem::path& out);

}  // namespace gpc
