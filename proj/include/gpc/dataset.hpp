#pragma once

// Episode files (JSON Lines), training-set construction and metrics tables.
//
// Episode file layout: one header object, one object per SampleRecord, one
// footer object. Doubles are written in shortest round-trip form, so a
// save/load/save cycle is byte-identical.

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gpc/episode.hpp"
#include "gpc/gpc.hpp"

namespace gpc {

inline constexpr int kEpisodeSchemaVersion = 1;

/// Streams one episode to disk. Records must arrive in strictly increasing
/// time order.
class EpisodeWriter {
 public:
  EpisodeWriter(const std::filesystem::path& path, const EpisodeHeader& header);
  ~EpisodeWriter();
  EpisodeWriter(const EpisodeWriter&) = delete;
  EpisodeWriter& operator=(const EpisodeWriter&) = delete;

  void append(const SampleRecord& record);
  /// Writes the footer and flushes.
  void close(const EpisodeFooter& footer);

 private:
  void check() const;

  std::ofstream out_;
  std::string episode_id_;
  std::optional<double> last_t_;
  bool closed_ = false;
};

void writeEpisode(const std::filesystem::path& path, const EpisodeLog& log);
EpisodeLog readEpisode(const std::filesystem::path& path);

/// The episode as JSON Lines text, optionally with every wall-time field
/// zeroed so that repeated runs can be compared byte for byte.
std::string episodeText(const EpisodeLog& log, bool with_timing = true);

struct Provenance {
  std::string episode_id;
  std::size_t step = 0;  // record index within the episode

  bool operator==(const Provenance&) const = default;
};

struct TrainingSet {
  Eigen::MatrixXd x;  // n x 12 features
  Eigen::MatrixXd y;  // n x 2 torques (right, left)
  std::vector<Provenance> provenance;
  std::vector<double> stage_costs;

  Eigen::Index size() const { return x.rows(); }
};

enum class Subsampling {
  UniformStride,      // evenly spaced rows
  StrideWithTopCost,  // evenly spaced rows plus the highest stage-cost rows
};

struct TrainingSetOptions {
  Eigen::Index max_rows = 2000;
  Subsampling strategy = Subsampling::StrideWithTopCost;
  double top_cost_fraction = 0.05;
  // Only rows where the controller recomputed its output; held rows repeat
  // the label of an earlier state.
  bool fresh_only = false;
  FeatureOptions features;
};

/// Eligible rows: MPC-driven, quality ok (and fresh when requested).
/// Features are recomputed from the stored raw state and the regenerated
/// reference window, whose digest must match the logged one.
TrainingSet buildTrainingSet(const std::vector<EpisodeLog>& episodes,
                             const TrainingSetOptions& options = {});

/// Mean and population standard deviation of quality-ok stage costs.
SwitchStats trainingCostStats(const std::vector<EpisodeLog>& episodes, double alpha = 0.5);

struct MetricsRow {
  int env_id = 0;
  std::string controller;
  double total_cost = 0.0;
  double mean_solve_time = 0.0;  // [ms], over control instants
  double std_solve_time = 0.0;   // [ms], population
  double min_obstacle_distance = 0.0;
  std::optional<int> switched_at;
};

MetricsRow metricsFor(const EpisodeLog& log);

/// Header: env_id,controller,total_cost,mean_solve_time,std_solve_time,
/// min_obstacle_distance,switched_at
void writeMetricsCsv(std::ostream& out, const std::vector<MetricsRow>& rows,
                     bool with_timing = true);
std::vector<MetricsRow> readMetricsCsv(std::istream& in);

/// Wall times of the control instants of an episode, in seconds.
std::vector<double> controlTimes(const EpisodeLog& log);

}  // namespace gpc
