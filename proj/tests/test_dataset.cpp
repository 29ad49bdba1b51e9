#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gpc/dataset.hpp"
#include "gpc/errors.hpp"

using namespace gpc;
namespace fs = std::filesystem;

namespace {

Environment curvedEnvironment() {
  Environment env;
  env.id = 12;
  env.name = "ellipse-vs-line";
  CurveSpec ellipse;
  ellipse.name = "ellipse";
  ellipse.family = CurveFamily::Ellipse;
  ellipse.a = 4.0;
  ellipse.b = 1.0;
  ellipse.speed = 0.4;
  env.reference = ellipse;
  env.obstacle = LinearMotion{Eigen::Vector2d(-3.0, 0.0), Eigen::Vector2d(0.3, 0.05), 0.0};
  return env;
}

class DatasetTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const Environment env = curvedEnvironment();
    SimulationOptions sim;
    sim.start_moving = true;
    sim.disturbance_std = 0.1;
    sim.disturbance_seed = 3;
    log_ = new EpisodeLog(runMpcEpisode(env, env.duration, MpcConfig{}, sim));
    log_->header.episode_id = "mpc-12";
  }
  static void TearDownTestSuite() {
    delete log_;
    log_ = nullptr;
  }

  fs::path tempFile(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dataset_test_" + name);
    created_.push_back(p);
    return p;
  }
  void TearDown() override {
    for (const auto& p : created_) fs::remove(p);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static EpisodeLog* log_;
  std::vector<fs::path> created_;
};

EpisodeLog* DatasetTest::log_ = nullptr;

}  // namespace

TEST_F(DatasetTest, TwentySecondEpisodeHasTwoThousandRecords) {
  EXPECT_EQ(log_->records.size(), 2000u);
  EXPECT_FALSE(log_->footer.aborted);
}

TEST_F(DatasetTest, SaveLoadSaveIsByteIdentical) {
  const fs::path a = tempFile("a.jsonl");
  const fs::path b = tempFile("b.jsonl");
  writeEpisode(a, *log_);
  const EpisodeLog back = readEpisode(a);
  writeEpisode(b, back);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(episodeText(back), episodeText(*log_));
  ASSERT_EQ(back.records.size(), log_->records.size());
  for (std::size_t i = 0; i < back.records.size(); i += 97) {
    EXPECT_EQ(back.records[i].q, log_->records[i].q);
    EXPECT_EQ(back.records[i].qdot, log_->records[i].qdot);
    EXPECT_EQ(back.records[i].stage_cost, log_->records[i].stage_cost);
    EXPECT_EQ(back.records[i].disturbance.left, log_->records[i].disturbance.left);
  }
}

TEST_F(DatasetTest, TextWithoutTimingZeroesWallTimes) {
  EpisodeLog copy = *log_;
  for (auto& r : copy.records) r.solve_time = 0.0;
  EXPECT_EQ(episodeText(*log_, false), episodeText(copy, false));
  EXPECT_EQ(episodeText(*log_, false), episodeText(copy, true));
}

TEST_F(DatasetTest, WriterRejectsOutOfOrderRecords) {
  const fs::path p = tempFile("order.jsonl");
  EpisodeWriter writer(p, log_->header);
  writer.append(log_->records[1]);
  EXPECT_THROW(writer.append(log_->records[0]), OrderViolation);
  EXPECT_THROW(writer.append(log_->records[1]), OrderViolation);
  writer.append(log_->records[2]);
  writer.close(log_->footer);
  EXPECT_EQ(readEpisode(p).records.size(), 2u);
}

TEST_F(DatasetTest, ReadingMissingOrTruncatedFileFails) {
  EXPECT_THROW(readEpisode(tempFile("missing.jsonl")), IoError);
  const fs::path p = tempFile("truncated.jsonl");
  std::ofstream(p) << "{\"not\": \"a header\"}\n";
  EXPECT_THROW(readEpisode(p), Error);
}

TEST_F(DatasetTest, TrainingSetKeepsEveryEligibleRowWhenUnderBudget) {
  TrainingSetOptions options;
  options.max_rows = 100000;
  const TrainingSet set = buildTrainingSet({*log_}, options);
  std::size_t eligible = 0;
  for (const auto& r : log_->records) eligible += r.quality == Quality::Ok ? 1 : 0;
  EXPECT_EQ(static_cast<std::size_t>(set.size()), eligible);
  EXPECT_EQ(set.x.cols(), kFeatureDimension);
  EXPECT_EQ(set.y.cols(), 2);
  EXPECT_EQ(set.provenance.size(), eligible);

  options.fresh_only = true;
  const TrainingSet fresh = buildTrainingSet({*log_}, options);
  for (const auto& p : fresh.provenance) EXPECT_EQ(p.step % 5, 0u);
}

TEST_F(DatasetTest, UniformStrideHalvesEvenly) {
  EpisodeLog ok = *log_;
  for (auto& r : ok.records) r.quality = Quality::Ok;
  TrainingSetOptions options;
  options.strategy = Subsampling::UniformStride;
  options.max_rows = 1000;
  const TrainingSet set = buildTrainingSet({ok}, options);
  ASSERT_EQ(set.size(), 1000);
  for (std::size_t k = 0; k < set.provenance.size(); ++k) {
    EXPECT_EQ(set.provenance[k].step, 2 * k);
  }
}

TEST_F(DatasetTest, TopCostRowsAreAlwaysKept) {
  EpisodeLog ok = *log_;
  for (auto& r : ok.records) r.quality = Quality::Ok;
  TrainingSetOptions options;
  options.max_rows = 200;
  options.top_cost_fraction = 0.05;
  const TrainingSet set = buildTrainingSet({ok}, options);
  ASSERT_EQ(set.size(), 200);
  std::vector<double> costs;
  for (const auto& r : ok.records) costs.push_back(r.stage_cost);
  std::sort(costs.begin(), costs.end(), std::greater<>());
  const double cutoff = costs[99];  // 5% of 2000 rows
  std::size_t kept = 0;
  for (double c : set.stage_costs) kept += c >= cutoff ? 1 : 0;
  EXPECT_GE(kept, 100u);
}

TEST_F(DatasetTest, FilteringEverythingThrows) {
  EpisodeLog bad = *log_;
  for (auto& r : bad.records) r.quality = Quality::NotConverged;
  EXPECT_THROW(buildTrainingSet({bad}), EmptyAfterFiltering);
  EXPECT_THROW(buildTrainingSet({}), InsufficientData);
}

TEST_F(DatasetTest, FeaturesMatchIndependentRecomputation) {
  TrainingSetOptions options;
  options.max_rows = 100000;
  const TrainingSet set = buildTrainingSet({*log_}, options);
  const CostWeights w;
  for (Eigen::Index row = 0; row < set.size(); row += 37) {
    const SampleRecord& r = log_->records[set.provenance[static_cast<std::size_t>(row)].step];
    State s;
    s.q = r.q;
    s.qdot = r.qdot;
    const FeatureVector f = featuresAt(s, log_->header.environment, r.t, w);
    EXPECT_LE((set.x.row(row).transpose() - f).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_EQ(set.y(row, 0), r.control.right);
    EXPECT_EQ(set.y(row, 1), r.control.left);
  }
}

TEST_F(DatasetTest, TamperedReferenceIsDetected) {
  EpisodeLog tampered = *log_;
  auto spec = std::get<CurveSpec>(tampered.header.environment.reference);
  spec.speed *= 1.01;
  tampered.header.environment.reference = spec;
  EXPECT_THROW(buildTrainingSet({tampered}), IoError);
}

TEST(CostStats, ExamplesAndPooling) {
  auto episode = [](std::initializer_list<double> costs) {
    EpisodeLog log;
    double t = 0.0;
    for (double c : costs) {
      SampleRecord r;
      r.t = t;
      t += 0.01;
      r.stage_cost = c;
      log.records.push_back(r);
    }
    return log;
  };
  const SwitchStats s = trainingCostStats({episode({1.0, 3.0})});
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.stddev, 1.0);
  EXPECT_DOUBLE_EQ(s.threshold(), 1.5);

  const SwitchStats flat = trainingCostStats({episode({4.0, 4.0, 4.0})});
  EXPECT_DOUBLE_EQ(flat.mean, 4.0);
  EXPECT_EQ(flat.stddev, 0.0);

  // Pooling across episodes, not averaging per-episode statistics.
  const SwitchStats pooled = trainingCostStats({episode({0.0}), episode({0.0, 0.0, 4.0})});
  EXPECT_DOUBLE_EQ(pooled.mean, 1.0);
  EXPECT_DOUBLE_EQ(pooled.stddev, std::sqrt(3.0));

  EpisodeLog mixed = episode({1.0, 3.0, 100.0});
  mixed.records[2].quality = Quality::NotConverged;
  EXPECT_DOUBLE_EQ(trainingCostStats({mixed}).mean, 2.0);
  EXPECT_THROW(trainingCostStats({episode({1.0})}), InsufficientData);
}

TEST(Metrics, CsvRoundTripAndTimingOmission) {
  MetricsRow a;
  a.env_id = 3;
  a.controller = "mpc";
  a.total_cost = 12.5;
  a.mean_solve_time = 11.25;
  a.std_solve_time = 0.5;
  a.min_obstacle_distance = 0.75;
  MetricsRow b = a;
  b.controller = "supervised";
  b.switched_at = 10;
  std::stringstream ss;
  writeMetricsCsv(ss, {a, b});
  EXPECT_EQ(ss.str(),
            "env_id,controller,total_cost,mean_solve_time,std_solve_time,min_obstacle_distance,"
            "switched_at\n"
            "3,mpc,12.5,11.25,0.5,0.75,\n"
            "3,supervised,12.5,11.25,0.5,0.75,10\n");
  const auto rows = readMetricsCsv(ss);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].switched_at, 10);
  EXPECT_FALSE(rows[0].switched_at.has_value());
  EXPECT_EQ(rows[0].mean_solve_time, 11.25);

  std::stringstream untimed;
  writeMetricsCsv(untimed, {a});
  std::stringstream bare;
  writeMetricsCsv(bare, {a}, false);
  EXPECT_NE(bare.str().find("3,mpc,12.5,,,0.75,"), std::string::npos);
}

TEST(Metrics, ControlTimesAreFreshRowsOnly) {
  EpisodeLog log;
  for (int i = 0; i < 10; ++i) {
    SampleRecord r;
    r.t = 0.01 * i;
    r.fresh = i % 5 == 0;
    r.solve_time = r.fresh ? 0.002 * (i / 5 + 1) : 0.0;
    log.records.push_back(r);
  }
  const auto times = controlTimes(log);
  ASSERT_EQ(times.size(), 2u);
  const MetricsRow row = metricsFor(log);
  EXPECT_NEAR(row.mean_solve_time, 3.0, 1e-12);
  EXPECT_NEAR(row.std_solve_time, 1.0, 1e-12);
}
