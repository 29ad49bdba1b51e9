#include "gpc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace gpc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json readJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed " + path.string() + ": " + e.what());
  }
}

void writeJson(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void writeFailures(const fs::path& path, const std::vector<Failure>& failures) {
  json list = json::array();
  for (const auto& f : failures) {
    list.push_back({{"stage", f.stage}, {"env_id", f.env_id}, {"message", f.message}});
  }
  writeJson(path, list);
}

std::vector<Failure> readFailures(const fs::path& path) {
  std::vector<Failure> failures;
  if (!fs::exists(path)) return failures;
  for (const auto& f : readJson(path)) {
    failures.push_back({f.at("stage").get<std::string>(), f.at("env_id").get<int>(),
                        f.at("message").get<std::string>()});
  }
  return failures;
}

/// Replaces this stage's entries in failures.json with the new ones.
void recordFailures(const RunLayout& layout, const std::string& stage,
                    const std::vector<Failure>& fresh) {
  std::vector<Failure> all;
  for (auto& f : readFailures(layout.failures())) {
    if (f.stage != stage) all.push_back(std::move(f));
  }
  all.insert(all.end(), fresh.begin(), fresh.end());
  writeFailures(layout.failures(), all);
}

RunManifest loadManifest(const RunLayout& layout) {
  return readJson(layout.manifest()).get<RunManifest>();
}

std::string formatDouble(double v) {
  // Shortest text that reads back to the same double.
  char buffer[32];
  const auto end = std::to_chars(buffer, buffer + sizeof(buffer), v).ptr;
  return std::string(buffer, end);
}

std::optional<EpisodeLog> readIfExists(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  return readEpisode(path);
}

std::vector<double> toMilliseconds(const std::vector<double>& seconds) {
  std::vector<double> ms(seconds.size());
  std::transform(seconds.begin(), seconds.end(), ms.begin(), [](double s) { return 1e3 * s; });
  return ms;
}

std::vector<Failure> runEpisodes(const std::vector<int>& ids, int parallelism,
                                 const std::string& stage,
                                 const std::function<void(int)>& task) {
  const auto errors = runPool(ids.size(), parallelism, [&](std::size_t i) { task(ids[i]); });
  std::vector<Failure> failures;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (errors[i]) failures.push_back({stage, ids[i], *errors[i]});
  }
  return failures;
}

}  // namespace

std::vector<Environment> generateEnvironments(const std::vector<CurveSpec>& catalogue,
                                              double obstacle_threshold, double duration) {
  if (catalogue.size() < 2) {
    throw CatalogueSizeMismatch("an environment needs two distinct curves; catalogue has " +
                                std::to_string(catalogue.size()));
  }
  std::set<std::string> names;
  for (const auto& c : catalogue) {
    c.validate();
    if (!c.name.empty() && !names.insert(c.name).second) {
      throw CatalogueSizeMismatch("catalogue curve names must be distinct: " + c.name);
    }
  }
  std::vector<Environment> envs;
  envs.reserve(catalogue.size() * (catalogue.size() - 1));
  for (std::size_t r = 0; r < catalogue.size(); ++r) {
    for (std::size_t o = 0; o < catalogue.size(); ++o) {
      if (r == o) continue;
      Environment env;
      env.id = static_cast<int>(envs.size());
      env.name = catalogue[r].name + "|" + catalogue[o].name;
      env.reference = catalogue[r];
      env.obstacle = catalogue[o];
      env.obstacle_threshold = obstacle_threshold;
      env.duration = duration;
      envs.push_back(std::move(env));
    }
  }
  return envs;
}

std::vector<Environment> generateEnvironmentMatrix(const std::vector<CurveSpec>& catalogue,
                                                   double obstacle_threshold, double duration) {
  if (catalogue.size() != 10) {
    throw CatalogueSizeMismatch("the environment matrix needs 10 curves, got " +
                                std::to_string(catalogue.size()));
  }
  return generateEnvironments(catalogue, obstacle_threshold, duration);
}

DataSplit splitEnvironments(int environment_count, int train, int test, std::uint64_t seed) {
  if (train < 0 || environment_count < 0) throw ConfigError("split sizes must be non-negative");
  if (test < 0) test = environment_count - train;
  if (train + test > environment_count) {
    throw ConfigError("split asks for " + std::to_string(train + test) + " environments, only " +
                      std::to_string(environment_count) + " exist");
  }
  std::vector<int> ids(static_cast<std::size_t>(environment_count));
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  DataSplit split;
  split.seed = seed;
  split.train.assign(ids.begin(), ids.begin() + train);
  split.test.assign(ids.begin() + train, ids.begin() + train + test);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

EnvironmentSet environmentSetFromString(const std::string& name) {
  if (name == "train") return EnvironmentSet::Train;
  if (name == "test") return EnvironmentSet::Test;
  if (name == "all") return EnvironmentSet::All;
  throw ConfigError("environment set must be train, test or all; got '" + name + "'");
}

fs::path RunLayout::episode(EpisodeKind kind, int env_id) const {
  return episodes(kind) / (toString(kind) + "-" + std::to_string(env_id) + ".jsonl");
}

fs::path RunLayout::trace(int env_id) const {
  return traces() / ("trace-" + std::to_string(env_id) + ".csv");
}

std::vector<int> RunManifest::ids(EnvironmentSet set) const {
  switch (set) {
    case EnvironmentSet::Train:
      return split.train;
    case EnvironmentSet::Test:
      return split.test;
    case EnvironmentSet::All:
      break;
  }
  std::vector<int> all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  std::sort(all.begin(), all.end());
  return all;
}

const Environment& RunManifest::environment(int id) const {
  for (const auto& e : environments) {
    if (e.id == id) return e;
  }
  throw ConfigError("no environment with id " + std::to_string(id));
}

void to_json(json& j, const RunManifest& m) {
  j = json{{"seed", m.seed},
           {"config_hash", m.config_hash},
           {"split_seed", m.split.seed},
           {"train", m.split.train},
           {"test", m.split.test},
           {"environments", m.environments}};
}

void from_json(const json& j, RunManifest& m) {
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.split.seed = j.at("split_seed").get<std::uint64_t>();
  m.split.train = j.at("train").get<std::vector<int>>();
  m.split.test = j.at("test").get<std::vector<int>>();
  m.environments = j.at("environments").get<std::vector<Environment>>();
}

std::vector<std::optional<std::string>> runPool(std::size_t count, int parallelism,
                                                const std::function<void(std::size_t)>& task) {
  std::vector<std::optional<std::string>> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, parallelism));
  if (threads == 1 || count <= 1) {
    worker();
    return errors;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, count); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return errors;
}

CollectSummary collect(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  const RunLayout layout{out};
  fs::create_directories(layout.episodes(EpisodeKind::Mpc));

  CollectSummary summary;
  RunManifest& manifest = summary.manifest;
  manifest.seed = config.seed;
  manifest.config_hash = config.hash();
  manifest.environments =
      generateEnvironments(config.catalogue, config.obstacle_threshold, config.duration);
  const int count = static_cast<int>(manifest.environments.size());
  manifest.split = splitEnvironments(count, config.experiment.train_environments,
                                     config.experiment.full_sweep
                                         ? -1
                                         : config.experiment.test_environments,
                                     deriveSeed(config.seed, "split"));
  saveConfig(layout.config(), config);
  writeJson(layout.manifest(), manifest);

  summary.failures = runEpisodes(
      manifest.ids(EnvironmentSet::All), config.experiment.parallelism, "collect", [&](int id) {
        EpisodeLog log =
            runMpcEpisode(manifest.environment(id), config.duration, config.mpc,
                          config.episodeSimulation());
        log.header.config_hash = manifest.config_hash;
        writeEpisode(layout.episode(EpisodeKind::Mpc, id), log);
        if (log.footer.aborted) throw Error("episode aborted: " + log.footer.reason);
      });
  recordFailures(layout, "collect", summary.failures);
  return summary;
}

fs::path statsPath(const fs::path& model) { return fs::path(model.string() + ".stats.json"); }

fs::path runsForModel(const fs::path& model) {
  return readJson(statsPath(model)).at("runs").get<std::string>();
}

SwitchStats loadSwitchStats(const fs::path& model) {
  const json j = readJson(statsPath(model));
  return SwitchStats{j.at("mean").get<double>(), j.at("stddev").get<double>(),
                     j.at("alpha").get<double>()};
}

TrainSummary train(const fs::path& runs, const fs::path& model_path) {
  const RunLayout layout{runs};
  const ExperimentConfig config = loadConfig(layout.config());
  const RunManifest manifest = loadManifest(layout);

  std::vector<EpisodeLog> logs;
  for (int id : manifest.ids(EnvironmentSet::Train)) {
    const fs::path path = layout.episode(EpisodeKind::Mpc, id);
    if (fs::exists(path)) logs.push_back(readEpisode(path));
  }
  if (logs.empty()) throw InsufficientData("no training episodes found in " + runs.string());

  TrainingSetOptions options;
  options.max_rows = config.gp.max_rows;
  options.top_cost_fraction = config.gp.top_cost_fraction;
  options.fresh_only = config.gp.fresh_only;
  options.features = config.features;
  const TrainingSet set = buildTrainingSet(logs, options);

  RbfHyperparams h = config.gp.initial;
  if (config.gp.fit_hyperparameters) {
    HyperparameterSearch search = config.gp.search;
    search.seed = deriveSeed(config.seed, "hyperparameters");
    h = fitHyperparameters(set.x, set.y, h, search, config.gp.fit);
  }
  const GpModel model = GpModel::fit(set.x, set.y, h, config.gp.fit);
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  model.save(model_path);

  TrainSummary summary;
  summary.rows = set.size();
  summary.hyperparams = h;
  summary.effective_noise = model.effectiveNoise();
  summary.stats = trainingCostStats(logs, config.alpha);
  writeJson(statsPath(model_path), json{{"mean", summary.stats.mean},
                                        {"stddev", summary.stats.stddev},
                                        {"alpha", summary.stats.alpha},
                                        {"rows", summary.rows},
                                        {"config_hash", manifest.config_hash},
                                        {"runs", fs::absolute(runs).string()},
                                        {"effective_noise", summary.effective_noise}});
  writeJson(layout.modelPointer(), json{{"model", fs::absolute(model_path).string()}});
  return summary;
}

double ShadowTrace::rmsError() const {
  if (t.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double dr = gpc[i].right - mpc[i].right;
    const double dl = gpc[i].left - mpc[i].left;
    sum += 0.5 * (dr * dr + dl * dl);
  }
  return std::sqrt(sum / static_cast<double>(t.size()));
}

double ShadowTrace::mpcRms() const {
  if (t.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& u : mpc) sum += 0.5 * (u.right * u.right + u.left * u.left);
  return std::sqrt(sum / static_cast<double>(t.size()));
}

double ShadowTrace::fractionBelow(double variance_threshold) const {
  if (variance.empty()) return 1.0;
  const auto below = std::count_if(variance.begin(), variance.end(),
                                   [&](double v) { return v <= variance_threshold; });
  return static_cast<double>(below) / static_cast<double>(variance.size());
}

ShadowTrace shadowTrace(const EpisodeLog& mpc_log, const GpcController& gpc) {
  ShadowTrace trace;
  const Environment& env = mpc_log.header.environment;
  for (const auto& r : mpc_log.records) {
    if (!r.fresh) continue;
    State s;
    s.q = r.q;
    s.qdot = r.qdot;
    const GpcOutput out = gpc(s, env, r.t);
    trace.t.push_back(r.t);
    trace.mpc.push_back(r.control);
    trace.gpc.push_back(out.torques);
    trace.variance.push_back(out.variance);
  }
  return trace;
}

void writeTraceCsv(std::ostream& out, const ShadowTrace& trace) {
  out << "t,u_mpc_L,u_mpc_R,u_gpc_L,u_gpc_R,gp_variance\n";
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    out << formatDouble(trace.t[i]) << ',' << formatDouble(trace.mpc[i].left) << ','
        << formatDouble(trace.mpc[i].right) << ',' << formatDouble(trace.gpc[i].left) << ','
        << formatDouble(trace.gpc[i].right) << ',' << formatDouble(trace.variance[i]) << '\n';
  }
}

ShadowTrace readTraceCsv(std::istream& in) {
  ShadowTrace trace;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> v;
    while (std::getline(ss, field, ',')) v.push_back(std::stod(field));
    if (v.size() != 6) throw IoError("torque trace row needs 6 fields: " + line);
    trace.t.push_back(v[0]);
    trace.mpc.push_back(Torques{v[2], v[1]});
    trace.gpc.push_back(Torques{v[4], v[3]});
    trace.variance.push_back(v[5]);
  }
  return trace;
}

EvaluateSummary evaluate(const fs::path& runs, const fs::path& model_path, EnvironmentSet set) {
  const RunLayout layout{runs};
  const ExperimentConfig config = loadConfig(layout.config());
  const RunManifest manifest = loadManifest(layout);
  const GpcController gpc(GpModel::load(model_path), config.mpc.bounds, config.mpc.weights,
                          config.features);
  const SwitchStats stats = loadSwitchStats(model_path);

  fs::create_directories(layout.episodes(EpisodeKind::Gpc));
  fs::create_directories(layout.episodes(EpisodeKind::Supervised));
  fs::create_directories(layout.traces());

  EvaluateSummary summary;
  summary.env_ids = manifest.ids(set);
  summary.failures = runEpisodes(
      summary.env_ids, config.experiment.parallelism, "evaluate", [&](int id) {
        const Environment& env = manifest.environment(id);
        EpisodeLog gpc_log =
            runGpcEpisode(env, config.duration, config.mpc, config.episodeSimulation(), gpc);
        gpc_log.header.config_hash = manifest.config_hash;
        writeEpisode(layout.episode(EpisodeKind::Gpc, id), gpc_log);

        EpisodeLog supervised = runSupervisedEpisode(env, config.duration, config.mpc,
                                                     config.episodeSimulation(), gpc, stats,
                                                     config.supervisor);
        supervised.header.config_hash = manifest.config_hash;
        writeEpisode(layout.episode(EpisodeKind::Supervised, id), supervised);

        const fs::path mpc_path = layout.episode(EpisodeKind::Mpc, id);
        if (fs::exists(mpc_path)) {
          std::ofstream out(layout.trace(id));
          writeTraceCsv(out, shadowTrace(readEpisode(mpc_path), gpc));
          if (!out) throw IoError("failed writing " + layout.trace(id).string());
        }
        if (gpc_log.footer.aborted) throw Error("gpc episode aborted: " + gpc_log.footer.reason);
        if (supervised.footer.aborted) {
          throw Error("supervised episode aborted: " + supervised.footer.reason);
        }
      });
  recordFailures(layout, "evaluate", summary.failures);
  return summary;
}

std::vector<HistogramBucket> histogram(const std::vector<double>& values, double width) {
  if (!(width > 0.0)) throw ConfigError("histogram bucket width must be positive");
  std::map<long long, int> counts;
  for (double v : values) ++counts[static_cast<long long>(std::floor(v / width))];
  std::vector<HistogramBucket> buckets;
  for (const auto& [k, n] : counts) {
    buckets.push_back({static_cast<double>(k) * width, static_cast<double>(k + 1) * width, n});
  }
  return buckets;
}

TimingStats timingStats(const std::vector<double>& seconds) {
  TimingStats s;
  if (seconds.empty()) return s;
  const std::vector<double> ms = toMilliseconds(seconds);
  const double n = static_cast<double>(ms.size());
  s.mean = std::accumulate(ms.begin(), ms.end(), 0.0) / n;
  double sq = 0.0;
  for (double v : ms) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / n);
  s.cv = s.mean > 0.0 ? s.stddev / s.mean : 0.0;
  return s;
}

ComparisonReport compare(const fs::path& runs, double histogram_width_ms) {
  const RunLayout layout{runs};
  const RunManifest manifest = loadManifest(layout);
  const ExperimentConfig config = loadConfig(layout.config());

  ComparisonReport report;
  report.seed = manifest.seed;
  report.train = manifest.split.train;
  report.test = manifest.split.test;
  std::map<std::string, std::vector<double>> pooled;

  for (int id : manifest.ids(EnvironmentSet::All)) {
    const auto mpc = readIfExists(layout.episode(EpisodeKind::Mpc, id));
    if (!mpc) continue;
    EnvironmentComparison c;
    c.env_id = id;
    c.in_training = std::binary_search(report.train.begin(), report.train.end(), id);
    c.mpc_cost = mpc->totalCost();
    c.mpc_min_distance = mpc->minObstacleDistance();
    c.mpc_timing = timingStats(controlTimes(*mpc));
    report.metrics.push_back(metricsFor(*mpc));
    const auto mpc_times = controlTimes(*mpc);
    pooled["mpc"].insert(pooled["mpc"].end(), mpc_times.begin(), mpc_times.end());

    if (const auto gpc = readIfExists(layout.episode(EpisodeKind::Gpc, id))) {
      c.gpc_cost = gpc->totalCost();
      const auto times = controlTimes(*gpc);
      c.gpc_timing = timingStats(times);
      pooled["gpc"].insert(pooled["gpc"].end(), times.begin(), times.end());
      report.metrics.push_back(metricsFor(*gpc));
    }
    if (const auto sup = readIfExists(layout.episode(EpisodeKind::Supervised, id))) {
      c.supervised_cost = sup->totalCost();
      c.switched_at = sup->footer.switched_at;
      c.reverts = sup->footer.reverts;
      report.metrics.push_back(metricsFor(*sup));
    }
    if (fs::exists(layout.trace(id))) {
      std::ifstream in(layout.trace(id));
      const ShadowTrace trace = readTraceCsv(in);
      const double reference = trace.mpcRms();
      if (reference > 0.0) c.shadow_rms_ratio = trace.rmsError() / reference;
      c.variance_below_guard = trace.fractionBelow(config.supervisor.variance_threshold);
    }
    report.environments.push_back(c);
  }
  for (const auto& [controller, times] : pooled) {
    report.solve_time_histograms[controller] = histogram(toMilliseconds(times), histogram_width_ms);
    report.timing[controller] = timingStats(times);
  }
  return report;
}

json reportJson(const ComparisonReport& report, bool with_timing) {
  auto timingJson = [](const TimingStats& t) {
    return json{{"mean_ms", t.mean}, {"std_ms", t.stddev}, {"cv", t.cv}};
  };
  json envs = json::array();
  for (const auto& c : report.environments) {
    json e{{"env_id", c.env_id},
           {"in_training", c.in_training},
           {"mpc_cost", c.mpc_cost},
           {"mpc_min_distance", c.mpc_min_distance},
           {"reverts", c.reverts}};
    e["gpc_cost"] = c.gpc_cost ? json(*c.gpc_cost) : json(nullptr);
    e["gpc_cost_ratio"] = c.gpc_cost ? json(*c.gpc_cost / c.mpc_cost) : json(nullptr);
    e["supervised_cost"] = c.supervised_cost ? json(*c.supervised_cost) : json(nullptr);
    e["supervised_cost_ratio"] =
        c.supervised_cost ? json(*c.supervised_cost / c.mpc_cost) : json(nullptr);
    e["switched_at"] = c.switched_at ? json(*c.switched_at) : json(nullptr);
    e["shadow_rms_ratio"] = c.shadow_rms_ratio ? json(*c.shadow_rms_ratio) : json(nullptr);
    e["variance_below_guard"] =
        c.variance_below_guard ? json(*c.variance_below_guard) : json(nullptr);
    if (with_timing) {
      if (c.mpc_timing) e["mpc_timing"] = timingJson(*c.mpc_timing);
      if (c.gpc_timing) e["gpc_timing"] = timingJson(*c.gpc_timing);
    }
    envs.push_back(std::move(e));
  }
  json j{{"seed", report.seed},
         {"train", report.train},
         {"test", report.test},
         {"environments", envs}};
  if (with_timing) {
    json timing = json::object();
    for (const auto& [controller, t] : report.timing) timing[controller] = timingJson(t);
    j["timing"] = timing;
  }
  return j;
}

void writeReport(const ComparisonReport& report, const fs::path& out, bool with_timing) {
  fs::create_directories(out);
  {
    std::ofstream csv(out / "metrics.csv");
    if (!csv) throw IoError("cannot write " + (out / "metrics.csv").string());
    writeMetricsCsv(csv, report.metrics, with_timing);
  }
  writeJson(out / "summary.json", reportJson(report, with_timing));
  if (with_timing) {
    std::ofstream csv(out / "solve_time_histogram.csv");
    if (!csv) throw IoError("cannot write solve_time_histogram.csv");
    csv << "controller,lower_ms,upper_ms,count\n";
    for (const auto& [controller, buckets] : report.solve_time_histograms) {
      for (const auto& b : buckets) {
        csv << controller << ',' << formatDouble(b.lower) << ',' << formatDouble(b.upper) << ','
            << b.count << '\n';
      }
    }
  }
}

std::vector<fs::path> exportPlots(const fs::path& runs, const fs::path& out) {
  const RunLayout layout{runs};
  const RunManifest manifest = loadManifest(layout);
  const ExperimentConfig config = loadConfig(layout.config());
  fs::create_directories(out);
  std::vector<fs::path> written;

  auto open = [&](const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    written.push_back(path);
    return f;
  };

  for (const auto& curve : config.catalogue) {
    std::ofstream f = open(out / ("curve-" + curve.name + ".csv"));
    writeCurveCsv(f, curve, config.duration, config.simulation.control_period);
  }

  for (int id : manifest.ids(EnvironmentSet::All)) {
    const auto mpc = readIfExists(layout.episode(EpisodeKind::Mpc, id));
    if (!mpc) continue;
    const auto gpc = readIfExists(layout.episode(EpisodeKind::Gpc, id));
    const auto sup = readIfExists(layout.episode(EpisodeKind::Supervised, id));

    {
      std::ofstream f = open(out / ("trajectory-" + std::to_string(id) + ".csv"));
      f << "t,ref_x,ref_y,obstacle_x,obstacle_y,mpc_x,mpc_y,gpc_x,gpc_y,supervised_x,"
           "supervised_y\n";
      auto position = [](const std::optional<EpisodeLog>& log, std::size_t i) -> std::string {
        if (!log || i >= log->records.size()) return ",";
        return formatDouble(log->records[i].q(0)) + ',' + formatDouble(log->records[i].q(1));
      };
      for (std::size_t i = 0; i < mpc->records.size(); ++i) {
        const auto& r = mpc->records[i];
        f << formatDouble(r.t) << ',' << formatDouble(r.reference_head(0)) << ','
          << formatDouble(r.reference_head(1)) << ',' << formatDouble(r.obstacle_position(0))
          << ',' << formatDouble(r.obstacle_position(1)) << ',' << position(mpc, i) << ','
          << position(gpc, i) << ',' << position(sup, i) << '\n';
      }
    }
    if (fs::exists(layout.trace(id))) {
      std::ifstream in(layout.trace(id));
      const ShadowTrace trace = readTraceCsv(in);
      std::ofstream f = open(out / ("torque-" + std::to_string(id) + ".csv"));
      writeTraceCsv(f, trace);
    }
    if (gpc || sup) {
      std::ofstream f = open(out / ("variance-" + std::to_string(id) + ".csv"));
      f << "t,gpc_variance,supervised_variance,guard\n";
      const std::size_t n = std::max(gpc ? gpc->records.size() : 0, sup ? sup->records.size() : 0);
      auto variance = [](const std::optional<EpisodeLog>& log, std::size_t i) -> std::string {
        if (!log || i >= log->records.size() || !log->records[i].gp_variance) return "";
        return formatDouble(*log->records[i].gp_variance);
      };
      for (std::size_t i = 0; i < n; ++i) {
        const auto& source = gpc && i < gpc->records.size() ? *gpc : *sup;
        if (!source.records[i].fresh) continue;
        f << formatDouble(source.records[i].t) << ',' << variance(gpc, i) << ','
          << variance(sup, i) << ',' << formatDouble(config.supervisor.variance_threshold)
          << '\n';
      }
    }
  }
  return written;
}

}  // namespace gpc
