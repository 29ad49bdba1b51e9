#include "gpc/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "gpc/config.hpp"

namespace gpc {

namespace {

using nlohmann::json;

template <typename Derived>
json vec(const Eigen::MatrixBase<Derived>& v) {
  std::vector<double> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
  return out;
}

template <int N>
Eigen::Matrix<double, N, 1> fixedVec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != N) throw IoError("episode record has a vector of the wrong length");
  return Eigen::Map<const Eigen::Matrix<double, N, 1>>(v.data());
}

Quality qualityFromString(const std::string& s) {
  if (s == "ok") return Quality::Ok;
  if (s == "notConverged") return Quality::NotConverged;
  throw IoError("unknown quality flag '" + s + "'");
}

ControllerKind controllerFromString(const std::string& s) {
  if (s == "mpc") return ControllerKind::Mpc;
  if (s == "gpc") return ControllerKind::Gpc;
  throw IoError("unknown controller '" + s + "'");
}

EpisodeKind episodeKindFromString(const std::string& s) {
  if (s == "mpc") return EpisodeKind::Mpc;
  if (s == "gpc") return EpisodeKind::Gpc;
  if (s == "supervised") return EpisodeKind::Supervised;
  throw IoError("unknown episode kind '" + s + "'");
}

json headerJson(const EpisodeHeader& h) {
  return json{{"type", "header"},
              {"schema_version", h.schema_version},
              {"config_hash", h.config_hash},
              {"episode_id", h.episode_id},
              {"kind", toString(h.kind)},
              {"environment", h.environment},
              {"horizon", h.horizon},
              {"control_dt", h.control_dt},
              {"sim_dt", h.sim_dt}};
}

EpisodeHeader headerFromJson(const json& j) {
  EpisodeHeader h;
  h.schema_version = j.at("schema_version").get<int>();
  if (h.schema_version != kEpisodeSchemaVersion) {
    throw IoError("unsupported episode schema version " + std::to_string(h.schema_version));
  }
  h.config_hash = j.at("config_hash").get<std::string>();
  h.episode_id = j.at("episode_id").get<std::string>();
  h.kind = episodeKindFromString(j.at("kind").get<std::string>());
  h.environment = j.at("environment").get<Environment>();
  h.horizon = j.at("horizon").get<int>();
  h.control_dt = j.at("control_dt").get<double>();
  h.sim_dt = j.at("sim_dt").get<double>();
  return h;
}

json recordJson(const SampleRecord& r, bool with_timing) {
  json j{{"t", r.t},
         {"q", vec(r.q)},
         {"qdot", vec(r.qdot)},
         {"obstacle_p", vec(r.obstacle_position)},
         {"obstacle_v", vec(r.obstacle_velocity)},
         {"r_th", r.obstacle_threshold},
         {"reference_head", vec(r.reference_head)},
         {"window_digest", r.window_digest},
         {"u", {r.control.right, r.control.left}},
         {"w", {r.disturbance.right, r.disturbance.left}},
         {"stage_cost", r.stage_cost},
         {"solve_time", with_timing ? r.solve_time : 0.0},
         {"quality", toString(r.quality)},
         {"fresh", r.fresh},
         {"controller", toString(r.controller)},
         {"iterations", r.solver_iterations}};
  if (r.shadow_control) j["shadow_u"] = {r.shadow_control->right, r.shadow_control->left};
  if (r.gp_variance) j["gp_variance"] = *r.gp_variance;
  return j;
}

SampleRecord recordFromJson(const json& j) {
  SampleRecord r;
  r.t = j.at("t").get<double>();
  r.q = fixedVec<5>(j.at("q"));
  r.qdot = fixedVec<5>(j.at("qdot"));
  r.obstacle_position = fixedVec<2>(j.at("obstacle_p"));
  r.obstacle_velocity = fixedVec<2>(j.at("obstacle_v"));
  r.obstacle_threshold = j.at("r_th").get<double>();
  r.reference_head = fixedVec<3>(j.at("reference_head"));
  r.window_digest = j.at("window_digest").get<std::string>();
  const Eigen::Vector2d u = fixedVec<2>(j.at("u"));
  r.control = Torques{u(0), u(1)};
  if (j.contains("w")) {
    const Eigen::Vector2d w = fixedVec<2>(j.at("w"));
    r.disturbance = Torques{w(0), w(1)};
  }
  r.stage_cost = j.at("stage_cost").get<double>();
  r.solve_time = j.at("solve_time").get<double>();
  r.quality = qualityFromString(j.at("quality").get<std::string>());
  r.fresh = j.at("fresh").get<bool>();
  r.controller = controllerFromString(j.at("controller").get<std::string>());
  r.solver_iterations = j.at("iterations").get<int>();
  if (j.contains("shadow_u")) {
    const Eigen::Vector2d s = fixedVec<2>(j.at("shadow_u"));
    r.shadow_control = Torques{s(0), s(1)};
  }
  if (j.contains("gp_variance")) r.gp_variance = j.at("gp_variance").get<double>();
  return r;
}

json footerJson(const EpisodeFooter& f) {
  json j{{"type", "footer"},
         {"aborted", f.aborted},
         {"reason", f.reason},
         {"switched_at", nullptr},
         {"reverts", f.reverts}};
  if (f.switched_at) j["switched_at"] = *f.switched_at;
  return j;
}

EpisodeFooter footerFromJson(const json& j) {
  EpisodeFooter f;
  f.aborted = j.at("aborted").get<bool>();
  f.reason = j.at("reason").get<std::string>();
  if (!j.at("switched_at").is_null()) f.switched_at = j.at("switched_at").get<int>();
  f.reverts = j.at("reverts").get<int>();
  return f;
}

std::string formatDouble(double v) {
  // Shortest text that reads back to the same double.
  char buffer[32];
  const auto end = std::to_chars(buffer, buffer + sizeof(buffer), v).ptr;
  return std::string(buffer, end);
}

}  // namespace

EpisodeWriter::EpisodeWriter(const std::filesystem::path& path, const EpisodeHeader& header)
    : out_(path, std::ios::binary | std::ios::trunc), episode_id_(header.episode_id) {
  if (!out_) throw IoError("episode " + episode_id_ + ": cannot open " + path.string());
  out_ << headerJson(header).dump() << '\n';
  check();
}

EpisodeWriter::~EpisodeWriter() {
  if (!closed_ && out_.is_open()) out_.flush();
}

void EpisodeWriter::check() const {
  if (!out_) throw IoError("episode " + episode_id_ + ": write failed");
}

void EpisodeWriter::append(const SampleRecord& record) {
  if (closed_) throw IoError("episode " + episode_id_ + ": append after close");
  if (last_t_ && !(record.t > *last_t_)) {
    throw OrderViolation("episode " + episode_id_ + ": record time " + formatDouble(record.t) +
                         " does not follow " + formatDouble(*last_t_));
  }
  last_t_ = record.t;
  out_ << recordJson(record, true).dump() << '\n';
  check();
}

void EpisodeWriter::close(const EpisodeFooter& footer) {
  if (closed_) return;
  out_ << footerJson(footer).dump() << '\n';
  out_.flush();
  check();
  out_.close();
  closed_ = true;
}

void writeEpisode(const std::filesystem::path& path, const EpisodeLog& log) {
  EpisodeWriter writer(path, log.header);
  for (const auto& r : log.records) writer.append(r);
  writer.close(log.footer);
}

EpisodeLog readEpisode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read episode file " + path.string());
  EpisodeLog log;
  bool have_header = false;
  bool have_footer = false;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_number);
    if (have_footer) throw IoError(where + ": data after the footer");
    try {
      const json j = json::parse(line);
      const std::string type = j.value("type", "");
      if (!have_header) {
        if (type != "header") throw IoError(where + ": missing header");
        log.header = headerFromJson(j);
        have_header = true;
      } else if (type == "footer") {
        log.footer = footerFromJson(j);
        have_footer = true;
      } else {
        SampleRecord r = recordFromJson(j);
        if (!log.records.empty() && !(r.t > log.records.back().t)) {
          throw OrderViolation(where + ": time is not increasing");
        }
        log.records.push_back(std::move(r));
      }
    } catch (const json::exception& e) {
      throw IoError(where + ": " + e.what());
    }
  }
  if (!have_header) throw IoError(path.string() + ": empty episode file");
  if (!have_footer) {
    log.footer.aborted = true;
    log.footer.reason = "episode file has no footer";
  }
  return log;
}

std::string episodeText(const EpisodeLog& log, bool with_timing) {
  std::string text = headerJson(log.header).dump() + '\n';
  for (const auto& r : log.records) text += recordJson(r, with_timing).dump() + '\n';
  text += footerJson(log.footer).dump() + '\n';
  return text;
}

TrainingSet buildTrainingSet(const std::vector<EpisodeLog>& episodes,
                             const TrainingSetOptions& options) {
  if (episodes.empty()) throw InsufficientData("no episodes to build a training set from");
  if (options.max_rows < 1) throw ConfigError("training set needs max_rows >= 1");

  struct Candidate {
    std::size_t episode;
    std::size_t step;
  };
  std::vector<Candidate> candidates;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& records = episodes[e].records;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (r.quality != Quality::Ok || r.controller != ControllerKind::Mpc) continue;
      if (options.fresh_only && !r.fresh) continue;
      candidates.push_back({e, i});
    }
  }
  if (candidates.empty()) {
    throw EmptyAfterFiltering("every logged sample was filtered out of the training set");
  }

  const auto count = static_cast<Eigen::Index>(candidates.size());
  std::vector<std::size_t> chosen;
  auto spread = [](std::size_t available, std::size_t wanted) {
    std::vector<std::size_t> picks;
    picks.reserve(wanted);
    for (std::size_t k = 0; k < wanted; ++k) picks.push_back(k * available / wanted);
    return picks;
  };
  if (count <= options.max_rows) {
    chosen.resize(candidates.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  } else if (options.strategy == Subsampling::UniformStride) {
    chosen = spread(candidates.size(), static_cast<std::size_t>(options.max_rows));
  } else {
    const auto cost = [&](std::size_t c) {
      return episodes[candidates[c].episode].records[candidates[c].step].stage_cost;
    };
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cost(a) > cost(b); });
    const auto forced = std::min<std::size_t>(
        static_cast<std::size_t>(options.max_rows),
        static_cast<std::size_t>(std::ceil(options.top_cost_fraction * count)));
    std::vector<bool> is_forced(candidates.size(), false);
    for (std::size_t k = 0; k < forced; ++k) is_forced[order[k]] = true;

    std::vector<std::size_t> rest;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (is_forced[c]) {
        chosen.push_back(c);
      } else {
        rest.push_back(c);
      }
    }
    const std::size_t budget = static_cast<std::size_t>(options.max_rows) - forced;
    for (std::size_t k : spread(rest.size(), std::min(budget, rest.size()))) {
      chosen.push_back(rest[k]);
    }
    std::sort(chosen.begin(), chosen.end());
  }

  TrainingSet set;
  const auto n = static_cast<Eigen::Index>(chosen.size());
  set.x.resize(n, kFeatureDimension);
  set.y.resize(n, 2);
  set.provenance.reserve(chosen.size());
  set.stage_costs.reserve(chosen.size());
  for (Eigen::Index row = 0; row < n; ++row) {
    const Candidate& c = candidates[chosen[static_cast<std::size_t>(row)]];
    const EpisodeLog& log = episodes[c.episode];
    const SampleRecord& r = log.records[c.step];
    const Path& reference = log.header.environment.reference;

    const ReferenceWindow window =
        referenceWindow(reference, r.t + log.header.control_dt, log.header.horizon,
                        log.header.control_dt);
    if (windowDigest(window) != r.window_digest) {
      throw IoError("episode " + log.header.episode_id + " step " + std::to_string(c.step) +
                    ": reference window does not match the logged digest");
    }
    State s;
    s.q = r.q;
    s.qdot = r.qdot;
    const ObstacleState obstacle{r.obstacle_position, r.obstacle_velocity, r.obstacle_threshold};
    const ReferenceWindow features_window =
        referenceWindow(reference, r.t, log.header.horizon + 1, log.header.control_dt);
    set.x.row(row) = buildFeatures(s, obstacle, features_window, options.features).transpose();
    set.y(row, 0) = r.control.right;
    set.y(row, 1) = r.control.left;
    set.provenance.push_back({log.header.episode_id, c.step});
    set.stage_costs.push_back(r.stage_cost);
  }
  return set;
}

SwitchStats trainingCostStats(const std::vector<EpisodeLog>& episodes, double alpha) {
  std::vector<double> costs;
  for (const auto& log : episodes) {
    for (const auto& r : log.records) {
      if (r.quality == Quality::Ok) costs.push_back(r.stage_cost);
    }
  }
  if (costs.size() < 2) {
    throw InsufficientData("switch statistics need at least two quality-ok samples");
  }
  const double n = static_cast<double>(costs.size());
  const double mean = std::accumulate(costs.begin(), costs.end(), 0.0) / n;
  double sq = 0.0;
  for (double c : costs) sq += (c - mean) * (c - mean);
  return SwitchStats{mean, std::sqrt(sq / n), alpha};
}

std::vector<double> controlTimes(const EpisodeLog& log) {
  std::vector<double> times;
  for (const auto& r : log.records) {
    if (r.fresh) times.push_back(r.solve_time);
  }
  return times;
}

MetricsRow metricsFor(const EpisodeLog& log) {
  MetricsRow row;
  row.env_id = log.header.environment.id;
  row.controller = toString(log.header.kind);
  row.total_cost = log.totalCost();
  const std::vector<double> times = controlTimes(log);
  if (!times.empty()) {
    const double n = static_cast<double>(times.size());
    const double mean = std::accumulate(times.begin(), times.end(), 0.0) / n;
    double sq = 0.0;
    for (double t : times) sq += (t - mean) * (t - mean);
    row.mean_solve_time = 1e3 * mean;
    row.std_solve_time = 1e3 * std::sqrt(sq / n);
  }
  row.min_obstacle_distance = log.minObstacleDistance();
  row.switched_at = log.footer.switched_at;
  return row;
}

void writeMetricsCsv(std::ostream& out, const std::vector<MetricsRow>& rows, bool with_timing) {
  out << "env_id,controller,total_cost,mean_solve_time,std_solve_time,min_obstacle_distance,"
         "switched_at\n";
  for (const auto& r : rows) {
    out << r.env_id << ',' << r.controller << ',' << formatDouble(r.total_cost) << ','
        << (with_timing ? formatDouble(r.mean_solve_time) : "") << ','
        << (with_timing ? formatDouble(r.std_solve_time) : "") << ','
        << formatDouble(r.min_obstacle_distance) << ','
        << (r.switched_at ? std::to_string(*r.switched_at) : "") << '\n';
  }
  if (!out) throw IoError("failed writing metrics table");
}

std::vector<MetricsRow> readMetricsCsv(std::istream& in) {
  std::vector<MetricsRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 7) throw IoError("metrics row has " + std::to_string(fields.size()) +
                                          " fields: " + line);
    MetricsRow r;
    auto number = [](const std::string& s) { return s.empty() ? 0.0 : std::stod(s); };
    r.env_id = std::stoi(fields[0]);
    r.controller = fields[1];
    r.total_cost = number(fields[2]);
    r.mean_solve_time = number(fields[3]);
    r.std_solve_time = number(fields[4]);
    r.min_obstacle_distance = number(fields[5]);
    if (!fields[6].empty()) r.switched_at = std::stoi(fields[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace gpc
