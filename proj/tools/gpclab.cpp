// gpclab: collect MPC data, train the GP controller, evaluate and compare.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "gpc/harness.hpp"

namespace fs = std::filesystem;

namespace {

int runCollect(const fs::path& config_path, const fs::path& out) {
  const gpc::ExperimentConfig config =
      config_path.empty() ? gpc::defaultConfig() : gpc::loadConfig(config_path);
  if (config.experiment.full_sweep) {
    std::cerr << "warning: full sweep enabled, every environment of the matrix will be run; "
                 "expect a long runtime\n";
  }
  const gpc::CollectSummary s = gpc::collect(config, out);
  std::cout << "collected " << s.manifest.ids(gpc::EnvironmentSet::All).size()
            << " MPC episodes into " << out.string() << " (train";
  for (int id : s.manifest.split.train) std::cout << ' ' << id;
  std::cout << ", test";
  for (int id : s.manifest.split.test) std::cout << ' ' << id;
  std::cout << ")\n";
  for (const auto& f : s.failures) {
    std::cerr << "failed env " << f.env_id << ": " << f.message << '\n';
  }
  return s.failures.empty() ? 0 : 2;
}

int runTrain(const fs::path& runs, const fs::path& model) {
  const gpc::TrainSummary s = gpc::train(runs, model);
  std::cout << "trained on " << s.rows << " rows, noise " << s.effective_noise
            << ", switch threshold " << s.stats.threshold() << " (mean " << s.stats.mean
            << ", std " << s.stats.stddev << ", alpha " << s.stats.alpha << ")\n"
            << "model written to " << model.string() << '\n';
  return 0;
}

int runEvaluate(const fs::path& model, const std::string& envs, fs::path runs) {
  if (runs.empty()) runs = gpc::runsForModel(model);
  const gpc::EvaluateSummary s =
      gpc::evaluate(runs, model, gpc::environmentSetFromString(envs));
  std::cout << "evaluated " << s.env_ids.size() << " environments in " << runs.string() << '\n';
  for (const auto& f : s.failures) {
    std::cerr << "failed env " << f.env_id << ": " << f.message << '\n';
  }
  return s.failures.empty() ? 0 : 2;
}

int runCompare(const fs::path& runs, const fs::path& out, double bucket_ms) {
  const gpc::ComparisonReport report = gpc::compare(runs, bucket_ms);
  gpc::writeReport(report, out);
  std::cout << "env  train  mpc_cost  gpc/mpc  supervised/mpc  switched_at\n";
  for (const auto& c : report.environments) {
    std::cout << c.env_id << "  " << (c.in_training ? "yes" : "no") << "  " << c.mpc_cost << "  ";
    if (c.gpc_cost) {
      std::cout << *c.gpc_cost / c.mpc_cost;
    } else {
      std::cout << '-';
    }
    std::cout << "  ";
    if (c.supervised_cost) {
      std::cout << *c.supervised_cost / c.mpc_cost;
    } else {
      std::cout << '-';
    }
    std::cout << "  " << (c.switched_at ? std::to_string(*c.switched_at) : "-") << '\n';
  }
  for (const auto& [controller, t] : report.timing) {
    std::cout << controller << " compute time: mean " << t.mean << " ms, std " << t.stddev
              << " ms, cv " << t.cv << '\n';
  }
  std::cout << "report written to " << out.string() << '\n';
  return 0;
}

int runExportPlots(const fs::path& runs, const fs::path& out) {
  const auto files = gpc::exportPlots(runs, out);
  std::cout << "wrote " << files.size() << " plot series to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP imitation of a nonlinear MPC for a differential-drive robot"};
  app.require_subcommand(1);

  fs::path config_path;
  fs::path out;
  fs::path runs;
  fs::path model;
  std::string envs = "test";
  double bucket_ms = 1.0;

  auto* init = app.add_subcommand("init-config", "Write the built-in configuration");
  init->add_option("--out", out, "Config file to write")->required();

  auto* collect = app.add_subcommand("collect", "Run MPC episodes and log them");
  collect->add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  collect->add_option("--out", out, "Run directory")->required();

  auto* train = app.add_subcommand("train", "Fit the GP controller on training logs");
  train->add_option("--runs", runs, "Run directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--model", model, "Model file to write")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Run GPC and supervised episodes");
  evaluate->add_option("--model", model, "Trained model")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--envs", envs, "train, test or all")
      ->check(CLI::IsMember({"train", "test", "all"}));
  evaluate->add_option("--runs", runs, "Run directory (defaults to the one the model came from)");

  auto* compare = app.add_subcommand("compare", "Aggregate logs into a comparison report");
  compare->add_option("--runs", runs, "Run directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--out", out, "Report directory")->required();
  compare->add_option("--bucket-ms", bucket_ms, "Solve-time histogram bucket width [ms]");

  auto* plots = app.add_subcommand("export-plots", "Write plot-ready CSV series");
  plots->add_option("--runs", runs, "Run directory")->required()->check(CLI::ExistingDirectory);
  plots->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*init) {
      gpc::saveConfig(out, gpc::defaultConfig());
      std::cout << "wrote " << out.string() << '\n';
      return 0;
    }
    if (*collect) return runCollect(config_path, out);
    if (*train) return runTrain(runs, model);
    if (*evaluate) return runEvaluate(model, envs, runs);
    if (*compare) return runCompare(runs, out, bucket_ms);
    if (*plots) return runExportPlots(runs, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
