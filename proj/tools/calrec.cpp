// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "calrec/experiment.hpp"
#include "calrec/util/csv.hpp"

namespace {

int report_failures(const calrec::StageReport& report) {
  int failed = 0;
  for (const auto& c : report.combinations) {
    if (c.ok) continue;
    ++failed;
    std::cerr << report.name << " failed";
    if (!c.recommender.empty()) std::cerr << " recommender=" << c.recommender;
    if (!c.divergence.empty()) std::cerr << " divergence=" << c.divergence;
    if (!c.balance.empty()) std::cerr << " balance=" << c.balance;
    if (!c.lambda.empty()) std::cerr << " lambda=" << c.lambda;
    std::cerr << " repetition=" << c.repetition << ": " << c.error << "\n";
  }
  if (failed > 0 && failed == static_cast<int>(report.combinations.size())) {
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated recommendation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "Experiment config file")
      ->required();
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  int jobs = 0;
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads")
                       ->check(CLI::PositiveNumber);
  std::string out_dir;
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");

  auto* cmd_run = app.add_subcommand("run", "All stages in order");
  auto* cmd_preprocess =
      app.add_subcommand("preprocess", "Load, filter, and split the dataset");
  auto* cmd_recommend =
      app.add_subcommand("recommend", "Train recommenders, emit candidates");
  auto* cmd_postprocess =
      app.add_subcommand("postprocess", "Calibrated re-ranking of candidates");
  auto* cmd_evaluate =
      app.add_subcommand("evaluate", "Per-user and per-system metrics");
  auto* cmd_decide = app.add_subcommand("decide", "Decision protocol report");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    calrec::ExperimentConfig cfg =
        calrec::load_experiment_config(config_path);
    if (*seed_opt) cfg.seed = seed;
    if (*jobs_opt) cfg.jobs = static_cast<unsigned>(jobs);
    if (*out_opt) cfg.out_dir = out_dir;

    if (cmd_run->parsed()) {
      calrec::run_all(cfg);
      std::cout << calrec::read_text_file(
          (std::string(cfg.out_dir) + "/winner.txt"));
      return 0;
    }
    if (cmd_preprocess->parsed()) {
      return report_failures(calrec::stage_preprocess(cfg));
    }
    if (cmd_recommend->parsed()) {
      return report_failures(calrec::stage_recommend(cfg));
    }
    if (cmd_postprocess->parsed()) {
      return report_failures(calrec::stage_postprocess(cfg));
    }
    if (cmd_evaluate->parsed()) {
      return report_failures(calrec::stage_evaluate(cfg));
    }
    if (cmd_decide->parsed()) {
      auto report = calrec::stage_decide(cfg);
      std::cout << calrec::read_text_file(
          (std::string(cfg.out_dir) + "/winner.txt"));
      return report_failures(report);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
