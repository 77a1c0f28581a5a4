// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "calrec/dataset.hpp"
#include "calrec/divergence.hpp"
#include "calrec/metrics.hpp"
#include "calrec/recommend.hpp"
#include "calrec/tradeoff.hpp"

namespace calrec {

struct DatasetSpec {
  std::string kind = "generic";  // movielens | tasteprofile | generic
  std::string interactions_path;
  std::string genres_path;
  PreprocessConfig preprocess;
  // When unset, bounds follow the domain: 1..5 for movies, 1..max observed
  // play count for songs, observed min..max otherwise.
  bool bounds_set = false;
  double rating_min = 0.0;
  double rating_max = 0.0;

  Domain domain() const;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<RecommenderConfig> recommenders;
  std::vector<DivergenceKind> divergences;
  std::vector<Balance> balances;
  std::vector<LambdaPolicy> lambdas;
  int repetitions = 3;
  int n = 10;
  int candidate_size = 100;
  SmoothingParams smoothing;
  DivergenceKind eval_divergence = DivergenceKind::kl;
  double bias_alpha = 0.01;
  double bias_sigma = 0.01;
  double log_base = std::numbers::e;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out_dir = "out";
  std::string config_text;  // raw file contents, hashed into the manifest
};

// Flat key-value file with [section] headers; unknown keys are an error.
// Omitted keys fall back to the defaults above.
ExperimentConfig load_experiment_config(const std::string& path);

struct CombinationStatus {
  std::string stage;
  std::string recommender;
  std::string divergence;
  std::string balance;
  std::string lambda;
  int repetition = 0;
  bool ok = true;
  std::string error;
};

struct StageReport {
  std::string name;
  std::vector<CombinationStatus> combinations;
};

// Pipeline stages. Each consumes the previous stage's files under
// cfg.out_dir and writes its own, so they compose across processes.
StageReport stage_preprocess(const ExperimentConfig& cfg);
StageReport stage_recommend(const ExperimentConfig& cfg);
StageReport stage_postprocess(const ExperimentConfig& cfg);
StageReport stage_evaluate(const ExperimentConfig& cfg);
StageReport stage_decide(const ExperimentConfig& cfg);

// All stages in order. Per-combination failures are recorded and do not
// stop independent combinations; the manifest written at cfg.out_dir
// records statuses, output paths, and wall-clock times.
void run_all(const ExperimentConfig& cfg);

}  // namespace calrec
