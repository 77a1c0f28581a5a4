// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <set>
#include <stdexcept>

#include "calrec/experiment.hpp"
#include "calrec/util/csv.hpp"
#include "test_support.hpp"

using namespace calrec;
using test::TempDir;
using test::write_file;

namespace fs = std::filesystem;

namespace {

// Small but full-width pipeline configuration over a synthetic dataset.
ExperimentConfig mini_config(const TempDir& dir, const std::string& out_name) {
  ExperimentConfig cfg;
  cfg.dataset.kind = "generic";
  cfg.dataset.interactions_path = dir.file("interactions.csv");
  cfg.dataset.genres_path = dir.file("genres.csv");
  cfg.dataset.preprocess.min_profile_size = 6;
  cfg.dataset.preprocess.min_item_interactions = 1;
  RecommenderConfig knn;
  knn.name = "user_knn";
  knn.algorithm = Algorithm::user_knn;
  RecommenderConfig slope;
  slope.name = "slope_one";
  slope.algorithm = Algorithm::slope_one;
  cfg.recommenders = {knn, slope};
  cfg.divergences = {DivergenceKind::kl, DivergenceKind::he};
  cfg.balances = {Balance::lin, Balance::log};
  cfg.lambdas = {LambdaPolicy::parse("0.0"), LambdaPolicy::parse("0.5"),
                 LambdaPolicy::parse("1.0"), LambdaPolicy::parse("var")};
  cfg.repetitions = 2;
  cfg.n = 3;
  cfg.candidate_size = 8;
  cfg.seed = 424242;
  cfg.out_dir = dir.file(out_name);
  return cfg;
}

void make_mini_dataset(const TempDir& dir) {
  test::write_generic_dataset(dir.file("interactions.csv"),
                              dir.file("genres.csv"),
                              /*n_users=*/14, /*n_items=*/30, /*n_genres=*/5,
                              /*min_ratings=*/10, /*max_ratings=*/14,
                              /*seed=*/20240817);
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), root).string();
    files[rel] = read_text_file(entry.path().string());
  }
  return files;
}

}  // namespace

TEST_CASE("experiment config defaults cover the full grid") {
  TempDir dir("cfgdef");
  write_file(dir.file("exp.ini"),
             "[dataset]\n"
             "kind = generic\n"
             "interactions = i.csv\n"
             "genres = g.csv\n");
  auto cfg = load_experiment_config(dir.file("exp.ini"));

  REQUIRE(cfg.recommenders.size() == 4);
  CHECK(cfg.recommenders[0].name == "user_knn");
  CHECK(cfg.recommenders[0].algorithm == Algorithm::user_knn);
  CHECK(cfg.recommenders[0].similarity == Similarity::msd);
  CHECK(cfg.recommenders[1].name == "item_knn");
  CHECK(cfg.recommenders[1].similarity == Similarity::pearson);
  CHECK(cfg.recommenders[2].algorithm == Algorithm::slope_one);
  CHECK(cfg.recommenders[3].algorithm == Algorithm::funk_svd);

  CHECK(cfg.divergences.size() == 3);
  CHECK(cfg.balances.size() == 2);
  REQUIRE(cfg.lambdas.size() == 13);
  CHECK(cfg.lambdas.front().label == "0.0");
  CHECK(cfg.lambdas[10].label == "1.0");
  CHECK(cfg.lambdas[11].kind == LambdaPolicy::Kind::var);
  CHECK(cfg.lambdas[12].kind == LambdaPolicy::Kind::cgr);

  // One recommender's slice of the grid spans 78 combinations.
  CHECK(cfg.divergences.size() * cfg.balances.size() * cfg.lambdas.size() == 78);

  CHECK(cfg.repetitions == 3);
  CHECK(cfg.n == 10);
  CHECK(cfg.candidate_size == 100);
  CHECK(cfg.smoothing.alpha == doctest::Approx(0.01));
  CHECK(cfg.eval_divergence == DivergenceKind::kl);
  CHECK(cfg.dataset.preprocess.min_profile_size == 30);
  CHECK(cfg.dataset.preprocess.train_fraction == doctest::Approx(0.7));
  CHECK_FALSE(cfg.dataset.bounds_set);
  CHECK(cfg.jobs == 1);
}

TEST_CASE("experiment config reads overrides and per-recommender sections") {
  TempDir dir("cfgover");
  write_file(dir.file("exp.ini"),
             "# top comment\n"
             "[dataset]\n"
             "kind = movielens\n"
             "interactions = r.csv\n"
             "genres = m.csv\n"
             "min_profile_size = 12\n"
             "rating_min = 0.5\n"
             "rating_max = 5\n"
             "\n"
             "[experiment]\n"
             "recommenders = mysvd, slope_one\n"
             "divergences = chi\n"
             "balances = log\n"
             "lambdas = 0.3, var\n"
             "repetitions = 1\n"
             "n = 5\n"
             "candidate_size = 25\n"
             "alpha = 0.05\n"
             "eval_divergence = he\n"
             "seed = 99\n"
             "jobs = 2\n"
             "\n"
             "[recommender.mysvd]\n"
             "algorithm = funk_svd\n"
             "factors = 4\n"
             "epochs = 2\n"
             "learn_rate = 0.01\n");
  auto cfg = load_experiment_config(dir.file("exp.ini"));

  CHECK(cfg.dataset.kind == "movielens");
  CHECK(cfg.dataset.preprocess.min_profile_size == 12);
  CHECK(cfg.dataset.bounds_set);
  CHECK(cfg.dataset.rating_min == doctest::Approx(0.5));
  REQUIRE(cfg.recommenders.size() == 2);
  CHECK(cfg.recommenders[0].name == "mysvd");
  CHECK(cfg.recommenders[0].algorithm == Algorithm::funk_svd);
  CHECK(cfg.recommenders[0].factors == 4);
  CHECK(cfg.recommenders[0].epochs == 2);
  CHECK(cfg.recommenders[0].candidate_size == 25);
  CHECK(cfg.recommenders[1].algorithm == Algorithm::slope_one);
  CHECK(cfg.divergences == std::vector<DivergenceKind>{DivergenceKind::chi});
  CHECK(cfg.lambdas.size() == 2);
  CHECK(cfg.eval_divergence == DivergenceKind::he);
  CHECK(cfg.smoothing.alpha == doctest::Approx(0.05));
  CHECK(cfg.seed == 99);
  CHECK(cfg.jobs == 2);
}

TEST_CASE("experiment config rejects mistakes loudly") {
  TempDir dir("cfgbad");

  write_file(dir.file("unknown.ini"),
             "[dataset]\ninteractions=i\ngenres=g\n[experiment]\nbogus = 1\n");
  CHECK_THROWS_WITH_AS(load_experiment_config(dir.file("unknown.ini")),
                       "unknown config key 'bogus' in section [experiment]",
                       std::runtime_error);

  write_file(dir.file("dup.ini"), "[dataset]\nkind = generic\nkind = generic\n");
  CHECK_THROWS_WITH_AS(load_experiment_config(dir.file("dup.ini")),
                       doctest::Contains("duplicate key"), std::runtime_error);

  write_file(dir.file("small.ini"),
             "[dataset]\ninteractions=i\ngenres=g\n"
             "[experiment]\nn = 10\ncandidate_size = 5\n");
  CHECK_THROWS_WITH_AS(load_experiment_config(dir.file("small.ini")),
                       "candidate_size must be >= n", std::runtime_error);

  write_file(dir.file("kind.ini"), "[dataset]\nkind = parquet\n");
  CHECK_THROWS_WITH_AS(load_experiment_config(dir.file("kind.ini")),
                       doctest::Contains("unknown dataset kind"),
                       std::runtime_error);

  write_file(dir.file("halfbounds.ini"),
             "[dataset]\ninteractions=i\ngenres=g\nrating_min = 1\n");
  CHECK_THROWS_WITH_AS(load_experiment_config(dir.file("halfbounds.ini")),
                       "rating_min and rating_max must be set together",
                       std::runtime_error);

  write_file(dir.file("lambda.ini"),
             "[dataset]\ninteractions=i\ngenres=g\n"
             "[experiment]\nlambdas = 0.5, 2.5\n");
  CHECK_THROWS_AS(load_experiment_config(dir.file("lambda.ini")),
                  std::invalid_argument);

  write_file(dir.file("nokv.ini"), "[dataset]\njust words\n");
  CHECK_THROWS_WITH_AS(load_experiment_config(dir.file("nokv.ini")),
                       doctest::Contains("line 2"), std::runtime_error);
}

TEST_CASE("full pipeline produces metrics for the whole grid") {
  TempDir dir("pipe");
  make_mini_dataset(dir);
  auto cfg = mini_config(dir, "out");
  run_all(cfg);

  fs::path out(cfg.out_dir);
  CHECK(fs::exists(out / "dataset" / "interactions.csv"));
  CHECK(fs::exists(out / "dataset" / "split_r0.csv"));
  CHECK(fs::exists(out / "dataset" / "split_r1.csv"));
  CHECK(fs::exists(out / "candidates" / "r0_user_knn.csv"));
  CHECK(fs::exists(out / "lists" / "r1_slope_one_he_log_var.csv"));
  CHECK(fs::exists(out / "eval" / "r0_user_knn_kl_lin_0.0.csv"));
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(fs::exists(out / "decision.csv"));
  CHECK(fs::exists(out / "decision_table.txt"));
  CHECK(fs::exists(out / "winner.txt"));
  CHECK(fs::exists(out / "manifest.json"));

  // 2 recommenders x 2 divergences x 2 balances x 4 lambdas x 2 repetitions.
  auto metrics = read_delimited((out / "metrics.csv").string());
  REQUIRE(metrics.size() == 1 + 64);
  for (std::size_t i = 1; i < metrics.size(); ++i) {
    double map = parse_double(metrics[i][5], "map");
    double mace = parse_double(metrics[i][6], "mace");
    double mrmc = parse_double(metrics[i][7], "mrmc");
    CHECK(map >= 0.0);
    CHECK(map <= 1.0);
    CHECK(mace >= 0.0);
    CHECK(mrmc >= 0.0);
  }

  // Grouping over repetitions leaves one decision row per combination, each
  // satisfying the coefficient sum identity exactly.
  auto decision = read_delimited((out / "decision.csv").string());
  REQUIRE(decision.size() == 1 + 32);
  for (std::size_t i = 1; i < decision.size(); ++i) {
    double cce_v = parse_double(decision[i][4], "cce");
    double cmc_v = parse_double(decision[i][5], "cmc");
    double s = parse_double(decision[i][6], "s");
    CHECK(s == cce_v + cmc_v);
  }

  auto winner = read_text_file((out / "winner.txt").string());
  CHECK(winner.rfind("winner: ", 0) == 0);

  auto manifest = read_text_file((out / "manifest.json").string());
  CHECK(manifest.find("\"config_hash\"") != std::string::npos);
  CHECK(manifest.find("\"failed\"") == std::string::npos);
}

TEST_CASE("pipeline reruns are byte-identical and job-count invariant") {
  TempDir dir("repro");
  make_mini_dataset(dir);

  auto cfg_a = mini_config(dir, "out_a");
  run_all(cfg_a);
  auto cfg_b = mini_config(dir, "out_b");
  run_all(cfg_b);
  auto cfg_c = mini_config(dir, "out_c");
  cfg_c.jobs = 3;
  run_all(cfg_c);

  auto tree_a = snapshot_tree(cfg_a.out_dir);
  auto tree_b = snapshot_tree(cfg_b.out_dir);
  auto tree_c = snapshot_tree(cfg_c.out_dir);
  tree_a.erase("manifest.json");  // carries wall-clock timings
  tree_b.erase("manifest.json");
  tree_c.erase("manifest.json");
  CHECK(tree_a == tree_b);
  CHECK(tree_a == tree_c);
}

TEST_CASE("stages compose to the same files as a single run") {
  TempDir dir("stages");
  make_mini_dataset(dir);

  auto cfg_all = mini_config(dir, "out_all");
  run_all(cfg_all);

  auto cfg_steps = mini_config(dir, "out_steps");
  stage_preprocess(cfg_steps);
  stage_recommend(cfg_steps);
  stage_postprocess(cfg_steps);
  stage_evaluate(cfg_steps);
  stage_decide(cfg_steps);

  auto tree_all = snapshot_tree(cfg_all.out_dir);
  tree_all.erase("manifest.json");  // only the single-shot runner writes it
  auto tree_steps = snapshot_tree(cfg_steps.out_dir);
  CHECK(tree_all == tree_steps);
}

TEST_CASE("an external recommender rides the same pipeline") {
  TempDir dir("ext");
  make_mini_dataset(dir);

  auto cfg = mini_config(dir, "out");
  RecommenderConfig ext;
  ext.name = "oracle";
  ext.algorithm = Algorithm::external;
  ext.predictions_path = dir.file("preds.csv");
  cfg.recommenders = {ext};
  cfg.repetitions = 1;

  // Preprocessing is deterministic, so the split read here is the split
  // the full run will use. Predict every non-train item per user, which
  // keeps the held-out items reachable.
  stage_preprocess(cfg);
  fs::path out(cfg.out_dir);
  std::map<std::string, std::set<std::string>> train_fold;
  for (const auto& row :
       read_delimited((out / "dataset" / "split_r0.csv").string())) {
    if (row[0] == "user_id") continue;
    if (row[2] == "train") train_fold[row[0]].insert(row[1]);
  }
  auto items = read_delimited((out / "dataset" / "genres.csv").string());
  SplitMix rng(7);
  std::string preds = "user_id,item_id,predicted_weight\n";
  for (const auto& [user, owned] : train_fold) {
    for (std::size_t i = 1; i < items.size(); ++i) {
      if (!owned.count(items[i][0])) {
        preds += user + "," + items[i][0] + "," +
                 format_double(1.0 + 4.0 * rng.uniform01()) + "\n";
      }
    }
  }
  write_file(dir.file("preds.csv"), preds);
  run_all(cfg);

  CHECK(fs::exists(out / "candidates" / "r0_oracle.csv"));
  auto metrics = read_delimited((out / "metrics.csv").string());
  CHECK(metrics.size() == 1 + 16);
  auto manifest = read_text_file((out / "manifest.json").string());
  CHECK(manifest.find("\"failed\"") == std::string::npos);
}

TEST_CASE("a broken recommender fails its combinations and spares the rest") {
  TempDir dir("poison");
  make_mini_dataset(dir);

  auto cfg = mini_config(dir, "out");
  RecommenderConfig ext;
  ext.name = "broken";
  ext.algorithm = Algorithm::external;
  ext.predictions_path = dir.file("missing_preds.csv");
  cfg.recommenders[1] = ext;
  cfg.repetitions = 1;
  run_all(cfg);

  fs::path out(cfg.out_dir);
  auto manifest = read_text_file((out / "manifest.json").string());
  CHECK(manifest.find("\"failed\"") != std::string::npos);
  CHECK(manifest.find("missing_preds.csv") != std::string::npos);

  // The healthy recommender still reaches the decision.
  auto metrics = read_delimited((out / "metrics.csv").string());
  CHECK(metrics.size() == 1 + 16);
  for (std::size_t i = 1; i < metrics.size(); ++i) {
    CHECK(metrics[i][0] == "user_knn");
  }
  auto winner = read_text_file((out / "winner.txt").string());
  CHECK(winner.find("user_knn") != std::string::npos);
}

TEST_CASE("evaluation failures name the offending file") {
  TempDir dir("evalfail");
  make_mini_dataset(dir);
  auto cfg = mini_config(dir, "out");
  cfg.repetitions = 1;
  stage_preprocess(cfg);
  stage_recommend(cfg);
  stage_postprocess(cfg);

  // Cut one ranked list below the evaluation depth.
  fs::path victim =
      fs::path(cfg.out_dir) / "lists" / "r0_user_knn_kl_lin_0.0.csv";
  auto rows = read_delimited(victim.string());
  std::string truncated;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c) truncated.push_back(',');
      truncated += rows[i][c];
    }
    truncated.push_back('\n');
  }
  write_file(victim.string(), truncated);

  auto report = stage_evaluate(cfg);
  int failed = 0;
  for (const auto& combo : report.combinations) {
    if (!combo.ok) {
      ++failed;
      CHECK(combo.error == "list shorter than evaluation depth");
      CHECK(combo.recommender == "user_knn");
      CHECK(combo.divergence == "kl");
      CHECK(combo.lambda == "0.0");
    }
  }
  CHECK(failed == 1);
  auto metrics = read_delimited((fs::path(cfg.out_dir) / "metrics.csv").string());
  CHECK(metrics.size() == 1 + 31);  // one combination missing
}

TEST_CASE("stages demand their prerequisites") {
  TempDir dir("prereq");
  make_mini_dataset(dir);
  auto cfg = mini_config(dir, "out");

  // Without the preprocess outputs nothing can run; loading the split
  // manifest fails before any per-recommender work starts.
  CHECK_THROWS_WITH_AS(stage_recommend(cfg), doctest::Contains("cannot open"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(stage_evaluate(cfg), doctest::Contains("cannot open"),
                       std::runtime_error);
}

TEST_CASE("the decision stage consumes handwritten metrics") {
  TempDir dir("decide");
  auto cfg = mini_config(dir, "out");
  fs::create_directories(cfg.out_dir);
  write_file((fs::path(cfg.out_dir) / "metrics.csv").string(),
             "recommender,divergence,balance,lambda,repetition,map,mace,mrmc\n"
             "alpha,kl,lin,0.5,0,0.5,0.1,0.2\n"
             "alpha,kl,lin,0.5,1,0.5,0.3,0.2\n"
             "beta,chi,log,0.5,0,0.25,0.05,0.05\n");
  stage_decide(cfg);

  // alpha: mace (0.1+0.3)/2 = 0.2, cce 0.4, cmc 0.4, s 0.8
  // beta:  cce 0.2, cmc 0.2, s 0.4
  auto winner = read_text_file((fs::path(cfg.out_dir) / "winner.txt").string());
  CHECK(winner == "winner: CHI-LOG-beta lambda=0.5 s=0.4\n");
  auto csv = read_text_file((fs::path(cfg.out_dir) / "decision.csv").string());
  CHECK(csv.find("alpha,kl,lin,0.5,0.4,0.4,0.8") != std::string::npos);

  TempDir no_metrics("decidebad");
  auto cfg2 = mini_config(no_metrics, "out");
  CHECK_THROWS_AS(stage_decide(cfg2), std::runtime_error);
}
