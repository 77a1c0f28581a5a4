// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "calrec/candidates.hpp"
#include "calrec/dataset.hpp"

namespace calrec {

enum class Algorithm { user_knn, item_knn, slope_one, funk_svd, external };
enum class Similarity { msd, pearson };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm algorithm);
Similarity similarity_from_string(const std::string& name);

struct RecommenderConfig {
  std::string name;  // label used in reports and output file names
  Algorithm algorithm = Algorithm::user_knn;
  int k_neighbors = 30;
  Similarity similarity = Similarity::msd;
  int factors = 50;
  int epochs = 50;
  double learn_rate = 0.005;
  double reg = 0.01;
  double rating_min = 1.0;
  double rating_max = 5.0;
  int candidate_size = 100;
  std::string predictions_path;  // external only
  std::uint64_t seed = 0;        // factor initialization
};

// A trained recommender. Immutable after construction; predictions are
// clamped to the configured rating bounds and fall back to neighborhood,
// user-mean, or global-mean estimates when data is missing. Unknown users
// are an error.
class TrainedModel {
 public:
  virtual ~TrainedModel() = default;
  virtual double predict(const std::string& user_id,
                         const std::string& item_id) const = 0;

  // Training mean absolute error after each epoch; empty for models
  // without iterative training.
  const std::vector<double>& train_mae_by_epoch() const { return epoch_mae_; }

 protected:
  std::vector<double> epoch_mae_;
};

std::unique_ptr<TrainedModel> train(const InteractionTable& train_table,
                                    const RecommenderConfig& cfg);

// Scores every catalog item outside the user's train set and returns the
// top n under the candidate ordering.
CandidateList candidates(const TrainedModel& model, const std::string& user_id,
                         const InteractionTable& catalog,
                         const std::set<std::string>& train_items_of_user,
                         int n);

// CSV `user_id,item_id,predicted_weight`; items must exist in the genre
// catalog, duplicate (user, item) rows are an error. Keeps the top
// candidate_size rows per user.
std::map<std::string, CandidateList> load_external_predictions(
    const std::string& path, int candidate_size,
    const InteractionTable& catalog);

}  // namespace calrec
